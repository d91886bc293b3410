#include "waferseg/image_io.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "waferseg/binio.hpp"

namespace waferseg {

namespace {
std::string pnm_header(const char* magic, int height, int width) {
  std::ostringstream os;
  os << magic << "\n" << width << " " << height << "\n255\n";
  return os.str();
}
}  // namespace

void write_pgm(const std::string& path, const std::vector<double>& image, int height, int width) {
  if (static_cast<long long>(image.size()) != 1LL * height * width)
    throw std::invalid_argument("write_pgm: size mismatch");
  std::string out = pnm_header("P5", height, width);
  out.reserve(out.size() + image.size());
  for (double v : image) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<uint8_t>(c * 255.0 + 0.5)));
  }
  binio::atomic_write(path, out);
}

void write_class_ppm(const std::string& path, const std::vector<uint8_t>& labels, int height,
                     int width) {
  if (static_cast<long long>(labels.size()) != 1LL * height * width)
    throw std::invalid_argument("write_class_ppm: size mismatch");
  std::string out = pnm_header("P6", height, width);
  out.reserve(out.size() + labels.size() * 3);
  for (uint8_t l : labels) {
    if (l > 2) throw std::invalid_argument("write_class_ppm: label out of range");
    for (uint8_t ch : kClassPalette[l]) out.push_back(static_cast<char>(ch));
  }
  binio::atomic_write(path, out);
}

void write_class_ppm(const std::string& path, const LabelMap& labels) {
  if (labels.n != 1) throw std::invalid_argument("write_class_ppm: expected a single label map");
  write_class_ppm(path, labels.v, labels.h, labels.w);
}

void write_diff_ppm(const std::string& path, const LabelMap& predicted, const LabelMap& truth) {
  if (predicted.n != 1 || truth.n != 1 || predicted.h != truth.h || predicted.w != truth.w)
    throw std::invalid_argument("write_diff_ppm: shape mismatch");
  std::string out = pnm_header("P6", predicted.h, predicted.w);
  out.reserve(out.size() + predicted.v.size() * 3);
  for (size_t i = 0; i < predicted.v.size(); ++i) {
    const uint8_t p = predicted.v[i], t = truth.v[i];
    if (p > 2 || t > 2) throw std::invalid_argument("write_diff_ppm: label out of range");
    const auto& base = kClassPalette[p];
    if (p == t) {
      for (uint8_t ch : base) out.push_back(static_cast<char>(ch / 2));
    } else {
      out.push_back(static_cast<char>(std::min(255, base[0] + 128)));
      out.push_back(static_cast<char>(base[1]));
      out.push_back(static_cast<char>(base[2]));
    }
  }
  binio::atomic_write(path, out);
}

}  // namespace waferseg
