#include "waferseg/pipeline.hpp"

#include <cmath>
#include <stdexcept>

#include "waferseg/rng.hpp"

namespace waferseg {

void PreprocessConfig::validate() const {
  for (int r : rotations)
    if (r != 90 && r != 180 && r != 270)
      throw std::invalid_argument("rotations may contain only 90, 180, 270; got " +
                                  std::to_string(r));
}

Preprocessed preprocess(const WaferSample& sample, const PreprocessConfig& config) {
  config.validate();
  const int H = sample.height, W = sample.width;
  const long long N = 1LL * H * W;
  for (double v : sample.image)
    if (v < 0 || v > 1)
      throw std::invalid_argument("preprocess: image values must lie in [0, 1]");

  Preprocessed out;
  out.isCluster = sample.isCluster;
  out.image = Tensor(Shape4{1, 1, H, W}, sample.image);
  double shift = 0, scale = 1;
  if (config.normalize) {
    double mean = 0;
    for (double v : sample.image) mean += v;
    mean /= N;
    double var = 0;
    for (double v : sample.image) var += (v - mean) * (v - mean);
    var /= N;
    const double stddev = std::sqrt(var + 1e-12);  // constant image maps to all zeros
    for (long long i = 0; i < N; ++i) out.image[i] = (out.image[i] - mean) / stddev;
    shift = mean;
    scale = stddev;
  }
  if (config.meanValue != 0) {
    for (long long i = 0; i < N; ++i) out.image[i] -= config.meanValue;
    shift += config.meanValue * scale;
  }
  out.shift = shift;
  out.scale = scale;

  out.labels = LabelMap(1, H, W);
  out.oneHot = Tensor(Shape4{1, 3, H, W});
  for (long long i = 0; i < N; ++i) {
    const uint8_t c = sample.labels[i];
    if (c > 2)
      throw std::invalid_argument("preprocess: label value " + std::to_string(int(c)) +
                                  " out of range {0,1,2}");
    out.labels.v[i] = c;
    out.oneHot[1LL * c * N + i] = 1.0;
  }
  return out;
}

WaferSample rotate_sample(const WaferSample& s, int degrees) {
  const int k = ((degrees / 90) % 4 + 4) % 4;
  if (degrees % 90 != 0) throw std::invalid_argument("rotate_sample: right angles only");
  if (k == 0) return s;
  WaferSample out = s;
  Tensor img = rot90(Tensor(Shape4{1, 1, s.height, s.width}, s.image), k);
  LabelMap lab(1, s.height, s.width);
  lab.v = s.labels;
  lab = rot90(lab, k);
  out.height = img.shape().h;
  out.width = img.shape().w;
  out.image = img.vec();
  out.labels = lab.v;
  // geometry pixel lists would need the same transform; drop them instead of
  // silently keeping stale coordinates
  out.defects.clear();
  return out;
}

WaferSample pad_to_square(const WaferSample& s) {
  const int side = std::max(s.height, s.width);
  if (side == s.height && side == s.width) return s;
  WaferSample out = s;
  out.height = out.width = side;
  out.image.assign(1LL * side * side, 0.0);
  out.labels.assign(1LL * side * side, 0);  // padded pixels are background
  for (int h = 0; h < s.height; ++h)
    for (int w = 0; w < s.width; ++w) {
      out.px(h, w) = s.px(h, w);
      out.lab(h, w) = s.lab(h, w);
    }
  out.defects.clear();
  return out;
}

std::vector<WaferSample> augment_rotations(const std::vector<WaferSample>& samples,
                                           const PreprocessConfig& config) {
  config.validate();
  bool needs_square = false;
  for (int r : config.rotations) needs_square |= r == 90 || r == 270;
  std::vector<WaferSample> out;
  out.reserve(samples.size() * (1 + config.rotations.size()));
  for (const auto& s : samples) {
    WaferSample base = s;
    if (needs_square && s.height != s.width) {
      if (!config.padToSquare)
        throw std::invalid_argument(
            "augment_rotations: 90/270 rotation of a non-square " + std::to_string(s.height) +
            "x" + std::to_string(s.width) +
            " grid changes the grid shape; enable padToSquare or restrict rotations to 180");
      base = pad_to_square(s);
    }
    out.push_back(base);
    for (int r : config.rotations) out.push_back(rotate_sample(base, r));
  }
  return out;
}

std::vector<int> shuffle_epoch(int count, uint64_t epochSeed) {
  std::vector<int> idx(count);
  for (int i = 0; i < count; ++i) idx[i] = i;
  Rng rng(epochSeed ^ 0x5bf0'3635'dcd1'd069ULL);
  for (int i = count - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(static_cast<uint64_t>(i) + 1)]);
  return idx;
}

}  // namespace waferseg
