#include "waferseg/dataset_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "waferseg/binio.hpp"

namespace waferseg {

namespace {
constexpr char kMagic[4] = {'W', 'F', 'R', '1'};
constexpr uint16_t kVersion = 1;
}  // namespace

std::string wafer_metadata_text(const WaferSample& s) {
  const WaferGenConfig& c = s.meta;
  std::ostringstream os;
  os.precision(17);  // doubles must survive the round trip
  os << "seed=" << c.seed << "\n"
     << "height=" << c.height << "\n"
     << "width=" << c.width << "\n"
     << "discMarginFrac=" << c.discMarginFrac << "\n"
     << "brightnessField=" << to_string(c.brightnessField) << "\n"
     << "brightnessAmplitude=" << c.brightnessAmplitude << "\n"
     << "markerCount=" << c.markerCount << "\n"
     << "singleDefectRate=" << c.singleDefectRate << "\n"
     << "linearDefectCount=" << c.linearDefectCount << "\n"
     << "voidCount=" << c.voidCount << "\n"
     << "clusterCount=" << c.clusterCount << "\n"
     << "clusterShape=" << to_string(c.clusterShape) << "\n"
     << "voidLabelInflation=" << c.voidLabelInflation << "\n"
     << "ultrasonicEmbedding=" << (c.ultrasonicEmbedding ? 1 : 0) << "\n"
     << "noiseSigma=" << c.noiseSigma << "\n"
     << "minDefectContrast=" << c.minDefectContrast << "\n"
     << "isCluster=" << (s.isCluster ? 1 : 0) << "\n";
  return os.str();
}

void save_wafer(const std::string& path, const WaferSample& s) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  binio::put_u16(os, kVersion);
  binio::put_u32(os, static_cast<uint32_t>(s.height));
  binio::put_u32(os, static_cast<uint32_t>(s.width));
  for (double v : s.image) binio::put_f32(os, static_cast<float>(v));
  os.write(reinterpret_cast<const char*>(s.labels.data()),
           static_cast<std::streamsize>(s.labels.size()));
  binio::put_str(os, wafer_metadata_text(s));
  binio::atomic_write(path, os.str());
}

WaferSample load_wafer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open wafer file '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("'" + path + "' is not a wafer file (bad magic)");
  if (binio::get_u16(is) != kVersion)
    throw std::runtime_error("wafer file '" + path + "': unsupported version");
  WaferSample s;
  s.height = static_cast<int>(binio::get_u32(is));
  s.width = static_cast<int>(binio::get_u32(is));
  const long long n = 1LL * s.height * s.width;
  s.image.resize(n);
  for (auto& v : s.image) v = binio::get_f32(is);
  s.labels.resize(n);
  is.read(reinterpret_cast<char*>(s.labels.data()), n);
  const std::string meta = binio::get_str(is);
  if (!is) throw std::runtime_error("wafer file '" + path + "': truncated");

  WaferGenConfig& c = s.meta;
  std::istringstream ms(meta);
  std::string line;
  while (std::getline(ms, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "seed") c.seed = std::stoull(v);
    else if (k == "height") c.height = std::stoi(v);
    else if (k == "width") c.width = std::stoi(v);
    else if (k == "discMarginFrac") c.discMarginFrac = std::stod(v);
    else if (k == "brightnessField") c.brightnessField = brightness_field_from_string(v);
    else if (k == "brightnessAmplitude") c.brightnessAmplitude = std::stod(v);
    else if (k == "markerCount") c.markerCount = std::stoi(v);
    else if (k == "singleDefectRate") c.singleDefectRate = std::stod(v);
    else if (k == "linearDefectCount") c.linearDefectCount = std::stoi(v);
    else if (k == "voidCount") c.voidCount = std::stoi(v);
    else if (k == "clusterCount") c.clusterCount = std::stoi(v);
    else if (k == "clusterShape") c.clusterShape = cluster_shape_from_string(v);
    else if (k == "voidLabelInflation") c.voidLabelInflation = std::stod(v);
    else if (k == "ultrasonicEmbedding") c.ultrasonicEmbedding = v == "1";
    else if (k == "noiseSigma") c.noiseSigma = std::stod(v);
    else if (k == "minDefectContrast") c.minDefectContrast = std::stod(v);
    else if (k == "isCluster") s.isCluster = v == "1";
  }
  return s;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# file\tseed\tsplit\tis_cluster\n";
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    std::ostringstream nm;
    nm << "wafer_" << i << ".wfr";
    save_wafer(dir + "/" + nm.str(), ds.samples[i]);
    const ManifestEntry& e = ds.entries[i];
    manifest << nm.str() << '\t' << e.seed << '\t' << e.split << '\t' << (e.isCluster ? 1 : 0)
             << "\n";
  }
  binio::atomic_write(dir + "/manifest.txt", manifest.str());
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.txt");
  if (!mf) throw std::runtime_error("no manifest.txt in '" + dir + "'");
  Dataset ds;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    int cluster = 0;
    ls >> e.file >> e.seed >> e.split >> cluster;
    e.isCluster = cluster != 0;
    ds.samples.push_back(load_wafer(dir + "/" + e.file));
    ds.entries.push_back(e);
  }
  return ds;
}

std::vector<WaferSample> split_of(const Dataset& ds, const std::string& split) {
  std::vector<WaferSample> out;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.entries[i].split == split) out.push_back(ds.samples[i]);
  return out;
}

}  // namespace waferseg
