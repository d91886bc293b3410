#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace waferseg {

enum class BrightnessField { uniform, radialGradient, linearGradient, blotchy };
enum class ClusterShape { blob, elongated, ring };

std::string to_string(BrightnessField f);
std::string to_string(ClusterShape s);
BrightnessField brightness_field_from_string(const std::string& s);
ClusterShape cluster_shape_from_string(const std::string& s);

// Knobs for one synthetic photoluminescence wafer. Defaults are desk-scale
// and illustrative; defect density and size distributions are not calibrated
// to any real production line.
struct WaferGenConfig {
  int height = 112, width = 112;  // chip grid
  double discMarginFrac = 0.04;
  BrightnessField brightnessField = BrightnessField::radialGradient;
  double brightnessAmplitude = 0.3;
  int markerCount = 12;
  double singleDefectRate = 0.004;  // per in-disc chip
  int linearDefectCount = 2;
  int voidCount = 2;
  int clusterCount = 0;
  ClusterShape clusterShape = ClusterShape::blob;
  double voidLabelInflation = 1.6;  // label ellipse axes / visible ellipse axes
  bool ultrasonicEmbedding = false; // darken the full void label region
  double noiseSigma = 0.02;
  double minDefectContrast = 0.12;  // floor on defect-vs-local brightness gap
  uint64_t seed = 0;

  void validate() const;
};

struct DefectGeometry {
  enum class Kind { single, linear, voidDefect, cluster };
  Kind kind;
  std::vector<int> labelPixels;    // flat h*width+w indices labeled class 2
  std::vector<int> visiblePixels;  // subset darkened on the image (before embedding)
};

// One wafer: brightness grid in [0,1], per-chip labels
// {0: background/marker, 1: in-spec, 2: defect}, plus ground-truth geometry.
struct WaferSample {
  int height = 0, width = 0;
  std::vector<double> image;
  std::vector<uint8_t> labels;
  WaferGenConfig meta;
  std::vector<DefectGeometry> defects;
  bool isCluster = false;

  double& px(int h, int w) { return image[1LL * h * width + w]; }
  double px(int h, int w) const { return image[1LL * h * width + w]; }
  uint8_t& lab(int h, int w) { return labels[1LL * h * width + w]; }
  uint8_t lab(int h, int w) const { return labels[1LL * h * width + w]; }
};

// Deterministic in config.seed. Throws if the requested defects cannot be
// placed without overlap after bounded retries.
WaferSample generate_wafer(const WaferGenConfig& config);

struct ManifestEntry {
  std::string file;  // assigned by the dataset writer; empty for in-memory sets
  uint64_t seed = 0;
  bool isCluster = false;
  std::string split;  // "train" | "val"
};

struct Dataset {
  std::vector<WaferSample> samples;
  std::vector<ManifestEntry> entries;  // same order as samples
};

// `count` wafers from per-sample seeds derived from masterSeed; the first
// round(clusterFraction*count) carry defect clusters. The train/val split is
// stratified so both portions hold cluster wafers in proportion
// clusterFraction (largest-remainder rounding).
Dataset generate_dataset(const WaferGenConfig& config_template, int count, double clusterFraction,
                         int trainCount, uint64_t masterSeed);

}  // namespace waferseg
