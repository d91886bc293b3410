#pragma once

#include <vector>

#include "waferseg/tensor.hpp"
#include "waferseg/wafergen.hpp"

namespace waferseg {

struct PreprocessConfig {
  double meanValue = 0.0;  // subtracted after normalization (0 for synthetic data)
  bool normalize = true;   // per-sample zero mean / unit variance
  std::vector<int> rotations = {90, 180, 270};
  // For non-square grids, 90/270 rotations require padding to square first
  // (padded pixels get class 0). Off by default; without it, requesting 90/270
  // on a non-square grid is an error.
  bool padToSquare = false;

  void validate() const;
};

// Network-ready sample: (1,1,H,W) image tensor and (1,3,H,W) one-hot labels,
// with the bookkeeping needed to undo the value transform for visualization.
struct Preprocessed {
  Tensor image;
  Tensor oneHot;
  LabelMap labels;
  double shift = 0, scale = 1;  // raw = preprocessed * scale + shift
  bool isCluster = false;
};

Preprocessed preprocess(const WaferSample& sample, const PreprocessConfig& config);

// Each input followed by its configured right-angle rotations (image and label
// rotated together). Output size = n * (1 + |rotations|).
std::vector<WaferSample> augment_rotations(const std::vector<WaferSample>& samples,
                                           const PreprocessConfig& config);

// Deterministic Fisher-Yates permutation of sample indices.
std::vector<int> shuffle_epoch(int count, uint64_t epochSeed);

// 90-degree CCW steps applied to a raw sample (image and labels together).
WaferSample rotate_sample(const WaferSample& s, int degrees);

WaferSample pad_to_square(const WaferSample& s);

}  // namespace waferseg
