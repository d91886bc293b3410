#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "waferseg/model.hpp"
#include "waferseg/tensor.hpp"

namespace waferseg {

// counts[j][i] = pixels of true class j predicted as class i.
struct ConfusionMatrix {
  std::array<std::array<uint64_t, 3>, 3> counts{};

  uint64_t total() const;
  uint64_t true_count(int cls) const;  // t_i: row sum
  uint64_t predicted_count(int cls) const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
};

struct MetricsReport {
  double pixelAccuracy = 0;
  double meanPixelAccuracy = 0;
  double meanIoU = 0;
  double defectClassAccuracy = 0;  // per-class accuracy of class 2
  std::array<double, 3> classAccuracy{};  // NaN for absent classes
  std::array<double, 3> classIoU{};
};

ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& truth);

// PA = sum_i p_ii / sum_i t_i; MPA = mean_i p_ii/t_i; mIoU = mean_i
// p_ii/(t_i + sum_j p_ji - p_ii), n_c = 3. Classes with t_i = 0 are excluded
// from the means (synthetic wafers may lack defect pixels entirely). Throws on
// an all-zero matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

enum class EnsembleCombine { mean, vote };

// Test-time rotation ensemble: rotate the input by each angle, run an
// inference-mode forward, rotate the probability map back, combine (mean of
// probabilities by default, majority vote optional), argmax.
LabelMap ensemble_predict(Model& model, const Tensor& image, const std::vector<int>& angles,
                          EnsembleCombine combine = EnsembleCombine::mean);

// The averaged probability map behind ensemble_predict, exposed for tests and
// visualization.
Tensor ensemble_probabilities(Model& model, const Tensor& image, const std::vector<int>& angles);

}  // namespace waferseg
