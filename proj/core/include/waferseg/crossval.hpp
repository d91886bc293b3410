#pragma once

#include "waferseg/training.hpp"
#include "waferseg/wafergen.hpp"

namespace waferseg {

struct FoldResult {
  int fold = 0;
  std::vector<int> validationIndices;  // into the dataset
  ConfusionMatrix cm;                  // pooled over the fold's validation wafers
  MetricsReport val;
};

struct CrossValResult {
  std::vector<FoldResult> folds;
  // mean/stddev over folds of PA, MPA, mIoU, DCA (population stddev)
  MetricsReport mean, stddev;
};

// Disjoint, covering validation folds (stratified by the cluster flag when
// enabled); a fresh model is trained per fold on the complement.
CrossValResult cross_validate(const std::vector<WaferSample>& dataset, int folds,
                              bool stratifyClusters, uint64_t masterSeed,
                              const ModelConfig& modelConfig, const TrainConfig& trainConfig,
                              const PreprocessConfig& preprocessConfig);

// The partition alone, exposed for tests: fold -> validation indices.
std::vector<std::vector<int>> partition_folds(const std::vector<bool>& isCluster, int folds,
                                              bool stratifyClusters, uint64_t masterSeed);

}  // namespace waferseg
