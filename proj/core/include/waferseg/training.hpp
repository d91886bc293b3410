#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "waferseg/checkpoint.hpp"
#include "waferseg/metrics.hpp"
#include "waferseg/model.hpp"
#include "waferseg/pipeline.hpp"

namespace waferseg {

struct TrainConfig {
  std::array<double, 3> classWeights = {100, 100, 2000};
  double lr0 = 0.0008;
  double lrDecayPerEpoch = 0.97;  // applied per epoch
  double weightDecay = 0.0005;    // conv weights only; not biases, not batchnorm
  int epochs = 200;
  int batchSize = 1;
  double adamBeta1 = 0.9, adamBeta2 = 0.999, adamEpsilon = 1e-8;
  uint64_t seed = 0;
  bool maskBackgroundLoss = false;  // zero the background-class loss weight
  int evalEvery = 1;                // validation cadence in epochs
  int checkpointEvery = 0;          // 0: final checkpoint only
  std::string checkpointDir;        // empty: no checkpoints written

  void validate() const;
};

// Adam first/second moments in trainable-parameter order.
// Same layout the checkpoint module persists, so resume needs no conversion.
using AdamState = OptimizerBlob;

void adam_init(AdamState& state, const Model& model);

// One bias-corrected Adam update from the gradients currently in the model's
// parameter buffers, at state.lr. Weight decay enters as an additive
// lambda*theta gradient term on convolution weights.
void adam_step(Model& model, AdamState& state, const TrainConfig& config);

struct HistoryRecord {
  int epoch = 0;  // 1-based, after this many completed epochs
  double lr = 0;
  double trainLoss = 0;
  double trainPixelAccuracy = 0;  // pooled over the epoch's training passes
  double valLoss = 0;
  MetricsReport val;
};

// Returns false to stop training early (the epoch budget is the normal exit).
using EpochCallback = std::function<bool(const HistoryRecord&, Model&)>;

struct TrainResult {
  std::vector<HistoryRecord> history;
  AdamState optimizer;
  int epochsRun = 0;
};

// Batch-size-1 (by default) training loop: per epoch shuffle, forward in
// training mode, weighted cross entropy, backward, Adam step; validation
// metrics pooled over the validation set at the configured cadence. Fully
// deterministic given config.seed. Aborts with a diagnostic if the loss turns
// non-finite.
TrainResult train(Model& model, const std::vector<Preprocessed>& trainSet,
                  const std::vector<Preprocessed>& valSet, const TrainConfig& config,
                  const EpochCallback& callback = {}, const AdamState* resumeState = nullptr,
                  int startEpoch = 0);

// Pooled validation loss + metrics for a dataset (inference mode).
std::pair<double, MetricsReport> evaluate(Model& model, const std::vector<Preprocessed>& set,
                                          const TrainConfig& config);

std::string history_header();
std::string history_line(const HistoryRecord& r);

}  // namespace waferseg
