#pragma once

#include <string>
#include <vector>

#include "waferseg/model.hpp"

namespace waferseg {

struct ParamRecord {
  std::string name;
  Shape4 shape;
  std::vector<double> data;  // stored on disk as little-endian f32
};

// Adam moments in parameter order (trainable params only), plus schedule
// position, as persisted alongside the parameters.
struct OptimizerBlob {
  uint64_t step = 0;
  double lr = 0;
  std::vector<Tensor> m, v;
};

struct CheckpointData {
  ModelConfig config;
  std::vector<ParamRecord> params;  // model params + batchnorm running stats
  bool has_optimizer = false;
  OptimizerBlob optimizer;
  uint32_t epoch = 0;

  const ParamRecord* find(const std::string& name) const;
};

// Parameter storage on disk is 32-bit float. Saving first rounds the live
// model (and optimizer moments) to f32 in place, so a resumed run and an
// uninterrupted run that both pass through the same save are bit-identical.
void save_checkpoint(const std::string& path, Model& model, const OptimizerBlob* opt,
                     uint32_t epoch);

CheckpointData load_checkpoint(const std::string& path);

// Rebuild a model from checkpoint contents. Parameter names and shapes must
// match the model built from the stored config; mismatches name the offender.
Model model_from_checkpoint(const CheckpointData& data);

// Round every element through IEEE single precision.
void quantize_f32(Tensor& t);

}  // namespace waferseg
