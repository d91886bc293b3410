#pragma once

#include <optional>
#include <string>
#include <vector>

#include "waferseg/ops.hpp"

namespace waferseg {

enum class Variant { standard, vaughan, broomstick };
enum class InitMode { he, import4, import10 };

std::string to_string(Variant v);
std::string to_string(InitMode m);
Variant variant_from_string(const std::string& s);
InitMode init_mode_from_string(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::vaughan;
  int skipCount = 5;  // broomstick has four decoder stages, so at most 4 there
  bool residualShortcuts = true;
  InitMode initMode = InitMode::he;
  int numClasses = 3;
  int decoderWidth = 64;

  void validate() const;
};

// One named parameter tensor with its gradient buffer (a leaf Var).
struct Param {
  std::string name;
  Var var;
  bool is_conv_weight = false;  // weight decay applies to these only
};

// Spatial size of one stage, for a given input size.
struct StageSize {
  std::string name;
  int channels, h, w;
};

// One architecture variant instantiated as parameters plus structure. Forward
// builds an autodiff graph over the shared parameter leaves; in inference mode
// the model is immutable and safe for concurrent use, in training mode it is
// single-owner (batchnorm running statistics update in place).
class Model {
 public:
  // weight import for initMode import4/import10: path to a checkpoint whose
  // conv records cover the required encoder layers
  static Model build(const ModelConfig& config, uint64_t seed,
                     const std::string& import_source = "");

  const ModelConfig& config() const { return config_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param* find_param(const std::string& name);

  // Batch-norm running statistics, exposed for persistence.
  struct NamedBnState {
    std::string name;  // layer name, e.g. "bn3_2"
    BatchNormState* state;
  };
  std::vector<NamedBnState> bn_states();

  // Per-pixel class probabilities (N, numClasses, H, W). Input must be
  // (N, 1, H, W) with H, W large enough for the encoder's poolings.
  Var forward(const Tensor& image, bool training);

  // Spatial+channel sizes of every encoder stack and decoder stage for an
  // input of the given size, without running any arithmetic on tensors.
  std::vector<StageSize> stage_sizes(int h, int w) const;

  int pool_count() const { return static_cast<int>(encoder_.size()) - 1; }

  void zero_grad();

 private:
  struct ConvLayer {
    int w_idx, b_idx;  // indices into params_
    int pad;
  };
  struct BnLayer {
    int gamma_idx, beta_idx;
    BatchNormState state;
  };
  struct EncoderConv {
    ConvLayer conv;
    BnLayer bn;
  };
  struct EncoderStack {
    std::string name;
    std::vector<EncoderConv> convs;
    bool shortcut = false;
    std::optional<ConvLayer> shortcut_proj;  // 1x1, present when channels change
  };
  struct DecoderStage {
    std::string name;      // trans1..trans5
    int encoder_idx;       // encoder stack whose size (and skip) this stage targets
    bool has_skip = false;
    ConvLayer conv;                        // 3x3 to decoderWidth
    std::optional<ConvLayer> skip_proj;    // 3x3 to decoderWidth (inner stages)
    // final stage only: 3x3 reductions to numClasses on both branches
    std::optional<ConvLayer> cls_resized;
    std::optional<ConvLayer> cls_skip;
  };

  ModelConfig config_;
  std::vector<Param> params_;
  std::vector<EncoderStack> encoder_;
  std::vector<DecoderStage> decoder_;

  Var conv_at(const ConvLayer& l, const Var& x);
  friend struct ModelBuilder;
  friend Model model_from_checkpoint(const struct CheckpointData& data);
};

LabelMap predict_classes(const Tensor& probabilities);

}  // namespace waferseg
