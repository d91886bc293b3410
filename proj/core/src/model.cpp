#include "waferseg/model.hpp"

#include <cmath>

#include "waferseg/checkpoint.hpp"
#include "waferseg/rng.hpp"

namespace waferseg {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::vaughan: return "vaughan";
    default: return "broomstick";
  }
}
std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::he: return "he";
    case InitMode::import4: return "import4";
    default: return "import10";
  }
}
Variant variant_from_string(const std::string& s) {
  if (s == "standard") return Variant::standard;
  if (s == "vaughan") return Variant::vaughan;
  if (s == "broomstick") return Variant::broomstick;
  throw std::invalid_argument("unknown variant '" + s + "' (standard|vaughan|broomstick)");
}
InitMode init_mode_from_string(const std::string& s) {
  if (s == "he") return InitMode::he;
  if (s == "import4") return InitMode::import4;
  if (s == "import10") return InitMode::import10;
  throw std::invalid_argument("unknown init mode '" + s + "' (he|import4|import10)");
}

namespace {

// Encoder filter counts per stack; the last conv of the last stack is the
// 1x1 dimension-reduction layer.
std::vector<std::vector<int>> encoder_channels(Variant v) {
  switch (v) {
    case Variant::standard:
      return {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512},
              {4096, 4096, 64}};
    case Variant::vaughan:
      return {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512},
              {512, 64}};
    default:  // broomstick: no conv6 stack, conv5 ends in the 64-filter 1x1
      return {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 64}};
  }
}

}  // namespace

void ModelConfig::validate() const {
  const int stages = variant == Variant::broomstick ? 4 : 5;
  if (skipCount < 0 || skipCount > stages)
    throw std::invalid_argument("skipCount " + std::to_string(skipCount) + " invalid for " +
                                to_string(variant) + " (0.." + std::to_string(stages) + ")");
  if (numClasses != 3) throw std::invalid_argument("numClasses must be 3");
  if (decoderWidth < 1) throw std::invalid_argument("decoderWidth must be positive");
}

struct ModelBuilder {
  Model& m;
  Rng rng;

  int add_conv_param(const std::string& name, int outC, int inC, int kH, int kW) {
    Tensor w(Shape4{outC, inC, kH, kW});
    const double stddev = std::sqrt(2.0 / (1.0 * inC * kH * kW));
    for (long long i = 0; i < w.size(); ++i) w[i] = stddev * rng.normal();
    m.params_.push_back({name + ".weight", make_var(std::move(w), true), true});
    m.params_.push_back({name + ".bias", make_var(Tensor(Shape4{outC, 1, 1, 1}), true), false});
    return static_cast<int>(m.params_.size()) - 2;
  }

  Model::ConvLayer conv(const std::string& name, int outC, int inC, int k) {
    const int wi = add_conv_param(name, outC, inC, k, k);
    return {wi, wi + 1, k == 3 ? 1 : 0};
  }

  Model::BnLayer bn(const std::string& name, int C) {
    m.params_.push_back({name + ".gamma", make_var(Tensor(Shape4{1, C, 1, 1}, 1.0), true), false});
    m.params_.push_back({name + ".beta", make_var(Tensor(Shape4{1, C, 1, 1}), true), false});
    Model::BnLayer l;
    l.gamma_idx = static_cast<int>(m.params_.size()) - 2;
    l.beta_idx = l.gamma_idx + 1;
    l.state.running_mean = Tensor(Shape4{1, C, 1, 1});
    l.state.running_var = Tensor(Shape4{1, C, 1, 1}, 1.0);
    return l;
  }

  void build() {
    const auto chans = encoder_channels(m.config_.variant);
    const int numStacks = static_cast<int>(chans.size());
    int inC = 1;
    for (int s = 0; s < numStacks; ++s) {
      Model::EncoderStack stack;
      stack.name = "conv" + std::to_string(s + 1);
      const int stackIn = inC;
      for (size_t i = 0; i < chans[s].size(); ++i) {
        const bool last_encoder_conv = s == numStacks - 1 && i == chans[s].size() - 1;
        const std::string nm = stack.name + "_" + std::to_string(i + 1);
        Model::EncoderConv ec;
        ec.conv = conv(nm, chans[s][i], inC, last_encoder_conv ? 1 : 3);
        ec.bn = bn("bn" + std::to_string(s + 1) + "_" + std::to_string(i + 1), chans[s][i]);
        stack.convs.push_back(std::move(ec));
        inC = chans[s][i];
      }
      // residual shortcuts on the threefold stacks conv3/4/5
      if (m.config_.residualShortcuts && s >= 2 && s <= 4) {
        stack.shortcut = true;
        if (stackIn != inC) {
          auto p = conv("shortcut" + std::to_string(s + 1), inC, stackIn, 1);
          stack.shortcut_proj = p;
        }
      }
      m.encoder_.push_back(std::move(stack));
    }

    const int D = numStacks - 1;
    const int transBase = 5 - D;  // broomstick's decoder starts at trans2
    int prevC = chans.back().back();
    for (int i = 0; i < D; ++i) {
      Model::DecoderStage st;
      const int t = transBase + i + 1;
      st.name = "trans" + std::to_string(t);
      st.encoder_idx = numStacks - 2 - i;
      st.has_skip = i < m.config_.skipCount;
      const int skipC = chans[st.encoder_idx].back();
      auto c = conv(st.name, m.config_.decoderWidth, prevC, 3);
      st.conv = c;
      if (i < D - 1) {
        if (st.has_skip) {
          auto p = conv("skip" + std::to_string(t), m.config_.decoderWidth, skipC, 3);
          st.skip_proj = p;
        }
      } else {
        auto cr = conv("cls_resized", m.config_.numClasses, m.config_.decoderWidth, 3);
        st.cls_resized = cr;
        if (st.has_skip) {
          auto cs = conv("cls_skip", m.config_.numClasses, skipC, 3);
          st.cls_skip = cs;
        }
      }
      prevC = m.config_.decoderWidth;
      m.decoder_.push_back(std::move(st));
    }
  }

  // Replace the first `count` encoder conv parameters with records from an
  // external checkpoint. A 3-channel first layer is collapsed to 1 channel by
  // summing the input slices.
  void import_weights(const std::string& path, int count) {
    CheckpointData src = load_checkpoint(path);
    int imported = 0;
    for (auto& stack : m.encoder_) {
      for (auto& ec : stack.convs) {
        if (imported >= count) return;
        const std::string base = m.params_[ec.conv.w_idx].name;
        const std::string layer = base.substr(0, base.size() - 7);  // strip ".weight"
        const ParamRecord* wr = src.find(layer + ".weight");
        const ParamRecord* br = src.find(layer + ".bias");
        if (!wr || !br)
          throw std::runtime_error("weight import: checkpoint '" + path + "' has no record for " +
                                   layer);
        Tensor& dst = m.params_[ec.conv.w_idx].var->value;
        const Shape4 ds = dst.shape(), ss = wr->shape;
        if (ds.n == ss.n && ds.h == ss.h && ds.w == ss.w && ds.c == 1 && ss.c == 3) {
          // collapse RGB input slices
          for (int oc = 0; oc < ds.n; ++oc)
            for (int kh = 0; kh < ds.h; ++kh)
              for (int kw = 0; kw < ds.w; ++kw) {
                double s = 0;
                for (int c = 0; c < 3; ++c)
                  s += wr->data[((1LL * oc * 3 + c) * ss.h + kh) * ss.w + kw];
                dst.at(oc, 0, kh, kw) = s;
              }
        } else if (ds == ss) {
          dst = Tensor(ds, wr->data);
        } else {
          throw std::runtime_error("weight import: shape mismatch at " + layer + ": model " +
                                   ds.str() + " vs import " + ss.str());
        }
        if (static_cast<long long>(br->data.size()) != ds.n)
          throw std::runtime_error("weight import: bias size mismatch at " + layer);
        m.params_[ec.conv.b_idx].var->value = Tensor(Shape4{ds.n, 1, 1, 1}, br->data);
        ++imported;
      }
    }
    if (imported < count)
      throw std::runtime_error("weight import: model has only " + std::to_string(imported) +
                               " encoder convs, need " + std::to_string(count));
  }
};

Model Model::build(const ModelConfig& config, uint64_t seed, const std::string& import_source) {
  config.validate();
  Model m;
  m.config_ = config;
  ModelBuilder b{m, Rng(seed)};
  b.build();
  if (config.initMode != InitMode::he) {
    const int count = config.initMode == InitMode::import4 ? 4 : 10;
    if (import_source.empty())
      throw std::invalid_argument("initMode " + to_string(config.initMode) +
                                  " requires an import source checkpoint");
    b.import_weights(import_source, count);
  }
  return m;
}

Param* Model::find_param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<Model::NamedBnState> Model::bn_states() {
  std::vector<NamedBnState> out;
  for (auto& stack : encoder_)
    for (size_t i = 0; i < stack.convs.size(); ++i) {
      const std::string& gname = params_[stack.convs[i].bn.gamma_idx].name;
      out.push_back({gname.substr(0, gname.size() - 6), &stack.convs[i].bn.state});
    }
  return out;
}

Var Model::conv_at(const ConvLayer& l, const Var& x) {
  return conv2d(x, params_[l.w_idx].var, params_[l.b_idx].var, l.pad);
}

Var Model::forward(const Tensor& image, bool training) {
  const Shape4 s = image.shape();
  if (s.c != 1)
    throw std::invalid_argument("forward: expected single-channel input, got " + s.str());
  const int pools = pool_count();
  if (s.h < (1 << pools) || s.w < (1 << pools))
    throw std::invalid_argument("forward: input " + s.str() + " too small for " +
                                std::to_string(pools) + " pooling steps (needs >= " +
                                std::to_string(1 << pools) + ")");

  Var x = constant(image);
  std::vector<Var> stack_outputs;
  std::vector<std::pair<int, int>> sizes;
  for (size_t si = 0; si < encoder_.size(); ++si) {
    auto& stack = encoder_[si];
    Var entry = x;
    for (auto& ec : stack.convs) {
      x = conv_at(ec.conv, x);
      x = batchnorm(x, params_[ec.bn.gamma_idx].var, params_[ec.bn.beta_idx].var, ec.bn.state,
                    training);
      x = relu(x);
    }
    if (stack.shortcut) {
      Var sc = stack.shortcut_proj ? conv_at(*stack.shortcut_proj, entry) : entry;
      x = add(x, sc);
    }
    stack_outputs.push_back(x);
    sizes.emplace_back(x->value.shape().h, x->value.shape().w);
    if (si + 1 < encoder_.size()) x = maxpool2(x);
  }

  for (size_t di = 0; di < decoder_.size(); ++di) {
    auto& st = decoder_[di];
    const auto [th, tw] = sizes[st.encoder_idx];
    x = bilinear_resize(x, th, tw);
    x = conv_at(st.conv, x);
    if (st.cls_resized) {
      // final full-resolution stage: reduce both branches to class logits
      x = relu(x);
      Var logits = conv_at(*st.cls_resized, x);
      if (st.has_skip)
        logits = add(logits, conv_at(*st.cls_skip, stack_outputs[st.encoder_idx]));
      return softmax_pixelwise(logits);
    }
    if (st.has_skip) x = add(x, conv_at(*st.skip_proj, stack_outputs[st.encoder_idx]));
    x = relu(x);
  }
  throw std::logic_error("forward: decoder has no final stage");
}

std::vector<StageSize> Model::stage_sizes(int h, int w) const {
  std::vector<StageSize> out;
  std::vector<std::pair<int, int>> sizes;
  int ch = h, cw = w;
  for (const auto& stack : encoder_) {
    const int c = params_[stack.convs.back().conv.w_idx].var->value.shape().n;
    out.push_back({stack.name, c, ch, cw});
    sizes.emplace_back(ch, cw);
    ch = (ch + 1) / 2;
    cw = (cw + 1) / 2;
  }
  for (const auto& st : decoder_) {
    const auto [th, tw] = sizes[st.encoder_idx];
    const int c = st.cls_resized ? config_.numClasses : config_.decoderWidth;
    out.push_back({st.name, c, th, tw});
  }
  return out;
}

void Model::zero_grad() {
  for (auto& p : params_) p.var->zero_grad();
}

LabelMap predict_classes(const Tensor& probabilities) {
  const Shape4 s = probabilities.shape();
  if (s.c != 3) throw std::invalid_argument("predict_classes: expected 3 channels, got " + s.str());
  LabelMap out(s.n, s.h, s.w);
  const long long HW = 1LL * s.h * s.w;
  for (int n = 0; n < s.n; ++n)
    for (long long i = 0; i < HW; ++i) {
      int best = 0;
      double bv = probabilities[(1LL * n * 3 + 0) * HW + i];
      for (int c = 1; c < 3; ++c) {
        const double v = probabilities[(1LL * n * 3 + c) * HW + i];
        if (v > bv) {  // ties keep the lowest class index
          bv = v;
          best = c;
        }
      }
      out.v[1LL * n * HW + i] = static_cast<uint8_t>(best);
    }
  return out;
}

}  // namespace waferseg
