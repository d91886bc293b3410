#include "waferseg/training.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "waferseg/rng.hpp"

namespace waferseg {

void TrainConfig::validate() const {
  for (double w : classWeights)
    if (w <= 0) throw std::invalid_argument("classWeights must be positive");
  if (lr0 <= 0) throw std::invalid_argument("lr0 must be positive");
  if (lrDecayPerEpoch <= 0 || lrDecayPerEpoch > 1)
    throw std::invalid_argument("lrDecayPerEpoch must be in (0, 1]");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batchSize < 1) throw std::invalid_argument("batchSize must be >= 1");
  if (weightDecay < 0) throw std::invalid_argument("weightDecay must be >= 0");
}

void adam_init(AdamState& state, const Model& model) {
  state.m.clear();
  state.v.clear();
  for (const auto& p : model.params()) {
    state.m.emplace_back(p.var->value.shape());
    state.v.emplace_back(p.var->value.shape());
  }
  state.step = 0;
  state.lr = 0;
}

void adam_step(Model& model, AdamState& state, const TrainConfig& config) {
  auto& params = model.params();
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match model parameters");
  ++state.step;
  const double b1 = config.adamBeta1, b2 = config.adamBeta2;
  const double bc1 = 1.0 - std::pow(b1, double(state.step));
  const double bc2 = 1.0 - std::pow(b2, double(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = params[i].var->value;
    Tensor& grad = params[i].var->ensure_grad();
    const bool decay = params[i].is_conv_weight && config.weightDecay > 0;
    for (long long j = 0; j < theta.size(); ++j) {
      const double g = grad[j] + (decay ? config.weightDecay * theta[j] : 0.0);
      state.m[i][j] = b1 * state.m[i][j] + (1 - b1) * g;
      state.v[i][j] = b2 * state.v[i][j] + (1 - b2) * g * g;
      theta[j] -= state.lr * (state.m[i][j] / bc1) /
                  (std::sqrt(state.v[i][j] / bc2) + config.adamEpsilon);
    }
  }
}

namespace {
std::array<double, 3> effective_weights(const TrainConfig& c) {
  auto w = c.classWeights;
  if (c.maskBackgroundLoss) w[0] = 0;
  return w;
}
}  // namespace

std::pair<double, MetricsReport> evaluate(Model& model, const std::vector<Preprocessed>& set,
                                          const TrainConfig& config) {
  NoGradGuard ng;
  const auto weights = effective_weights(config);
  double loss = 0;
  ConfusionMatrix cm;
  for (const auto& s : set) {
    Var probs = model.forward(s.image, /*training=*/false);
    loss += weighted_cross_entropy(probs, s.oneHot, weights)->value[0];
    cm += confusion(predict_classes(probs->value), s.labels);
  }
  return {set.empty() ? 0.0 : loss / set.size(), metrics(cm)};
}

TrainResult train(Model& model, const std::vector<Preprocessed>& trainSet,
                  const std::vector<Preprocessed>& valSet, const TrainConfig& config,
                  const EpochCallback& callback, const AdamState* resumeState, int startEpoch) {
  config.validate();
  const auto weights = effective_weights(config);

  TrainResult result;
  AdamState& opt = result.optimizer;
  if (resumeState) {
    opt = *resumeState;
    if (opt.m.size() != model.params().size())
      throw std::invalid_argument("train: resumed optimizer state does not match model");
  } else {
    adam_init(opt, model);
  }

  const bool want_ckpt = !config.checkpointDir.empty();
  if (want_ckpt) std::filesystem::create_directories(config.checkpointDir);
  auto write_ckpt = [&](const std::string& name, int epoch) {
    save_checkpoint(config.checkpointDir + "/" + name, model, &opt,
                    static_cast<uint32_t>(epoch));
  };

  for (int epoch = startEpoch; epoch < config.epochs; ++epoch) {
    opt.lr = config.lr0 * std::pow(config.lrDecayPerEpoch, double(epoch));
    const auto order =
        shuffle_epoch(static_cast<int>(trainSet.size()), Rng(config.seed).derive(epoch + 1));

    double epochLoss = 0;
    ConfusionMatrix trainCm;
    int inBatch = 0;
    model.zero_grad();
    for (size_t oi = 0; oi < order.size(); ++oi) {
      const Preprocessed& s = trainSet[order[oi]];
      Var probs = model.forward(s.image, /*training=*/true);
      Var loss = weighted_cross_entropy(probs, s.oneHot, weights);
      const double lv = loss->value[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                 ", sample " + std::to_string(oi + 1) + " (lr=" +
                                 std::to_string(opt.lr) + ")");
      epochLoss += lv;
      trainCm += confusion(predict_classes(probs->value), s.labels);
      backward(loss);
      if (++inBatch == config.batchSize || oi + 1 == order.size()) {
        if (inBatch > 1)
          for (auto& p : model.params()) {
            Tensor& g = p.var->ensure_grad();
            for (long long j = 0; j < g.size(); ++j) g[j] /= inBatch;
          }
        adam_step(model, opt, config);
        model.zero_grad();
        inBatch = 0;
      }
    }

    const int e1 = epoch + 1;
    const bool evalNow = config.evalEvery > 0 && (e1 % config.evalEvery == 0 || e1 == config.epochs);
    HistoryRecord rec;
    rec.epoch = e1;
    rec.lr = opt.lr;
    rec.trainLoss = trainSet.empty() ? 0 : epochLoss / trainSet.size();
    rec.trainPixelAccuracy = trainSet.empty() ? 0 : metrics(trainCm).pixelAccuracy;
    if (evalNow && !valSet.empty()) {
      auto [vl, vm] = evaluate(model, valSet, config);
      rec.valLoss = vl;
      rec.val = vm;
    }
    if (evalNow) result.history.push_back(rec);
    result.epochsRun = e1;

    if (want_ckpt && config.checkpointEvery > 0 && e1 % config.checkpointEvery == 0 &&
        e1 != config.epochs) {
      std::ostringstream nm;
      nm << "epoch_" << e1 << ".ckpt";
      write_ckpt(nm.str(), e1);
    }
    if (callback && !callback(rec, model)) {
      result.epochsRun = e1;
      break;
    }
  }
  if (want_ckpt) write_ckpt("final.ckpt", result.epochsRun);
  return result;
}

std::string history_header() {
  return "epoch\tlr\ttrain_loss\ttrain_pa\tval_loss\tval_pa\tval_mpa\tval_miou\tval_dca";
}

std::string history_line(const HistoryRecord& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.epoch << '\t' << r.lr << '\t' << r.trainLoss << '\t' << r.trainPixelAccuracy << '\t'
     << r.valLoss << '\t' << r.val.pixelAccuracy << '\t' << r.val.meanPixelAccuracy << '\t'
     << r.val.meanIoU << '\t' << r.val.defectClassAccuracy;
  return os.str();
}

}  // namespace waferseg
