// Acceptance harness: one numbered criterion per invocation, one PASS/FAIL
// line on stdout, exit status 0 on pass. Tolerances are pinned here, not
// configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "waferseg/crossval.hpp"
#include "waferseg/dataset_io.hpp"
#include "waferseg/metrics.hpp"
#include "waferseg/model.hpp"
#include "waferseg/ops.hpp"
#include "waferseg/rng.hpp"
#include "waferseg/training.hpp"

using namespace waferseg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Tensor random_tensor(Shape4 s, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(s);
  for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------- criterion 1

// Scalar head summing coef * g so every output element participates.
Var weighted_sum(const Var& g, const Tensor& coef) {
  Tensor one({1, 1, 1, 1});
  for (long long i = 0; i < g->value.size(); ++i) one[0] += coef[i] * g->value[i];
  Var s = make_var(one, true);
  s->parents = {g};
  s->backprop = [coef](Node& self) {
    Tensor& pg = self.parents[0]->ensure_grad();
    for (long long i = 0; i < pg.size(); ++i) pg[i] += self.grad[0] * coef[i];
  };
  return s;
}

double fd_probe(const Var& leaf, long long i, const std::function<double()>& scalar, double h) {
  const double keep = leaf->value[i];
  leaf->value[i] = keep + h;
  const double up = scalar();
  leaf->value[i] = keep - h;
  const double down = scalar();
  leaf->value[i] = keep;
  return (up - down) / (2 * h);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

Outcome criterion_gradients() {
  Rng rng(20240801);
  double worstOp = 0;
  std::string worstName = "-";

  auto check_op = [&](const char* name, const Var& leaf, const std::function<Var()>& graph) {
    Tensor coef = random_tensor(graph()->value.shape(), rng);
    auto scalar = [&] { return weighted_sum(graph(), coef)->value[0]; };
    leaf->zero_grad();
    backward(weighted_sum(graph(), coef));
    double worst = 0;
    for (long long i = 0; i < leaf->value.size(); ++i) {
      const double numeric = fd_probe(leaf, i, scalar, 1e-5);
      worst = std::max(worst, rel_err(numeric, leaf->grad[i]));
    }
    if (worst > worstOp) {
      worstOp = worst;
      worstName = name;
    }
  };

  {
    Var x = make_var(random_tensor({1, 2, 5, 4}, rng), true);
    Var w = make_var(random_tensor({3, 2, 3, 3}, rng), true);
    Var b = make_var(random_tensor({3, 1, 1, 1}, rng), true);
    check_op("conv2d/x", x, [&] { return conv2d(x, w, b, 1); });
    check_op("conv2d/w", w, [&] { return conv2d(x, w, b, 1); });
    check_op("conv2d/b", b, [&] { return conv2d(x, w, b, 1); });
  }
  {
    Var x = make_var(random_tensor({2, 3, 4, 4}, rng), true);
    Var g = make_var(random_tensor({1, 3, 1, 1}, rng, 0.5, 1.5), true);
    Var be = make_var(random_tensor({1, 3, 1, 1}, rng), true);
    auto graph = [&] {
      BatchNormState st;
      return batchnorm(x, g, be, st, true);
    };
    check_op("batchnorm/x", x, graph);
    check_op("batchnorm/gamma", g, graph);
    check_op("batchnorm/beta", be, graph);
  }
  {
    Tensor t = random_tensor({1, 2, 5, 5}, rng, 0.2, 1.0);
    for (long long i = 0; i < t.size(); ++i) t[i] += 1e-3 * double(i);  // break pooling ties
    Var x = make_var(t, true);
    check_op("relu", x, [&] { return relu(x); });
    check_op("maxpool2", x, [&] { return maxpool2(x); });
    check_op("bilinear_resize", x, [&] { return bilinear_resize(x, 8, 7); });
    check_op("softmax", x, [&] { return softmax_pixelwise(x); });
  }
  {
    Var x = make_var(random_tensor({1, 3, 3, 3}, rng), true);
    Tensor oh({1, 3, 3, 3});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) oh.at(0, rng.uniform_int(3), i, j) = 1;
    auto graph = [&] { return weighted_cross_entropy(softmax_pixelwise(x), oh, {100, 100, 2000}); };
    auto scalar = [&] { return graph()->value[0]; };
    x->zero_grad();
    backward(graph());
    double worst = 0;
    for (long long i = 0; i < x->value.size(); ++i)
      worst = std::max(worst, rel_err(fd_probe(x, i, scalar, 1e-5), x->grad[i]));
    if (worst > worstOp) {
      worstOp = worst;
      worstName = "softmax+wce";
    }
  }
  if (worstOp >= 1e-4)
    return {false, "per-op max rel err " + std::to_string(worstOp) + " at " + worstName +
                       " (limit 1e-4)"};

  // End to end: tiny model, weighted loss, >= 20 sampled parameters.
  ModelConfig mc;
  mc.variant = Variant::broomstick;
  mc.skipCount = 2;
  Model model = Model::build(mc, 3);
  WaferGenConfig g;
  g.height = g.width = 32;
  g.voidCount = 1;
  g.markerCount = 4;
  g.seed = 5;
  Preprocessed sample = preprocess(generate_wafer(g), PreprocessConfig{});
  // Freeze batchnorm statistics: repeat the training pass until the running
  // moments converge to the batch moments (0.9^80 residual), then probe in
  // inference mode. Freezing after a single pass would leave the moments at
  // a tenth of the batch values, inflating every activation by ~sqrt(10) per
  // batchnorm layer and saturating the loss surface beyond what central
  // differences can resolve.
  {
    NoGradGuard ng;
    for (int i = 0; i < 80; ++i) (void)model.forward(sample.image, true);
  }
  auto lossval = [&] {
    NoGradGuard ng;
    return weighted_cross_entropy(model.forward(sample.image, false), sample.oneHot,
                                  {100, 100, 2000})
        ->value[0];
  };
  model.zero_grad();
  backward(weighted_cross_entropy(model.forward(sample.image, false), sample.oneHot,
                                  {100, 100, 2000}));
  double worstE2e = 0;
  int probed = 0;
  Rng pick(99);
  for (auto& p : model.params()) {
    if (p.var->grad.size() != p.var->value.size()) continue;
    const long long i = pick.uniform_int(int(p.var->value.size()));
    // Small step: early-layer perturbations are amplified through the whole
    // net, and a large h crosses relu kinks and maxpool argmax switches.
    const double numeric = fd_probe(p.var, i, lossval, 1e-6);
    worstE2e = std::max(worstE2e, rel_err(numeric, p.var->grad[i]));
    ++probed;
  }
  if (probed < 20)
    return {false, "end-to-end probe covered only " + std::to_string(probed) + " parameters"};
  if (worstE2e >= 1e-3)
    return {false, "end-to-end max rel err " + std::to_string(worstE2e) + " (limit 1e-3)"};
  return {true, "per-op max rel err " + std::to_string(worstOp) + ", end-to-end " +
                    std::to_string(worstE2e) + " over " + std::to_string(probed) + " params"};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_shapes() {
  const std::map<std::string, std::pair<int, int>> expect = {
      {"conv1", {442, 440}}, {"conv2", {221, 220}}, {"conv3", {111, 110}},
      {"conv4", {56, 55}},   {"conv5", {28, 28}},   {"conv6", {14, 14}},
  };
  for (Variant v : {Variant::standard, Variant::vaughan, Variant::broomstick}) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.skipCount = v == Variant::broomstick ? 4 : 5;
    Model m = Model::build(cfg, 1);
    std::map<std::string, std::pair<int, int>> got;
    for (const auto& s : m.stage_sizes(442, 440)) got[s.name] = {s.h, s.w};
    for (const auto& [name, hw] : expect) {
      if (v == Variant::broomstick && name == "conv6") continue;
      if (!got.count(name))
        return {false, to_string(v) + " is missing stage " + name};
      if (got.at(name) != hw)
        return {false, to_string(v) + " " + name + " is " + std::to_string(got.at(name).first) +
                           "x" + std::to_string(got.at(name).second) + ", expected " +
                           std::to_string(hw.first) + "x" + std::to_string(hw.second)};
    }
    const auto& last = m.stage_sizes(442, 440).back();
    if (last.h != 442 || last.w != 440 || last.channels != 3)
      return {false, to_string(v) + " decoder does not return to 442x440x3"};
  }
  return {true, "all three variants reproduce the 442x440 stage table"};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_metrics_oracle() {
  {  // worked example
    ConfusionMatrix cm;
    cm.counts = {{{2, 0, 0}, {0, 3, 1}, {0, 1, 1}}};
    MetricsReport r = metrics(cm);
    const double miou = (1.0 + 0.6 + 1.0 / 3.0) / 3.0;
    if (r.pixelAccuracy != 0.75 || r.meanPixelAccuracy != 0.75 ||
        std::abs(r.meanIoU - miou) > 1e-15 || r.defectClassAccuracy != 0.5)
      return {false, "worked example mismatch"};
  }
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = 2 + rng.uniform_int(6), w = 2 + rng.uniform_int(6);
    LabelMap t(1, h, w), p(1, h, w);
    for (auto& v : t.v) v = uint8_t(rng.uniform_int(trial % 3 + 1));
    for (auto& v : p.v) v = uint8_t(rng.uniform_int(3));
    MetricsReport r = metrics(confusion(p, t));

    // independent set counting
    const size_t n = t.v.size();
    double correct = 0, accSum = 0, iouSum = 0, dca = std::nan("");
    int present = 0;
    for (int c = 0; c < 3; ++c) {
      size_t tp = 0, truthC = 0, predC = 0;
      for (size_t i = 0; i < n; ++i) {
        tp += t.v[i] == c && p.v[i] == c;
        truthC += t.v[i] == c;
        predC += p.v[i] == c;
      }
      correct += double(tp);
      if (truthC == 0) continue;
      accSum += double(tp) / double(truthC);
      iouSum += double(tp) / double(truthC + predC - tp);
      if (c == 2) dca = double(tp) / double(truthC);
      ++present;
    }
    const double pa = correct / double(n), mpa = accSum / present, miou = iouSum / present;
    const bool dcaOk = std::isnan(dca) ? std::isnan(r.defectClassAccuracy)
                                       : std::abs(r.defectClassAccuracy - dca) < 1e-12;
    if (std::abs(r.pixelAccuracy - pa) >= 1e-12 || std::abs(r.meanPixelAccuracy - mpa) >= 1e-12 ||
        std::abs(r.meanIoU - miou) >= 1e-12 || !dcaOk)
      return {false, "oracle mismatch at trial " + std::to_string(trial)};
  }
  return {true, "1000 trials within 1e-12 of the set-counting oracle; worked example exact"};
}

// -------------------------------------------------------- training utilities

std::vector<Preprocessed> preprocess_all(const std::vector<WaferSample>& in,
                                         const PreprocessConfig& pc) {
  std::vector<Preprocessed> out;
  out.reserve(in.size());
  for (const auto& s : in) out.push_back(preprocess(s, pc));
  return out;
}

WaferGenConfig trend_generator(int hw) {
  WaferGenConfig g;
  g.height = g.width = hw;
  g.voidCount = 2;
  g.linearDefectCount = 1;
  g.markerCount = 6;
  g.singleDefectRate = 0.002;
  return g;
}

struct TrendRun {
  double dca = 0, pa = 0;
};

// One training run on a cached dataset; returns final validation DCA/PA.
TrendRun trend_run(const std::vector<Preprocessed>& train_set,
                   const std::vector<Preprocessed>& val_set, const ModelConfig& mc,
                   const std::array<double, 3>& weights, uint64_t seed, int epochs) {
  TrainConfig tc;
  tc.classWeights = weights;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.evalEvery = epochs;  // only the last validation pass matters
  Model model = Model::build(mc, seed);
  std::vector<Preprocessed> tr = train_set;  // train mutates nothing, copies are cheap enough
  TrainResult r = train(model, tr, val_set, tc);
  const auto& last = r.history.back();
  TrendRun out;
  out.pa = last.val.pixelAccuracy;
  // A run that never predicts class 2 yields NaN DCA only if the val set has
  // no defect pixels; the generator always places defects, so NaN means a
  // broken dataset rather than a bad model.
  out.dca = last.val.defectClassAccuracy;
  return out;
}

constexpr int kTrendSize = 48;
constexpr int kTrendTrain = 24;
constexpr int kTrendVal = 8;
constexpr int kTrendEpochs = 12;

std::pair<std::vector<Preprocessed>, std::vector<Preprocessed>> trend_dataset(uint64_t seed,
                                                                              bool embedding) {
  WaferGenConfig g = trend_generator(kTrendSize);
  g.ultrasonicEmbedding = embedding;
  Dataset ds = generate_dataset(g, kTrendTrain + kTrendVal, 0.25, kTrendTrain, seed);
  PreprocessConfig pc;
  pc.rotations = {};  // augmentation quadruples runtime; trends hold without it
  return {preprocess_all(split_of(ds, "train"), pc), preprocess_all(split_of(ds, "val"), pc)};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion_overfit() {
  WaferGenConfig g;
  g.height = g.width = 112;
  g.clusterCount = 1;
  std::vector<WaferSample> wafers;
  for (uint64_t i = 0; i < 4; ++i) {
    g.seed = 4000 + i;
    g.clusterShape = i % 2 ? ClusterShape::elongated : ClusterShape::blob;
    wafers.push_back(generate_wafer(g));
  }
  PreprocessConfig pc;
  auto set = preprocess_all(wafers, pc);

  ModelConfig mc;
  mc.variant = Variant::vaughan;
  mc.skipCount = 5;
  Model model = Model::build(mc, 7);
  TrainConfig tc;
  tc.epochs = 60;
  tc.seed = 17;
  tc.evalEvery = 0;
  // This criterion scores overall pixel accuracy, so train with uniform class
  // weights; the defect-heavy production weighting trades PA away by design.
  tc.classWeights = {1, 1, 1};

  double bestPa = 0;
  int epochsUsed = 0;
  train(model, set, {}, tc, [&](const HistoryRecord& r, Model&) {
    bestPa = std::max(bestPa, r.trainPixelAccuracy);
    epochsUsed = r.epoch;
    return bestPa < 0.99;
  });
  if (bestPa >= 0.99)
    return {true, "train pixel accuracy " + std::to_string(bestPa) + " after " +
                      std::to_string(epochsUsed) + " epochs"};
  return {false, "train pixel accuracy peaked at " + std::to_string(bestPa) + " in 60 epochs"};
}

// ------------------------------------------------------------- criteria 5 & 6

Outcome criterion_weighted_trend() {
  int hold = 0;
  std::ostringstream det;
  for (uint64_t seed : {1001u, 1002u, 1003u}) {
    auto [tr, val] = trend_dataset(seed, false);
    ModelConfig mc;
    mc.variant = Variant::vaughan;
    mc.skipCount = 5;
    TrendRun uniform = trend_run(tr, val, mc, {1, 1, 1}, seed, kTrendEpochs);
    TrendRun weighted = trend_run(tr, val, mc, {100, 100, 2000}, seed, kTrendEpochs);
    const double u = std::isnan(uniform.dca) ? 0 : uniform.dca;
    const double w = std::isnan(weighted.dca) ? 0 : weighted.dca;
    const bool ok = (w - u >= 0.05) && (uniform.pa - weighted.pa <= 0.03);
    hold += ok;
    det << " seed " << seed << ": DCA " << u << "->" << w << ", PA " << uniform.pa << "->"
        << weighted.pa << (ok ? " (holds)" : " (fails)");
  }
  return {hold >= 2, "trend holds in " + std::to_string(hold) + "/3 seeds;" + det.str()};
}

Outcome criterion_skip_trend() {
  int hold = 0;
  std::ostringstream det;
  for (uint64_t seed : {1001u, 1002u, 1003u}) {
    auto [tr, val] = trend_dataset(seed, false);
    double dca[3];
    const int skips[3] = {0, 3, 5};
    for (int i = 0; i < 3; ++i) {
      ModelConfig mc;
      mc.variant = Variant::vaughan;
      mc.skipCount = skips[i];
      // Uniform weights: the defect-heavy weighting masks the skip ablation by
      // inflating defect recall even for a skipless model. Without it, the
      // skipless decoder cannot localize defects at all (DCA ~0) and the
      // ordering is decided by genuine localization quality.
      TrendRun r = trend_run(tr, val, mc, {1, 1, 1}, seed, kTrendEpochs);
      dca[i] = std::isnan(r.dca) ? 0 : r.dca;
    }
    const bool ok = dca[0] < dca[1] && dca[1] <= dca[2];
    hold += ok;
    det << " seed " << seed << ": " << dca[0] << " / " << dca[1] << " / " << dca[2]
        << (ok ? " (holds)" : " (fails)");
  }
  return {hold >= 2, "skip0 < skip3 <= skip5 in " + std::to_string(hold) + "/3 seeds;" +
                         det.str()};
}

Outcome criterion_embedding_trend() {
  int hold = 0;
  std::ostringstream det;
  for (uint64_t seed : {1001u, 1002u, 1003u}) {
    ModelConfig mc;
    mc.variant = Variant::vaughan;
    mc.skipCount = 5;
    auto [trM, valM] = trend_dataset(seed, false);  // mismatch: rings look healthy
    auto [trE, valE] = trend_dataset(seed, true);
    TrendRun mismatch = trend_run(trM, valM, mc, {100, 100, 2000}, seed, kTrendEpochs);
    TrendRun embedded = trend_run(trE, valE, mc, {100, 100, 2000}, seed, kTrendEpochs);
    const double m = std::isnan(mismatch.dca) ? 0 : mismatch.dca;
    const double e = std::isnan(embedded.dca) ? 0 : embedded.dca;
    const bool ok = e > m;
    hold += ok;
    det << " seed " << seed << ": DCA " << m << " -> " << e << (ok ? " (holds)" : " (fails)");
  }
  return {hold >= 2, "embedding raises DCA in " + std::to_string(hold) + "/3 seeds;" + det.str()};
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_ensemble() {
  ModelConfig mc;
  mc.variant = Variant::broomstick;
  mc.skipCount = 2;
  Model m = Model::build(mc, 13);
  Rng rng(6);
  Tensor img = random_tensor({1, 1, 32, 32}, rng, 0, 1);
  const std::vector<int> angles = {0, 90, 180, 270};

  NoGradGuard ng;
  Tensor acc({1, 3, 32, 32});
  for (int a : angles) {
    Tensor back = rot90(m.forward(rot90(img, a / 90), false)->value, (4 - a / 90) % 4);
    for (long long i = 0; i < acc.size(); ++i) acc[i] += back[i];
  }
  for (long long i = 0; i < acc.size(); ++i) acc[i] /= 4.0;

  if (ensemble_probabilities(m, img, angles).vec() != acc.vec())
    return {false, "four-pass oracle probabilities differ"};
  if (!(ensemble_predict(m, img, angles) == predict_classes(acc)))
    return {false, "four-pass oracle argmax differs"};
  if (!(ensemble_predict(m, img, {0}) == predict_classes(m.forward(img, false)->value)))
    return {false, "single-angle ensemble differs from plain prediction"};
  return {true, "four-pass oracle bit-for-bit; single angle equals plain prediction"};
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion_determinism() {
  WaferGenConfig g;
  g.height = g.width = 32;
  g.voidCount = 1;
  g.markerCount = 4;
  Dataset ds = generate_dataset(g, 4, 0.5, 3, 555);

  // dataset round trip
  const auto dir = std::filesystem::temp_directory_path() /
                   ("waferseg_acc9_" +
                    std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  save_dataset(dir.string(), ds);
  Dataset loaded = load_dataset(dir.string());
  std::filesystem::remove_all(dir);
  if (loaded.samples.size() != ds.samples.size())
    return {false, "dataset round trip lost samples"};
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    if (loaded.samples[i].labels != ds.samples[i].labels)
      return {false, "dataset round trip changed labels"};
    Tensor a({1, 1, 1, int(ds.samples[i].image.size())}, ds.samples[i].image);
    quantize_f32(a);
    if (a.vec() != loaded.samples[i].image) return {false, "dataset round trip changed pixels"};
  }

  PreprocessConfig pc;
  auto tr = preprocess_all(split_of(ds, "train"), pc);
  auto val = preprocess_all(split_of(ds, "val"), pc);
  ModelConfig mc;
  mc.variant = Variant::broomstick;
  mc.skipCount = 2;
  TrainConfig tc;
  tc.seed = 3;
  tc.epochs = 4;

  // bit reproducibility
  Model a = Model::build(mc, 8);
  Model b = Model::build(mc, 8);
  TrainResult ra = train(a, tr, val, tc);
  TrainResult rb = train(b, tr, val, tc);
  for (size_t i = 0; i < a.params().size(); ++i)
    if (a.params()[i].var->value.vec() != b.params()[i].var->value.vec())
      return {false, "repeat run diverged at " + a.params()[i].name};
  if (ra.history.back().valLoss != rb.history.back().valLoss)
    return {false, "repeat run validation losses differ"};

  // checkpoint resume == uninterrupted
  const auto cdir = std::filesystem::temp_directory_path() /
                    ("waferseg_acc9c_" +
                     std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  tc.checkpointEvery = 1;
  tc.checkpointDir = cdir.string();
  Model full = Model::build(mc, 8);
  train(full, tr, val, tc);
  std::filesystem::remove_all(cdir);
  Model half = Model::build(mc, 8);
  train(half, tr, val, tc,
        [](const HistoryRecord& r, Model&) { return r.epoch < 2; });
  CheckpointData data = load_checkpoint((cdir / "epoch_2.ckpt").string());
  Model resumed = model_from_checkpoint(data);
  train(resumed, tr, val, tc, {}, &data.optimizer, int(data.epoch));
  std::filesystem::remove_all(cdir);
  for (size_t i = 0; i < full.params().size(); ++i)
    if (full.params()[i].var->value.vec() != resumed.params()[i].var->value.vec())
      return {false, "resume diverged at " + full.params()[i].name};
  auto bn1 = full.bn_states(), bn2 = resumed.bn_states();
  for (size_t i = 0; i < bn1.size(); ++i)
    if (bn1[i].state->running_mean.vec() != bn2[i].state->running_mean.vec() ||
        bn1[i].state->running_var.vec() != bn2[i].state->running_var.vec())
      return {false, "resume diverged in batchnorm statistics at " + bn1[i].name};

  return {true, "repeat runs, checkpoint resume and dataset files all bit-exact"};
}

// --------------------------------------------------------------- criterion 10

Outcome criterion_crossval() {
  // partition properties at full dataset scale
  std::vector<bool> isCluster(145, false);
  for (int i = 0; i < 36; ++i) isCluster[i * 4] = true;
  auto folds = partition_folds(isCluster, 4, true, 900);
  std::set<int> seen;
  for (const auto& f : folds) {
    int c = 0;
    for (int i : f) {
      if (!seen.insert(i).second) return {false, "folds overlap"};
      c += isCluster[i];
    }
    if (c != 9) return {false, "fold holds " + std::to_string(c) + " cluster wafers, expected 9"};
  }
  if (seen.size() != 145) return {false, "folds do not cover the dataset"};

  // per-fold reports from an actual (tiny) run
  WaferGenConfig g;
  g.height = g.width = 32;
  g.voidCount = 1;
  g.linearDefectCount = 0;
  g.markerCount = 4;
  // Split is irrelevant here: cross_validate folds the samples itself.
  Dataset ds = generate_dataset(g, 8, 0.5, 7, 321);
  ModelConfig mc;
  mc.variant = Variant::broomstick;
  mc.skipCount = 2;
  TrainConfig tc;
  tc.epochs = 1;
  PreprocessConfig pc;
  pc.rotations = {};
  CrossValResult r = cross_validate(ds.samples, 4, true, 11, mc, tc, pc);
  if (r.folds.size() != 4) return {false, "expected 4 fold reports"};
  for (const auto& f : r.folds) {
    if (f.cm.total() == 0) return {false, "fold " + std::to_string(f.fold) + " report is empty"};
    if (!(f.val.pixelAccuracy >= 0 && f.val.pixelAccuracy <= 1))
      return {false, "fold report PA out of range"};
  }
  if (!(r.stddev.pixelAccuracy >= 0)) return {false, "summary stddev malformed"};
  return {true, "145/36 partition properties hold; 4 per-fold reports produced"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1..10>\n", argv[0]);
    return 2;
  }
  const int n = std::atoi(argv[1]);
  struct Entry {
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[10] = {
      {"gradient suite", criterion_gradients},
      {"shape conformance", criterion_shapes},
      {"metrics oracle", criterion_metrics_oracle},
      {"overfit sanity", criterion_overfit},
      {"weighted-loss trend", criterion_weighted_trend},
      {"skip-connection trend", criterion_skip_trend},
      {"ultrasonic-embedding trend", criterion_embedding_trend},
      {"ensemble correctness", criterion_ensemble},
      {"determinism & persistence", criterion_determinism},
      {"cross-validation harness", criterion_crossval},
  };
  if (n < 1 || n > 10) {
    std::fprintf(stderr, "criterion out of range\n");
    return 2;
  }
  Outcome o;
  try {
    o = entries[n - 1].fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %d (%s): %s - %s\n", n, entries[n - 1].name, o.pass ? "PASS" : "FAIL",
              o.detail.c_str());
  return o.pass ? 0 : 1;
}
