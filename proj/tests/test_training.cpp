#include <chrono>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "waferseg/training.hpp"

using namespace waferseg;

TEST_SUITE_BEGIN("training");

namespace {

std::vector<Preprocessed> tiny_set(int count, int hw, uint64_t seed0) {
  WaferGenConfig g;
  g.height = g.width = hw;
  g.voidCount = 1;
  g.linearDefectCount = 1;
  g.markerCount = 4;
  PreprocessConfig pc;
  std::vector<Preprocessed> out;
  for (int i = 0; i < count; ++i) {
    g.seed = seed0 + i;
    out.push_back(preprocess(generate_wafer(g), pc));
  }
  return out;
}

ModelConfig tiny_model_config() {
  ModelConfig mc;
  mc.variant = Variant::broomstick;
  mc.skipCount = 2;
  return mc;
}

}  // namespace

TEST_CASE("adam single step matches the closed form") {
  // One parameter tensor, hand-planted gradient, one step from zero moments:
  // m = (1-b1)g, v = (1-b2)g^2, mhat = g, vhat = g^2,
  // theta -= lr * g / (|g| + eps).
  ModelConfig mc = tiny_model_config();
  Model m = Model::build(mc, 3);
  TrainConfig tc;
  tc.weightDecay = 0;  // isolate the Adam arithmetic
  AdamState st;
  adam_init(st, m);
  st.lr = 0.01;
  std::vector<Tensor> before;
  for (auto& p : m.params()) {
    before.push_back(p.var->value);
    Tensor& g = p.var->ensure_grad();
    for (long long i = 0; i < g.size(); ++i) g[i] = 0.5 * ((i % 3) - 1);  // -0.5, 0, 0.5
  }
  adam_step(m, st, tc);
  CHECK(st.step == 1);
  for (size_t pi = 0; pi < m.params().size(); ++pi) {
    const Tensor& now = m.params()[pi].var->value;
    for (long long i = 0; i < now.size(); ++i) {
      const double g = 0.5 * ((i % 3) - 1);
      const double expect = before[pi][i] - 0.01 * g / (std::abs(g) + tc.adamEpsilon);
      CHECK(now[i] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("weight decay touches conv weights only") {
  ModelConfig mc = tiny_model_config();
  Model m = Model::build(mc, 4);
  TrainConfig tc;
  tc.weightDecay = 0.1;
  AdamState st;
  adam_init(st, m);
  st.lr = 0.01;
  for (auto& p : m.params()) p.var->ensure_grad().fill(0.0);  // decay is the only force
  std::vector<Tensor> before;
  for (auto& p : m.params()) before.push_back(p.var->value);
  adam_step(m, st, tc);
  for (size_t pi = 0; pi < m.params().size(); ++pi) {
    const auto& p = m.params()[pi];
    bool moved = false;
    for (long long i = 0; i < p.var->value.size(); ++i)
      moved = moved || p.var->value[i] != before[pi][i];
    if (p.is_conv_weight)
      CHECK(moved);  // nonzero he-initialized weights decay
    else
      CHECK_FALSE(moved);
  }
}

TEST_CASE("two epochs of training are reproducible and reduce the loss") {
  auto trainSet = tiny_set(3, 32, 500);
  auto valSet = tiny_set(1, 32, 900);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 11;
  ModelConfig mc = tiny_model_config();

  Model a = Model::build(mc, 42);
  TrainResult ra = train(a, trainSet, valSet, tc);
  REQUIRE(ra.history.size() == 2);
  CHECK(ra.epochsRun == 2);
  CHECK(ra.history[0].lr == doctest::Approx(tc.lr0));
  CHECK(ra.history[1].lr == doctest::Approx(tc.lr0 * tc.lrDecayPerEpoch));
  CHECK(ra.history[1].trainLoss < ra.history[0].trainLoss);

  Model b = Model::build(mc, 42);
  TrainResult rb = train(b, trainSet, valSet, tc);
  for (size_t i = 0; i < a.params().size(); ++i)
    CHECK(a.params()[i].var->value.vec() == b.params()[i].var->value.vec());
  CHECK(ra.history[1].valLoss == rb.history[1].valLoss);
}

TEST_CASE("gradient flow reaches every trainable parameter") {
  auto set = tiny_set(1, 32, 77);
  ModelConfig mc;
  mc.variant = Variant::broomstick;
  mc.skipCount = 4;
  mc.residualShortcuts = true;
  Model m = Model::build(mc, 8);
  Var probs = m.forward(set[0].image, true);
  Var loss = weighted_cross_entropy(probs, set[0].oneHot, {100, 100, 2000});
  backward(loss);
  for (auto& p : m.params()) {
    REQUIRE(p.var->grad.size() == p.var->value.size());
    double sum = 0;
    for (long long i = 0; i < p.var->grad.size(); ++i) sum += std::abs(p.var->grad[i]);
    INFO("zero gradient at " << p.name);
    CHECK(sum > 0);
  }
}

TEST_CASE("checkpoint resume equals uninterrupted training bit-for-bit") {
  auto trainSet = tiny_set(2, 32, 640);
  auto valSet = tiny_set(1, 32, 650);
  ModelConfig mc = tiny_model_config();
  const auto dir = std::filesystem::temp_directory_path() /
                   ("waferseg_resume_" +
                    std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  TrainConfig tc;
  tc.seed = 5;
  tc.epochs = 4;
  tc.checkpointEvery = 1;
  tc.checkpointDir = dir.string();

  // Uninterrupted 4 epochs.
  Model full = Model::build(mc, 9);
  train(full, trainSet, valSet, tc);

  // 4 epochs with a stop after 2 and a resume from the epoch-2 checkpoint.
  std::filesystem::remove_all(dir);
  Model half = Model::build(mc, 9);
  TrainResult first = train(half, trainSet, valSet, tc, [](const HistoryRecord& r, Model&) {
    return r.epoch < 2;  // stop after the second epoch's checkpoint is written
  });
  CHECK(first.epochsRun == 2);
  CheckpointData data = load_checkpoint((dir / "epoch_2.ckpt").string());
  CHECK(data.epoch == 2);
  Model resumed = model_from_checkpoint(data);
  train(resumed, trainSet, valSet, tc, {}, &data.optimizer, int(data.epoch));

  REQUIRE(resumed.params().size() == full.params().size());
  for (size_t i = 0; i < full.params().size(); ++i) {
    INFO("param " << full.params()[i].name);
    CHECK(resumed.params()[i].var->value.vec() == full.params()[i].var->value.vec());
  }
  auto b1 = full.bn_states(), b2 = resumed.bn_states();
  for (size_t i = 0; i < b1.size(); ++i) {
    CHECK(b1[i].state->running_mean.vec() == b2[i].state->running_mean.vec());
    CHECK(b1[i].state->running_var.vec() == b2[i].state->running_var.vec());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with context") {
  auto set = tiny_set(1, 32, 30);
  ModelConfig mc = tiny_model_config();
  Model m = Model::build(mc, 2);
  TrainConfig tc;
  tc.epochs = 5;
  tc.lr0 = 1e18;  // force a blow-up
  tc.classWeights = {1e300, 1e300, 1e300};
  CHECK_THROWS_WITH_AS(train(m, set, {}, tc), doctest::Contains("non-finite"),
                       std::runtime_error);
}

TEST_CASE("maskBackgroundLoss zeroes the background weight") {
  TrainConfig tc;
  tc.maskBackgroundLoss = true;
  auto set = tiny_set(1, 32, 41);
  ModelConfig mc = tiny_model_config();
  Model m = Model::build(mc, 12);
  auto [loss, rep] = evaluate(m, set, tc);
  TrainConfig plain;
  auto [loss2, rep2] = evaluate(m, set, plain);
  CHECK(loss < loss2);  // background pixels dominate the map
  (void)rep;
  (void)rep2;
}

TEST_SUITE_END();
