#include "waferseg/crossval.hpp"

#include <algorithm>
#include <cmath>

#include "waferseg/rng.hpp"

namespace waferseg {

std::vector<std::vector<int>> partition_folds(const std::vector<bool>& isCluster, int folds,
                                              bool stratifyClusters, uint64_t masterSeed) {
  const int n = static_cast<int>(isCluster.size());
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (n < folds) throw std::invalid_argument("cross_validate: dataset smaller than fold count");

  auto shuffled = [&](std::vector<int> idx, uint64_t salt) {
    Rng rng(Rng(masterSeed).derive(salt));
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.uniform_int(static_cast<uint64_t>(i) + 1)]);
    return idx;
  };

  std::vector<std::vector<int>> out(folds);
  if (!stratifyClusters) {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    all = shuffled(std::move(all), 1);
    for (int i = 0; i < n; ++i) out[i % folds].push_back(all[i]);
  } else {
    std::vector<int> cluster, plain;
    for (int i = 0; i < n; ++i) (isCluster[i] ? cluster : plain).push_back(i);
    if (!cluster.empty() && static_cast<int>(cluster.size()) % folds != 0 &&
        static_cast<int>(cluster.size()) < folds)
      throw std::invalid_argument(
          "cross_validate: cluster stratification unsatisfiable (fewer cluster wafers than folds)");
    cluster = shuffled(std::move(cluster), 2);
    plain = shuffled(std::move(plain), 3);
    // deal round-robin so cluster wafers balance across folds
    for (size_t i = 0; i < cluster.size(); ++i) out[i % folds].push_back(cluster[i]);
    for (size_t i = 0; i < plain.size(); ++i) out[(cluster.size() + i) % folds].push_back(plain[i]);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

CrossValResult cross_validate(const std::vector<WaferSample>& dataset, int folds,
                              bool stratifyClusters, uint64_t masterSeed,
                              const ModelConfig& modelConfig, const TrainConfig& trainConfig,
                              const PreprocessConfig& preprocessConfig) {
  std::vector<bool> isCluster(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) isCluster[i] = dataset[i].isCluster;
  const auto partition = partition_folds(isCluster, folds, stratifyClusters, masterSeed);

  CrossValResult result;
  for (int f = 0; f < folds; ++f) {
    std::vector<bool> inVal(dataset.size(), false);
    for (int i : partition[f]) inVal[i] = true;
    std::vector<WaferSample> trainRaw, valRaw;
    for (size_t i = 0; i < dataset.size(); ++i)
      (inVal[i] ? valRaw : trainRaw).push_back(dataset[i]);

    trainRaw = augment_rotations(trainRaw, preprocessConfig);
    std::vector<Preprocessed> trainSet, valSet;
    for (const auto& s : trainRaw) trainSet.push_back(preprocess(s, preprocessConfig));
    for (const auto& s : valRaw) valSet.push_back(preprocess(s, preprocessConfig));

    Model model = Model::build(modelConfig, Rng(masterSeed).derive(100 + f));
    TrainConfig tc = trainConfig;
    tc.seed = Rng(masterSeed).derive(200 + f);
    tc.checkpointDir.clear();  // fold models are transient
    train(model, trainSet, valSet, tc);

    FoldResult fr;
    fr.fold = f;
    fr.validationIndices = partition[f];
    NoGradGuard ng;
    for (const auto& s : valSet) {
      Var probs = model.forward(s.image, false);
      fr.cm += confusion(predict_classes(probs->value), s.labels);
    }
    fr.val = metrics(fr.cm);
    result.folds.push_back(std::move(fr));
  }

  auto collect = [&](auto get) {
    double mean = 0;
    int k = 0;
    for (const auto& f : result.folds) {
      const double v = get(f.val);
      if (std::isfinite(v)) {
        mean += v;
        ++k;
      }
    }
    mean = k ? mean / k : std::nan("");
    double var = 0;
    for (const auto& f : result.folds) {
      const double v = get(f.val);
      if (std::isfinite(v)) var += (v - mean) * (v - mean);
    }
    return std::pair<double, double>{mean, k ? std::sqrt(var / k) : std::nan("")};
  };
  auto [paM, paS] = collect([](const MetricsReport& r) { return r.pixelAccuracy; });
  auto [mpaM, mpaS] = collect([](const MetricsReport& r) { return r.meanPixelAccuracy; });
  auto [iouM, iouS] = collect([](const MetricsReport& r) { return r.meanIoU; });
  auto [dcaM, dcaS] = collect([](const MetricsReport& r) { return r.defectClassAccuracy; });
  result.mean.pixelAccuracy = paM;
  result.mean.meanPixelAccuracy = mpaM;
  result.mean.meanIoU = iouM;
  result.mean.defectClassAccuracy = dcaM;
  result.stddev.pixelAccuracy = paS;
  result.stddev.meanPixelAccuracy = mpaS;
  result.stddev.meanIoU = iouS;
  result.stddev.defectClassAccuracy = dcaS;
  return result;
}

}  // namespace waferseg
