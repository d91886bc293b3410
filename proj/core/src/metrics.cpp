#include "waferseg/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace waferseg {

uint64_t ConfusionMatrix::total() const {
  uint64_t s = 0;
  for (const auto& row : counts)
    for (uint64_t v : row) s += v;
  return s;
}
uint64_t ConfusionMatrix::true_count(int cls) const {
  return counts[cls][0] + counts[cls][1] + counts[cls][2];
}
uint64_t ConfusionMatrix::predicted_count(int cls) const {
  return counts[0][cls] + counts[1][cls] + counts[2][cls];
}
ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) counts[j][i] += o.counts[j][i];
  return *this;
}

ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& truth) {
  if (predicted.n != truth.n || predicted.h != truth.h || predicted.w != truth.w)
    throw std::invalid_argument("confusion: shape mismatch");
  ConfusionMatrix cm;
  for (size_t i = 0; i < truth.v.size(); ++i) {
    const uint8_t t = truth.v[i], p = predicted.v[i];
    if (t > 2 || p > 2)
      throw std::invalid_argument("confusion: class value out of range {0,1,2}");
    ++cm.counts[t][p];
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  MetricsReport r;
  uint64_t diag = 0;
  for (int i = 0; i < 3; ++i) diag += cm.counts[i][i];
  r.pixelAccuracy = double(diag) / double(cm.total());

  int present = 0;
  double accSum = 0, iouSum = 0;
  for (int i = 0; i < 3; ++i) {
    const uint64_t ti = cm.true_count(i);
    if (ti == 0) {
      r.classAccuracy[i] = std::nan("");
      r.classIoU[i] = std::nan("");
      continue;
    }
    const double acc = double(cm.counts[i][i]) / double(ti);
    const double iou = double(cm.counts[i][i]) / double(ti + cm.predicted_count(i) - cm.counts[i][i]);
    r.classAccuracy[i] = acc;
    r.classIoU[i] = iou;
    accSum += acc;
    iouSum += iou;
    ++present;
  }
  r.meanPixelAccuracy = accSum / present;
  r.meanIoU = iouSum / present;
  r.defectClassAccuracy = cm.true_count(2) == 0 ? std::nan("") : r.classAccuracy[2];
  return r;
}

Tensor ensemble_probabilities(Model& model, const Tensor& image, const std::vector<int>& angles) {
  if (angles.empty()) throw std::invalid_argument("ensemble: at least one angle required");
  const Shape4 s = image.shape();
  for (int a : angles) {
    if (a != 0 && a != 90 && a != 180 && a != 270)
      throw std::invalid_argument("ensemble: angles must be multiples of 90 in {0,90,180,270}");
    if ((a == 90 || a == 270) && s.h != s.w)
      throw std::invalid_argument("ensemble: 90/270 rotation requires a square input, got " +
                                  s.str());
  }
  NoGradGuard ng;
  Tensor acc;
  for (size_t i = 0; i < angles.size(); ++i) {
    const int k = angles[i] / 90;
    Var probs = model.forward(rot90(image, k), /*training=*/false);
    Tensor back = rot90(probs->value, -k);
    if (i == 0) {
      acc = std::move(back);
    } else {
      for (long long j = 0; j < acc.size(); ++j) acc[j] += back[j];
    }
  }
  for (long long j = 0; j < acc.size(); ++j) acc[j] /= double(angles.size());
  return acc;
}

LabelMap ensemble_predict(Model& model, const Tensor& image, const std::vector<int>& angles,
                          EnsembleCombine combine) {
  if (combine == EnsembleCombine::mean)
    return predict_classes(ensemble_probabilities(model, image, angles));

  // majority vote over per-angle argmax maps; ties resolved by mean probability
  if (angles.empty()) throw std::invalid_argument("ensemble: at least one angle required");
  NoGradGuard ng;
  const Shape4 s = image.shape();
  std::vector<LabelMap> votes;
  Tensor meanp = ensemble_probabilities(model, image, angles);
  for (int a : angles) {
    const int k = a / 90;
    Var probs = model.forward(rot90(image, k), false);
    votes.push_back(predict_classes(rot90(probs->value, -k)));
  }
  LabelMap out(s.n, s.h, s.w);
  const long long HW = 1LL * s.h * s.w;
  for (long long i = 0; i < 1LL * s.n * HW; ++i) {
    int tally[3] = {0, 0, 0};
    for (const auto& v : votes) ++tally[v.v[i]];
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (tally[c] > tally[best]) best = c;
    // tie: fall back to the averaged probabilities
    for (int c = 0; c < 3; ++c)
      if (c != best && tally[c] == tally[best]) {
        const int n = static_cast<int>(i / HW);
        const long long pix = i % HW;
        double bv = -1;
        for (int cc = 0; cc < 3; ++cc) {
          const double p = meanp[(1LL * n * 3 + cc) * HW + pix];
          if (tally[cc] == tally[best] && p > bv) {
            bv = p;
            best = cc;
          }
        }
        break;
      }
    out.v[i] = static_cast<uint8_t>(best);
  }
  return out;
}

}  // namespace waferseg
