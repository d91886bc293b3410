#include "waferseg/wafergen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "waferseg/rng.hpp"

namespace waferseg {

std::string to_string(BrightnessField f) {
  switch (f) {
    case BrightnessField::uniform: return "uniform";
    case BrightnessField::radialGradient: return "radialGradient";
    case BrightnessField::linearGradient: return "linearGradient";
    default: return "blotchy";
  }
}
std::string to_string(ClusterShape s) {
  switch (s) {
    case ClusterShape::blob: return "blob";
    case ClusterShape::elongated: return "elongated";
    default: return "ring";
  }
}
BrightnessField brightness_field_from_string(const std::string& s) {
  if (s == "uniform") return BrightnessField::uniform;
  if (s == "radialGradient") return BrightnessField::radialGradient;
  if (s == "linearGradient") return BrightnessField::linearGradient;
  if (s == "blotchy") return BrightnessField::blotchy;
  throw std::invalid_argument("unknown brightness field '" + s + "'");
}
ClusterShape cluster_shape_from_string(const std::string& s) {
  if (s == "blob") return ClusterShape::blob;
  if (s == "elongated") return ClusterShape::elongated;
  if (s == "ring") return ClusterShape::ring;
  throw std::invalid_argument("unknown cluster shape '" + s + "'");
}

void WaferGenConfig::validate() const {
  if (1LL * height * width < 32 * 32)
    throw std::invalid_argument("wafer grid must have at least 32*32 chips");
  if (discMarginFrac < 0 || discMarginFrac >= 0.5)
    throw std::invalid_argument("discMarginFrac must be in [0, 0.5)");
  if (singleDefectRate < 0 || singleDefectRate >= 1)
    throw std::invalid_argument("singleDefectRate must be in [0, 1)");
  if (linearDefectCount < 0 || voidCount < 0 || clusterCount < 0 || markerCount < 0)
    throw std::invalid_argument("defect/marker counts must be non-negative");
  if (voidLabelInflation < 1) throw std::invalid_argument("voidLabelInflation must be >= 1");
  if (noiseSigma < 0) throw std::invalid_argument("noiseSigma must be non-negative");
  if (brightnessAmplitude < 0 || brightnessAmplitude > 0.45)
    throw std::invalid_argument("brightnessAmplitude must be in [0, 0.45]");
}

namespace {

constexpr double kBaseBrightness = 0.85;
constexpr double kBackgroundBrightness = 0.03;
constexpr int kPlacementRetries = 120;

struct GenContext {
  const WaferGenConfig& cfg;
  Rng rng;
  int H, W;
  double ch, cw, R;
  std::vector<double> base;     // pre-defect, pre-noise brightness
  std::vector<uint8_t> occupied;  // markers + already stamped defects

  bool in_disc(int h, int w) const {
    const double dh = h - ch, dw = w - cw;
    return dh * dh + dw * dw <= R * R;
  }
  int idx(int h, int w) const { return h * W + w; }
};

std::vector<double> brightness_multiplier(GenContext& g) {
  const auto& cfg = g.cfg;
  std::vector<double> m(1LL * g.H * g.W, 1.0);
  const double A = cfg.brightnessAmplitude;
  switch (cfg.brightnessField) {
    case BrightnessField::uniform:
      break;
    case BrightnessField::radialGradient:
      for (int h = 0; h < g.H; ++h)
        for (int w = 0; w < g.W; ++w) {
          const double dh = h - g.ch, dw = w - g.cw;
          const double r2 = (dh * dh + dw * dw) / (g.R * g.R);
          m[g.idx(h, w)] = 1.0 - A * std::min(1.0, r2);
        }
      break;
    case BrightnessField::linearGradient: {
      const double th = g.rng.uniform(0, 2 * M_PI);
      const double dx = std::cos(th), dy = std::sin(th);
      double lo = 1e30, hi = -1e30;
      for (int h = 0; h < g.H; ++h)
        for (int w = 0; w < g.W; ++w) {
          const double p = h * dy + w * dx;
          lo = std::min(lo, p);
          hi = std::max(hi, p);
        }
      for (int h = 0; h < g.H; ++h)
        for (int w = 0; w < g.W; ++w)
          m[g.idx(h, w)] = 1.0 - A * ((h * dy + w * dx - lo) / std::max(1e-9, hi - lo));
      break;
    }
    case BrightnessField::blotchy: {
      // value noise: coarse gaussian grid, corner-aligned bilinear upsample
      const int step = std::max(8, std::min(g.H, g.W) / 6);
      const int gh = g.H / step + 2, gw = g.W / step + 2;
      std::vector<double> coarse(1LL * gh * gw);
      for (auto& v : coarse) v = g.rng.normal();
      std::vector<double> f(1LL * g.H * g.W);
      double lo = 1e30, hi = -1e30;
      for (int h = 0; h < g.H; ++h)
        for (int w = 0; w < g.W; ++w) {
          const double sh = 1.0 * h / step, sw = 1.0 * w / step;
          const int h0 = static_cast<int>(sh), w0 = static_cast<int>(sw);
          const double ah = sh - h0, aw = sw - w0;
          const double v = (1 - ah) * ((1 - aw) * coarse[h0 * gw + w0] +
                                       aw * coarse[h0 * gw + w0 + 1]) +
                           ah * ((1 - aw) * coarse[(h0 + 1) * gw + w0] +
                                 aw * coarse[(h0 + 1) * gw + w0 + 1]);
          f[g.idx(h, w)] = v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      for (size_t i = 0; i < m.size(); ++i)
        m[i] = 1.0 - A * (hi - f[i]) / std::max(1e-9, hi - lo);
      break;
    }
  }
  return m;
}

void stamp_markers(GenContext& g, WaferSample& s) {
  if (g.cfg.markerCount <= 0) return;
  // regular sub-grid of small 2x2 glyphs, fully inside the disc
  const int per_row = static_cast<int>(std::ceil(std::sqrt(double(g.cfg.markerCount))));
  const double sh = g.H / double(per_row + 1), sw = g.W / double(per_row + 1);
  int placed = 0;
  for (int i = 1; i <= per_row && placed < g.cfg.markerCount; ++i)
    for (int j = 1; j <= per_row && placed < g.cfg.markerCount; ++j) {
      const int h = static_cast<int>(i * sh), w = static_cast<int>(j * sw);
      bool ok = h + 1 < g.H && w + 1 < g.W;
      for (int dh = 0; ok && dh < 2; ++dh)
        for (int dw = 0; ok && dw < 2; ++dw) ok = g.in_disc(h + dh, w + dw);
      if (!ok) continue;
      for (int dh = 0; dh < 2; ++dh)
        for (int dw = 0; dw < 2; ++dw) {
          s.px(h + dh, w + dw) = g.base[g.idx(h + dh, w + dw)] * 0.25;
          s.lab(h + dh, w + dw) = 0;  // markers are background class
          g.occupied[g.idx(h + dh, w + dw)] = 1;
        }
      ++placed;
    }
}

// true if all pixels are in the disc, unoccupied, and the list is non-empty
bool placeable(const GenContext& g, const std::vector<int>& pixels) {
  if (pixels.empty()) return false;
  for (int p : pixels) {
    const int h = p / g.W, w = p % g.W;
    if (!g.in_disc(h, w) || g.occupied[p]) return false;
  }
  return true;
}

void commit(GenContext& g, WaferSample& s, DefectGeometry geo, bool embed_full_label) {
  for (int p : geo.visiblePixels) {
    const double f = g.rng.uniform(0.1, 0.6);
    s.image[p] = std::min(s.image[p], g.base[p] * f);
  }
  if (embed_full_label)
    for (int p : geo.labelPixels)
      s.image[p] = std::min(s.image[p], g.base[p] * g.rng.uniform(0.1, 0.6));
  for (int p : geo.labelPixels) {
    s.labels[p] = 2;
    g.occupied[p] = 1;
  }
  for (int p : geo.visiblePixels) g.occupied[p] = 1;
  s.defects.push_back(std::move(geo));
}

std::vector<int> ellipse_pixels(const GenContext& g, double hc, double wc, double a, double b,
                                double phi, bool clip_to_disc) {
  std::vector<int> out;
  const double r = std::max(a, b) + 1;
  const double cs = std::cos(phi), sn = std::sin(phi);
  for (int h = std::max(0, int(hc - r)); h <= std::min(g.H - 1, int(hc + r)); ++h)
    for (int w = std::max(0, int(wc - r)); w <= std::min(g.W - 1, int(wc + r)); ++w) {
      const double dh = h - hc, dw = w - wc;
      const double u = dw * cs + dh * sn, v = -dw * sn + dh * cs;
      if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) {
        if (clip_to_disc && !g.in_disc(h, w)) continue;
        out.push_back(g.idx(h, w));
      }
    }
  return out;
}

void place_voids(GenContext& g, WaferSample& s) {
  const double unit = std::min(g.H, g.W);
  for (int k = 0; k < g.cfg.voidCount; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < kPlacementRetries && !done; ++attempt) {
      const double hc = g.ch + g.rng.uniform(-0.6, 0.6) * g.R;
      const double wc = g.cw + g.rng.uniform(-0.6, 0.6) * g.R;
      const double av = unit * g.rng.uniform(0.03, 0.07);
      const double bv = unit * g.rng.uniform(0.03, 0.07);
      const double phi = g.rng.uniform(0, M_PI);
      auto label = ellipse_pixels(g, hc, wc, av * g.cfg.voidLabelInflation,
                                  bv * g.cfg.voidLabelInflation, phi, true);
      auto visible = ellipse_pixels(g, hc, wc, av, bv, phi, true);
      if (!placeable(g, label) || visible.empty()) continue;
      DefectGeometry geo{DefectGeometry::Kind::voidDefect, std::move(label), std::move(visible)};
      commit(g, s, std::move(geo), g.cfg.ultrasonicEmbedding);
      done = true;
    }
    if (!done)
      throw std::runtime_error(
          "generate_wafer: could not place void " + std::to_string(k + 1) + " of " +
          std::to_string(g.cfg.voidCount) + " without overlap (disc too crowded)");
  }
}

void place_linear_defects(GenContext& g, WaferSample& s) {
  const double unit = std::min(g.H, g.W);
  for (int k = 0; k < g.cfg.linearDefectCount; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < kPlacementRetries && !done; ++attempt) {
      double h = g.ch + g.rng.uniform(-0.7, 0.7) * g.R;
      double w = g.cw + g.rng.uniform(-0.7, 0.7) * g.R;
      double th = g.rng.uniform(0, 2 * M_PI);
      const int segments = 1 + int(g.rng.uniform_int(2));
      std::vector<int> pixels;
      bool ok = true;
      for (int seg = 0; seg < segments && ok; ++seg) {
        const double len = unit * g.rng.uniform(0.12, 0.3);
        const int steps = std::max(2, int(len));
        const double dh = std::sin(th), dw = std::cos(th);
        for (int i = 0; i < steps; ++i) {
          const int ph = int(std::lround(h + i * dh)), pw = int(std::lround(w + i * dw));
          if (ph < 0 || ph >= g.H || pw < 0 || pw >= g.W || !g.in_disc(ph, pw)) {
            ok = !pixels.empty();
            break;
          }
          if (pixels.empty() || pixels.back() != g.idx(ph, pw)) pixels.push_back(g.idx(ph, pw));
        }
        h += (steps - 1) * dh;
        w += (steps - 1) * dw;
        th += g.rng.uniform(-0.7, 0.7);  // bend between segments
      }
      std::sort(pixels.begin(), pixels.end());
      pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
      if (!ok || int(pixels.size()) < 4 || !placeable(g, pixels)) continue;
      DefectGeometry geo{DefectGeometry::Kind::linear, pixels, pixels};
      commit(g, s, std::move(geo), false);
      done = true;
    }
    if (!done)
      throw std::runtime_error("generate_wafer: could not place linear defect " +
                               std::to_string(k + 1) + " without overlap");
  }
}

void place_clusters(GenContext& g, WaferSample& s) {
  const double unit = std::min(g.H, g.W);
  for (int k = 0; k < g.cfg.clusterCount; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < kPlacementRetries && !done; ++attempt) {
      const double hc = g.ch + g.rng.uniform(-0.5, 0.5) * g.R;
      const double wc = g.cw + g.rng.uniform(-0.5, 0.5) * g.R;
      const double r0 = unit * g.rng.uniform(0.10, 0.2);
      // wobbled radial outline r(theta)
      double a2 = g.rng.uniform(-0.3, 0.3), a3 = g.rng.uniform(-0.2, 0.2),
             p2 = g.rng.uniform(0, 2 * M_PI), p3 = g.rng.uniform(0, 2 * M_PI);
      const double ecc = g.cfg.clusterShape == ClusterShape::elongated ? 3.0 : 1.0;
      const double phi = g.rng.uniform(0, M_PI);
      const double cs = std::cos(phi), sn = std::sin(phi);
      const double inner = g.cfg.clusterShape == ClusterShape::ring ? 0.55 : 0.0;
      std::vector<int> pixels;
      const double reach = r0 * 1.4 * std::max(1.0, ecc);
      for (int h = std::max(0, int(hc - reach)); h <= std::min(g.H - 1, int(hc + reach)); ++h)
        for (int w = std::max(0, int(wc - reach)); w <= std::min(g.W - 1, int(wc + reach)); ++w) {
          const double dh = h - hc, dw = w - wc;
          const double u = (dw * cs + dh * sn);  // major axis
          const double v = (-dw * sn + dh * cs) * ecc;
          const double d = std::sqrt(u * u + v * v);
          const double th = std::atan2(v, u);
          const double rb = r0 * (1 + a2 * std::sin(2 * th + p2) + a3 * std::sin(3 * th + p3));
          if (d <= rb && d >= inner * rb) pixels.push_back(g.idx(h, w));
        }
      if (int(pixels.size()) < 12 || !placeable(g, pixels)) continue;
      DefectGeometry geo{DefectGeometry::Kind::cluster, pixels, pixels};
      // interchange of sharp and smooth brightness gradients: a smooth radial
      // factor ramp with a constant-dark random sector
      const double sect0 = g.rng.uniform(0, 2 * M_PI), sectw = g.rng.uniform(0.6, 1.8);
      for (int p : geo.visiblePixels) {
        const int h = p / g.W, w = p % g.W;
        const double dh = h - hc, dw = w - wc;
        const double d = std::sqrt(dh * dh + dw * dw);
        const double th = std::atan2(dh, dw);
        double f = 0.2 + 0.35 * std::min(1.0, d / std::max(1.0, r0));
        double dth = std::remainder(th - sect0, 2 * M_PI);
        if (std::abs(dth) < sectw / 2) f = 0.12;  // sharp-edged dark sector
        s.image[p] = std::min(s.image[p], g.base[p] * f);
      }
      for (int p : geo.labelPixels) {
        s.labels[p] = 2;
        g.occupied[p] = 1;
      }
      s.defects.push_back(std::move(geo));
      done = true;
    }
    if (!done)
      throw std::runtime_error("generate_wafer: could not place defect cluster " +
                               std::to_string(k + 1) + " without overlap (grid too small?)");
  }
}

void place_single_defects(GenContext& g, WaferSample& s) {
  if (g.cfg.singleDefectRate <= 0) return;
  for (int h = 0; h < g.H; ++h)
    for (int w = 0; w < g.W; ++w) {
      const int p = g.idx(h, w);
      if (!g.in_disc(h, w) || g.occupied[p] || s.labels[p] != 1) continue;
      if (g.rng.uniform() < g.cfg.singleDefectRate) {
        DefectGeometry geo{DefectGeometry::Kind::single, {p}, {p}};
        commit(g, s, std::move(geo), false);
      }
    }
}

}  // namespace

WaferSample generate_wafer(const WaferGenConfig& config) {
  config.validate();
  GenContext g{config, Rng(config.seed), config.height, config.width,
               (config.height - 1) / 2.0, (config.width - 1) / 2.0,
               std::min(config.height, config.width) / 2.0 * (1.0 - config.discMarginFrac),
               {}, {}};
  WaferSample s;
  s.height = g.H;
  s.width = g.W;
  s.meta = config;
  s.image.assign(1LL * g.H * g.W, kBackgroundBrightness);
  s.labels.assign(1LL * g.H * g.W, 0);
  g.occupied.assign(1LL * g.H * g.W, 0);

  const auto mult = brightness_multiplier(g);
  g.base.assign(1LL * g.H * g.W, kBackgroundBrightness);
  for (int h = 0; h < g.H; ++h)
    for (int w = 0; w < g.W; ++w)
      if (g.in_disc(h, w)) {
        g.base[g.idx(h, w)] = kBaseBrightness * mult[g.idx(h, w)];
        s.px(h, w) = g.base[g.idx(h, w)];
        s.lab(h, w) = 1;
      }

  stamp_markers(g, s);
  place_clusters(g, s);
  place_voids(g, s);
  place_linear_defects(g, s);
  place_single_defects(g, s);

  if (config.noiseSigma > 0)
    for (auto& v : s.image) v = std::clamp(v + config.noiseSigma * g.rng.normal(), 0.0, 1.0);

  // defect contrast floor against the local pre-defect brightness
  for (const auto& d : s.defects)
    for (int p : d.visiblePixels)
      s.image[p] = std::clamp(std::min(s.image[p], g.base[p] - config.minDefectContrast), 0.0, 1.0);
  if (config.ultrasonicEmbedding)
    for (const auto& d : s.defects)
      if (d.kind == DefectGeometry::Kind::voidDefect)
        for (int p : d.labelPixels)
          s.image[p] =
              std::clamp(std::min(s.image[p], g.base[p] - config.minDefectContrast), 0.0, 1.0);

  s.isCluster = config.clusterCount > 0;
  return s;
}

Dataset generate_dataset(const WaferGenConfig& config_template, int count, double clusterFraction,
                         int trainCount, uint64_t masterSeed) {
  if (count < 2) throw std::invalid_argument("generate_dataset: count must be >= 2");
  if (clusterFraction < 0 || clusterFraction > 1)
    throw std::invalid_argument("generate_dataset: clusterFraction must be in [0, 1]");
  if (trainCount < 1 || trainCount >= count)
    throw std::invalid_argument("generate_dataset: trainCount must leave both splits non-empty");
  const int nCluster = static_cast<int>(std::llround(clusterFraction * count));
  if (nCluster > count)
    throw std::invalid_argument("generate_dataset: clusterFraction unsatisfiable for count " +
                                std::to_string(count));
  // largest-remainder assignment of cluster wafers to the train portion
  const int clusterTrain =
      static_cast<int>(std::llround(double(nCluster) * trainCount / count));
  if (clusterTrain > trainCount || (nCluster - clusterTrain) > (count - trainCount))
    throw std::invalid_argument("generate_dataset: cluster stratification unsatisfiable");

  Dataset ds;
  int placedClusterTrain = 0, placedPlainTrain = 0;
  const int plainTrain = trainCount - clusterTrain;
  for (int i = 0; i < count; ++i) {
    WaferGenConfig c = config_template;
    c.seed = splitmix64(splitmix64(masterSeed) ^ (0xA24BAED4963EE407ULL + i));
    const bool cluster = i < nCluster;
    if (cluster && c.clusterCount == 0) c.clusterCount = 1;
    if (!cluster) c.clusterCount = 0;
    ds.samples.push_back(generate_wafer(c));
    ManifestEntry e;
    e.seed = c.seed;
    e.isCluster = cluster;
    if (cluster)
      e.split = placedClusterTrain++ < clusterTrain ? "train" : "val";
    else
      e.split = placedPlainTrain++ < plainTrain ? "train" : "val";
    ds.entries.push_back(e);
  }
  return ds;
}

}  // namespace waferseg
