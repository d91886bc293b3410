#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace waferseg {

// Shape of a dense 4-D tensor: (batch, channels, height, width).
struct Shape4 {
  int n = 0, c = 0, h = 0, w = 0;

  long long size() const { return 1LL * n * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Dense row-major (N,C,H,W) tensor of doubles. Gradient buffers live in the
// autodiff layer, not here.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 s, double fill = 0.0)
      : shape_(s), data_(checked_size(s), fill) {}
  Tensor(Shape4 s, std::vector<double> data) : shape_(s), data_(std::move(data)) {
    if (static_cast<long long>(data_.size()) != s.size())
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + s.str());
  }

  const Shape4& shape() const { return shape_; }
  long long size() const { return shape_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  long long index(int n, int c, int h, int w) const {
    return ((1LL * n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  double& operator[](long long i) { return data_[i]; }
  double operator[](long long i) const { return data_[i]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

 private:
  static size_t checked_size(const Shape4& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw std::invalid_argument("Tensor: negative dimension " + s.str());
    return static_cast<size_t>(s.size());
  }

  Shape4 shape_{};
  std::vector<double> data_;
};

// Per-pixel class labels, one byte per pixel, (N,H,W).
struct LabelMap {
  int n = 0, h = 0, w = 0;
  std::vector<uint8_t> v;

  LabelMap() = default;
  LabelMap(int n_, int h_, int w_) : n(n_), h(h_), w(w_), v(1LL * n_ * h_ * w_, 0) {}

  uint8_t& at(int ni, int hi, int wi) { return v[(1LL * ni * h + hi) * w + wi]; }
  uint8_t at(int ni, int hi, int wi) const { return v[(1LL * ni * h + hi) * w + wi]; }
  bool operator==(const LabelMap&) const = default;
};

// Quarter-turn rotations, counter-clockwise, applied to the spatial axes.
// k is the number of 90-degree steps (0..3). 90/270 require h == w upstream
// when shape stability matters; this helper itself handles any sizes.
Tensor rot90(const Tensor& t, int k);
LabelMap rot90(const LabelMap& m, int k);

}  // namespace waferseg
