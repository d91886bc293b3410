#include "waferseg/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>

namespace waferseg {

namespace {
// Value-only graphs (inference, or no grad-requiring inputs) drop their edges
// so intermediate tensors are freed as soon as the caller lets go of them.
waferseg::Var finalize(waferseg::Var node) {
  if (!node->backprop) node->parents.clear();
  return node;
}
}  // namespace


namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

bool any_requires(const std::vector<Var>& parents) {
  for (const auto& p : parents)
    if (p->requires_grad) return true;
  return false;
}

// Cap on the transient im2col buffer (in doubles); large images are processed
// in output-row blocks so memory stays bounded.
constexpr long long kColCap = 4LL << 20;

// Fill `col` (K x (oh1-oh0)*outW, row-major) with the receptive fields of
// output rows [oh0, oh1). Row order is (c, kh, kw), matching the flattened
// weight layout (outC, inC, kH, kW).
void im2col_rows(const double* in, int inC, int H, int W, int kH, int kW, int pad, int outW,
                 int oh0, int oh1, double* col) {
  const long long P = 1LL * (oh1 - oh0) * outW;
  for (int c = 0; c < inC; ++c)
    for (int kh = 0; kh < kH; ++kh)
      for (int kw = 0; kw < kW; ++kw) {
        double* row = col + (1LL * (c * kH + kh) * kW + kw) * P;
        const int lo = std::max(0, pad - kw);
        const int hi = std::min(outW, W - kw + pad);
        for (int oh = oh0; oh < oh1; ++oh) {
          double* dst = row + 1LL * (oh - oh0) * outW;
          const int ih = oh + kh - pad;
          if (ih < 0 || ih >= H || lo >= hi) {
            std::memset(dst, 0, sizeof(double) * outW);
            continue;
          }
          if (lo > 0) std::memset(dst, 0, sizeof(double) * lo);
          if (hi < outW) std::memset(dst + hi, 0, sizeof(double) * (outW - hi));
          const double* src = in + (1LL * c * H + ih) * W + (lo + kw - pad);
          std::memcpy(dst + lo, src, sizeof(double) * (hi - lo));
        }
      }
}

// Scatter-add the columns of `col` back into the input gradient.
void col2im_rows(const double* col, int inC, int H, int W, int kH, int kW, int pad, int outW,
                 int oh0, int oh1, double* din) {
  const long long P = 1LL * (oh1 - oh0) * outW;
  for (int c = 0; c < inC; ++c)
    for (int kh = 0; kh < kH; ++kh)
      for (int kw = 0; kw < kW; ++kw) {
        const double* row = col + (1LL * (c * kH + kh) * kW + kw) * P;
        const int lo = std::max(0, pad - kw);
        const int hi = std::min(outW, W - kw + pad);
        if (lo >= hi) continue;
        for (int oh = oh0; oh < oh1; ++oh) {
          const int ih = oh + kh - pad;
          if (ih < 0 || ih >= H) continue;
          const double* src = row + 1LL * (oh - oh0) * outW;
          double* dst = din + (1LL * c * H + ih) * W + (lo + kw - pad);
          for (int ow = lo; ow < hi; ++ow) dst[ow - lo] += src[ow];
        }
      }
}

int block_rows(long long K, int outW) {
  long long r = std::max(1LL, kColCap / std::max(1LL, K * outW));
  return static_cast<int>(std::min<long long>(r, 1 << 20));
}

}  // namespace

Var conv2d(const Var& input, const Var& weights, const Var& bias, int pad) {
  const Shape4 xs = input->value.shape();
  const Shape4 ws = weights->value.shape();
  const int outC = ws.n, inC = ws.c, kH = ws.h, kW = ws.w;
  if (xs.c != inC)
    throw std::invalid_argument("conv2d: input channels " + std::to_string(xs.c) +
                                " do not match kernel input channels " + std::to_string(inC) +
                                " (input " + xs.str() + ", weights " + ws.str() + ")");
  if (bias->value.shape() != Shape4{outC, 1, 1, 1} && bias->value.shape() != Shape4{1, outC, 1, 1})
    throw std::invalid_argument("conv2d: bias shape " + bias->value.shape().str() +
                                " does not match outC=" + std::to_string(outC));
  const int outH = xs.h + 2 * pad - kH + 1;
  const int outW = xs.w + 2 * pad - kW + 1;
  if (outH < 1 || outW < 1)
    throw std::invalid_argument("conv2d: output would be empty for input " + xs.str());

  const long long K = 1LL * inC * kH * kW;
  const int brows = block_rows(K, outW);

  Tensor out(Shape4{xs.n, outC, outH, outW});
  std::vector<double> colbuf(static_cast<size_t>(K) * brows * outW);
  CMapRM wmat(weights->value.data(), outC, K);

  for (int n = 0; n < xs.n; ++n) {
    const double* in = input->value.data() + input->value.index(n, 0, 0, 0);
    for (int oh0 = 0; oh0 < outH; oh0 += brows) {
      const int oh1 = std::min(outH, oh0 + brows);
      const long long P = 1LL * (oh1 - oh0) * outW;
      im2col_rows(in, inC, xs.h, xs.w, kH, kW, pad, outW, oh0, oh1, colbuf.data());
      CMapRM col(colbuf.data(), K, P);
      MapRM omat(out.data() + out.index(n, 0, 0, 0) + 1LL * 0 * outH * outW, outC,
                 1LL * outH * outW);
      // write into the column slice [oh0*outW, oh1*outW)
      omat.middleCols(1LL * oh0 * outW, P).noalias() = wmat * col;
    }
    for (int oc = 0; oc < outC; ++oc) {
      double* dst = out.data() + out.index(n, oc, 0, 0);
      const double b = bias->value[oc];
      for (long long i = 0; i < 1LL * outH * outW; ++i) dst[i] += b;
    }
  }

  auto node = make_var(std::move(out));
  node->parents = {input, weights, bias};
  node->requires_grad = any_requires(node->parents);
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [pad](Node& self) {
      const Var& x = self.parents[0];
      const Var& w = self.parents[1];
      const Var& b = self.parents[2];
      const Shape4 xs = x->value.shape();
      const Shape4 ws = w->value.shape();
      const int outC = ws.n, inC = ws.c, kH = ws.h, kW = ws.w;
      const Shape4 os = self.value.shape();
      const long long K = 1LL * inC * kH * kW;
      const long long HW = 1LL * os.h * os.w;
      const int brows = block_rows(K, os.w);
      std::vector<double> colbuf(static_cast<size_t>(K) * brows * os.w);
      std::vector<double> dcolbuf;

      if (b->requires_grad) {
        Tensor& db = b->ensure_grad();
        for (int n = 0; n < os.n; ++n)
          for (int oc = 0; oc < outC; ++oc) {
            const double* g = self.grad.data() + self.grad.index(n, oc, 0, 0);
            double s = 0;
            for (long long i = 0; i < HW; ++i) s += g[i];
            db[oc] += s;
          }
      }
      const bool need_dw = w->requires_grad;
      const bool need_dx = x->requires_grad;
      if (!need_dw && !need_dx) return;
      if (need_dx) dcolbuf.resize(colbuf.size());
      CMapRM wmat(w->value.data(), outC, K);
      for (int n = 0; n < os.n; ++n) {
        const double* in = x->value.data() + x->value.index(n, 0, 0, 0);
        CMapRM gmat(self.grad.data() + self.grad.index(n, 0, 0, 0), outC, HW);
        for (int oh0 = 0; oh0 < os.h; oh0 += brows) {
          const int oh1 = std::min(os.h, oh0 + brows);
          const long long P = 1LL * (oh1 - oh0) * os.w;
          auto gblk = gmat.middleCols(1LL * oh0 * os.w, P);
          if (need_dw) {
            im2col_rows(in, inC, xs.h, xs.w, kH, kW, pad, os.w, oh0, oh1, colbuf.data());
            CMapRM col(colbuf.data(), K, P);
            MapRM dwmat(w->ensure_grad().data(), outC, K);
            dwmat.noalias() += gblk * col.transpose();
          }
          if (need_dx) {
            MapRM dcol(dcolbuf.data(), K, P);
            dcol.noalias() = wmat.transpose() * gblk;
            col2im_rows(dcolbuf.data(), inC, xs.h, xs.w, kH, kW, pad, os.w, oh0, oh1,
                        x->ensure_grad().data() + x->ensure_grad().index(n, 0, 0, 0));
          }
        }
      }
    };
  }
  return finalize(node);
}

Var batchnorm(const Var& input, const Var& gamma, const Var& beta, BatchNormState& state,
              bool training) {
  const Shape4 xs = input->value.shape();
  const int C = xs.c;
  const long long M = 1LL * xs.n * xs.h * xs.w;  // elements per channel
  if (gamma->value.size() != C || beta->value.size() != C)
    throw std::invalid_argument("batchnorm: gamma/beta size does not match channels " +
                                std::to_string(C));
  if (state.running_mean.size() == 0) state.running_mean = Tensor({1, C, 1, 1});
  if (state.running_var.size() == 0) state.running_var = Tensor({1, C, 1, 1});
  if (state.running_mean.size() != C || state.running_var.size() != C)
    throw std::invalid_argument("batchnorm: running statistics size mismatch");
  if (training && M < 2)
    throw std::invalid_argument("batchnorm: training mode needs N*H*W >= 2 per channel, got " +
                                std::to_string(M));

  std::vector<double> mean(C), invstd(C);
  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0;
      for (int n = 0; n < xs.n; ++n) {
        const double* p = input->value.data() + input->value.index(n, c, 0, 0);
        for (long long i = 0; i < 1LL * xs.h * xs.w; ++i) s += p[i];
      }
      const double m = s / M;
      double v = 0;
      for (int n = 0; n < xs.n; ++n) {
        const double* p = input->value.data() + input->value.index(n, c, 0, 0);
        for (long long i = 0; i < 1LL * xs.h * xs.w; ++i) {
          const double d = p[i] - m;
          v += d * d;
        }
      }
      v /= M;  // biased variance, also used for the running moment
      mean[c] = m;
      invstd[c] = 1.0 / std::sqrt(v + state.epsilon);
      state.running_mean[c] = (1 - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] = (1 - state.momentum) * state.running_var[c] + state.momentum * v;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
    }
  }

  Tensor out(xs);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < C; ++c) {
      const double* p = input->value.data() + input->value.index(n, c, 0, 0);
      double* o = out.data() + out.index(n, c, 0, 0);
      const double g = gamma->value[c], b = beta->value[c], m = mean[c], is = invstd[c];
      for (long long i = 0; i < 1LL * xs.h * xs.w; ++i) o[i] = g * (p[i] - m) * is + b;
    }

  auto node = make_var(std::move(out));
  node->parents = {input, gamma, beta};
  node->requires_grad = any_requires(node->parents);
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [mean = std::move(mean), invstd = std::move(invstd), training,
                      M](Node& self) {
      const Var& x = self.parents[0];
      const Var& gamma = self.parents[1];
      const Var& beta = self.parents[2];
      const Shape4 xs = x->value.shape();
      const long long HW = 1LL * xs.h * xs.w;
      for (int c = 0; c < xs.c; ++c) {
        const double m = mean[c], is = invstd[c], g = gamma->value[c];
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int n = 0; n < xs.n; ++n) {
          const double* dy = self.grad.data() + self.grad.index(n, c, 0, 0);
          const double* px = x->value.data() + x->value.index(n, c, 0, 0);
          for (long long i = 0; i < HW; ++i) {
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * (px[i] - m) * is;
          }
        }
        if (gamma->requires_grad) gamma->ensure_grad()[c] += sum_dy_xhat;
        if (beta->requires_grad) beta->ensure_grad()[c] += sum_dy;
        if (x->requires_grad) {
          Tensor& dx = x->ensure_grad();
          for (int n = 0; n < xs.n; ++n) {
            const double* dy = self.grad.data() + self.grad.index(n, c, 0, 0);
            const double* px = x->value.data() + x->value.index(n, c, 0, 0);
            double* d = dx.data() + dx.index(n, c, 0, 0);
            if (training) {
              const double k = g * is / M;
              for (long long i = 0; i < HW; ++i) {
                const double xhat = (px[i] - m) * is;
                d[i] += k * (M * dy[i] - sum_dy - xhat * sum_dy_xhat);
              }
            } else {
              for (long long i = 0; i < HW; ++i) d[i] += dy[i] * g * is;
            }
          }
        }
      }
    };
  }
  return finalize(node);
}

Var relu(const Var& input) {
  Tensor out(input->value.shape());
  const long long n = input->value.size();
  for (long long i = 0; i < n; ++i) out[i] = input->value[i] > 0 ? input->value[i] : 0.0;
  auto node = make_var(std::move(out));
  node->parents = {input};
  node->requires_grad = input->requires_grad;
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [](Node& self) {
      const Var& x = self.parents[0];
      Tensor& dx = x->ensure_grad();
      const long long n = x->value.size();
      // subgradient at exactly 0 is 0
      for (long long i = 0; i < n; ++i)
        if (x->value[i] > 0) dx[i] += self.grad[i];
    };
  }
  return finalize(node);
}

Var maxpool2(const Var& input) {
  const Shape4 xs = input->value.shape();
  const int outH = (xs.h + 1) / 2, outW = (xs.w + 1) / 2;
  Tensor out(Shape4{xs.n, xs.c, outH, outW});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(out.size()));
  long long oi = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int oh = 0; oh < outH; ++oh)
        for (int ow = 0; ow < outW; ++ow, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          int besti = -1;
          for (int dh = 0; dh < 2; ++dh)
            for (int dw = 0; dw < 2; ++dw) {
              const int h = 2 * oh + dh, w = 2 * ow + dw;
              if (h >= xs.h || w >= xs.w) continue;
              const double v = input->value.at(n, c, h, w);
              if (v > best) {  // strict: first-in-scan-order wins ties
                best = v;
                besti = h * xs.w + w;
              }
            }
          out[oi] = best;
          (*argmax)[oi] = besti;
        }
  auto node = make_var(std::move(out));
  node->parents = {input};
  node->requires_grad = input->requires_grad;
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [argmax](Node& self) {
      const Var& x = self.parents[0];
      Tensor& dx = x->ensure_grad();
      const Shape4 xs = x->value.shape();
      const Shape4 os = self.value.shape();
      const long long planeIn = 1LL * xs.h * xs.w, planeOut = 1LL * os.h * os.w;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          const long long obase = (1LL * n * xs.c + c) * planeOut;
          const long long ibase = (1LL * n * xs.c + c) * planeIn;
          for (long long i = 0; i < planeOut; ++i)
            dx[ibase + (*argmax)[obase + i]] += self.grad[obase + i];
        }
    };
  }
  return finalize(node);
}

namespace {
// Corner-aligned source coordinate decomposition: src = i*(in-1)/(out-1).
struct LinCoef {
  int i0, i1;
  double w1;  // weight of i1; i0 gets (1-w1)
};
std::vector<LinCoef> lin_coefs(int in, int out) {
  std::vector<LinCoef> cs(out);
  for (int i = 0; i < out; ++i) {
    double src = out == 1 ? 0.0 : 1.0 * i * (in - 1) / (out - 1);
    int i0 = static_cast<int>(std::floor(src));
    if (i0 >= in - 1) i0 = in - 2;
    if (i0 < 0) i0 = 0;
    const int i1 = std::min(i0 + 1, in - 1);
    cs[i] = {i0, i1, in == 1 ? 0.0 : src - i0};
  }
  return cs;
}
}  // namespace

Var bilinear_resize(const Var& input, int outH, int outW) {
  const Shape4 xs = input->value.shape();
  if (outH < 1 || outW < 1)
    throw std::invalid_argument("bilinear_resize: target size must be >= 1");
  auto hc = std::make_shared<std::vector<LinCoef>>(lin_coefs(xs.h, outH));
  auto wc = std::make_shared<std::vector<LinCoef>>(lin_coefs(xs.w, outW));
  Tensor out(Shape4{xs.n, xs.c, outH, outW});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const double* p = input->value.data() + input->value.index(n, c, 0, 0);
      double* o = out.data() + out.index(n, c, 0, 0);
      for (int oh = 0; oh < outH; ++oh) {
        const LinCoef& a = (*hc)[oh];
        for (int ow = 0; ow < outW; ++ow) {
          const LinCoef& b = (*wc)[ow];
          o[1LL * oh * outW + ow] =
              (1 - a.w1) * ((1 - b.w1) * p[1LL * a.i0 * xs.w + b.i0] +
                            b.w1 * p[1LL * a.i0 * xs.w + b.i1]) +
              a.w1 * ((1 - b.w1) * p[1LL * a.i1 * xs.w + b.i0] +
                      b.w1 * p[1LL * a.i1 * xs.w + b.i1]);
        }
      }
    }
  auto node = make_var(std::move(out));
  node->parents = {input};
  node->requires_grad = input->requires_grad;
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [hc, wc](Node& self) {
      const Var& x = self.parents[0];
      Tensor& dx = x->ensure_grad();
      const Shape4 xs = x->value.shape();
      const Shape4 os = self.value.shape();
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          double* d = dx.data() + dx.index(n, c, 0, 0);
          const double* g = self.grad.data() + self.grad.index(n, c, 0, 0);
          for (int oh = 0; oh < os.h; ++oh) {
            const LinCoef& a = (*hc)[oh];
            for (int ow = 0; ow < os.w; ++ow) {
              const LinCoef& b = (*wc)[ow];
              const double gv = g[1LL * oh * os.w + ow];
              d[1LL * a.i0 * xs.w + b.i0] += (1 - a.w1) * (1 - b.w1) * gv;
              d[1LL * a.i0 * xs.w + b.i1] += (1 - a.w1) * b.w1 * gv;
              d[1LL * a.i1 * xs.w + b.i0] += a.w1 * (1 - b.w1) * gv;
              d[1LL * a.i1 * xs.w + b.i1] += a.w1 * b.w1 * gv;
            }
          }
        }
    };
  }
  return finalize(node);
}

Var add(const Var& a, const Var& b) {
  if (!(a->value.shape() == b->value.shape()))
    throw std::invalid_argument("add: shape mismatch " + a->value.shape().str() + " vs " +
                                b->value.shape().str());
  Tensor out(a->value.shape());
  const long long n = out.size();
  for (long long i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
  auto node = make_var(std::move(out));
  node->parents = {a, b};
  node->requires_grad = any_requires(node->parents);
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [](Node& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        Tensor& d = p->ensure_grad();
        const long long n = d.size();
        for (long long i = 0; i < n; ++i) d[i] += self.grad[i];
      }
    };
  }
  return finalize(node);
}

Var softmax_pixelwise(const Var& input) {
  const Shape4 xs = input->value.shape();
  Tensor out(xs);
  const long long HW = 1LL * xs.h * xs.w;
  for (int n = 0; n < xs.n; ++n)
    for (long long i = 0; i < HW; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < xs.c; ++c) mx = std::max(mx, input->value[(1LL * n * xs.c + c) * HW + i]);
      double sum = 0;
      for (int c = 0; c < xs.c; ++c) {
        const double e = std::exp(input->value[(1LL * n * xs.c + c) * HW + i] - mx);
        out[(1LL * n * xs.c + c) * HW + i] = e;
        sum += e;
      }
      for (int c = 0; c < xs.c; ++c) out[(1LL * n * xs.c + c) * HW + i] /= sum;
    }
  auto node = make_var(std::move(out));
  node->parents = {input};
  node->requires_grad = input->requires_grad;
  node->is_softmax_output = true;
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [](Node& self) {
      const Var& x = self.parents[0];
      Tensor& dx = x->ensure_grad();
      const Shape4 xs = x->value.shape();
      const long long HW = 1LL * xs.h * xs.w;
      for (int n = 0; n < xs.n; ++n)
        for (long long i = 0; i < HW; ++i) {
          double dot = 0;
          for (int c = 0; c < xs.c; ++c) {
            const long long k = (1LL * n * xs.c + c) * HW + i;
            dot += self.grad[k] * self.value[k];
          }
          for (int c = 0; c < xs.c; ++c) {
            const long long k = (1LL * n * xs.c + c) * HW + i;
            dx[k] += self.value[k] * (self.grad[k] - dot);
          }
        }
    };
  }
  return finalize(node);
}

Var weighted_cross_entropy(const Var& probabilities, const Tensor& one_hot,
                           const std::array<double, 3>& class_weights) {
  const Shape4 ps = probabilities->value.shape();
  if (!(one_hot.shape() == ps))
    throw std::invalid_argument("weighted_cross_entropy: one-hot shape " + one_hot.shape().str() +
                                " does not match probabilities " + ps.str());
  if (ps.c != 3) throw std::invalid_argument("weighted_cross_entropy: expected 3 classes");
  const long long HW = 1LL * ps.h * ps.w;
  const long long pixels = 1LL * ps.n * HW;
  constexpr double kClamp = 1e-12;

  double loss = 0;
  for (int n = 0; n < ps.n; ++n)
    for (long long i = 0; i < HW; ++i)
      for (int c = 0; c < 3; ++c) {
        const long long k = (1LL * n * 3 + c) * HW + i;
        if (one_hot[k] != 0.0)
          loss += one_hot[k] * class_weights[c] *
                  -std::log(std::max(probabilities->value[k], kClamp));
      }
  loss /= pixels;

  auto node = make_var(Tensor(Shape4{1, 1, 1, 1}, {loss}));
  // Fused path: attach the analytic softmax+CE gradient w*(p-y)/P directly to
  // the logits when the probabilities came from softmax_pixelwise.
  const bool fused = probabilities->is_softmax_output && !probabilities->parents.empty();
  const Var logits = fused ? probabilities->parents[0] : nullptr;
  node->parents = {fused ? logits : probabilities};
  node->requires_grad = node->parents[0]->requires_grad;
  if (grad_enabled() && node->requires_grad) {
    node->backprop = [probabilities, one_hot, class_weights, fused, pixels, HW](Node& self) {
      const Var& target = self.parents[0];
      if (!target->requires_grad) return;
      Tensor& d = target->ensure_grad();
      const double g = self.grad[0] / pixels;
      const Shape4 ps = probabilities->value.shape();
      for (int n = 0; n < ps.n; ++n)
        for (long long i = 0; i < HW; ++i) {
          // per-pixel weight = weight of the true class
          double w = 0;
          for (int c = 0; c < 3; ++c) {
            const long long k = (1LL * n * 3 + c) * HW + i;
            if (one_hot[k] != 0.0) w += one_hot[k] * class_weights[c];
          }
          for (int c = 0; c < 3; ++c) {
            const long long k = (1LL * n * 3 + c) * HW + i;
            const double p = probabilities->value[k];
            if (fused) {
              d[k] += g * w * (p - one_hot[k]);
            } else if (one_hot[k] != 0.0) {
              d[k] += g * one_hot[k] * class_weights[c] * (-1.0 / std::max(p, 1e-12));
            }
          }
        }
    };
  }
  return finalize(node);
}

}  // namespace waferseg
