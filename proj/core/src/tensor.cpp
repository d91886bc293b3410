#include "waferseg/tensor.hpp"

#include <cmath>

namespace waferseg {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor rot90(const Tensor& t, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return t;
  const Shape4 s = t.shape();
  Shape4 os = s;
  if (k % 2 == 1) {
    os.h = s.w;
    os.w = s.h;
  }
  Tensor out(os);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
          int oh, ow;
          switch (k) {
            case 1: oh = s.w - 1 - w; ow = h; break;        // 90 CCW
            case 2: oh = s.h - 1 - h; ow = s.w - 1 - w; break;
            default: oh = w; ow = s.h - 1 - h; break;       // 270 CCW
          }
          out.at(n, c, oh, ow) = t.at(n, c, h, w);
        }
  return out;
}

LabelMap rot90(const LabelMap& m, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return m;
  LabelMap out(m.n, k % 2 == 1 ? m.w : m.h, k % 2 == 1 ? m.h : m.w);
  for (int n = 0; n < m.n; ++n)
    for (int h = 0; h < m.h; ++h)
      for (int w = 0; w < m.w; ++w) {
        int oh, ow;
        switch (k) {
          case 1: oh = m.w - 1 - w; ow = h; break;
          case 2: oh = m.h - 1 - h; ow = m.w - 1 - w; break;
          default: oh = w; ow = m.h - 1 - h; break;
        }
        out.at(n, oh, ow) = m.at(n, h, w);
      }
  return out;
}

}  // namespace waferseg
