#pragma once

// Shared helpers for the unit tests: random tensor construction and the
// central finite-difference harness used by the gradient checks.

#include <cmath>
#include <functional>
#include <string>

#include "waferseg/autodiff.hpp"
#include "waferseg/rng.hpp"
#include "waferseg/tensor.hpp"

namespace testsupport {

inline waferseg::Tensor random_tensor(waferseg::Shape4 s, waferseg::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  waferseg::Tensor t(s);
  for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

struct FdReport {
  double maxRelErr = 0;
  long long checked = 0;
  long long worstIndex = -1;
};

// Central finite differences of a scalar-valued function with respect to one
// leaf tensor, compared against the gradient autodiff left in `leaf`. The
// scalar function must rebuild the graph from current leaf values on every
// call. `indices` limits the probe to a subset (empty: every element).
inline FdReport finite_difference_check(const waferseg::Var& leaf,
                                        const std::function<double()>& scalar,
                                        const std::function<double(long long)>& analytic,
                                        const std::vector<long long>& indices, double h = 1e-5) {
  FdReport rep;
  std::vector<long long> probe = indices;
  if (probe.empty())
    for (long long i = 0; i < leaf->value.size(); ++i) probe.push_back(i);
  for (long long i : probe) {
    const double keep = leaf->value[i];
    leaf->value[i] = keep + h;
    const double up = scalar();
    leaf->value[i] = keep - h;
    const double down = scalar();
    leaf->value[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double exact = analytic(i);
    const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-8});
    const double rel = std::abs(numeric - exact) / denom;
    if (rel > rep.maxRelErr) {
      rep.maxRelErr = rel;
      rep.worstIndex = i;
    }
    ++rep.checked;
  }
  return rep;
}

}  // namespace testsupport
