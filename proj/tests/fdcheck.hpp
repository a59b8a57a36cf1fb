#pragma once

// Finite-difference gradient oracle. Independent of the reverse-mode path:
// it only re-evaluates the forward function at shifted inputs.

#include <cmath>
#include <functional>
#include <vector>

#include "ad/tensor.hpp"

namespace fd {

struct CheckResult {
  int64_t total = 0;
  int64_t rel_pass = 0;   // relative error < rel_tol
  int64_t abs_pass = 0;   // of the rel failures, absolute error < abs_tol
  double worst_rel = 0;
  bool ok(double rel_frac = 0.99) const {
    return total > 0 && rel_pass >= static_cast<int64_t>(std::ceil(rel_frac * total)) &&
           rel_pass + abs_pass == total;
  }
};

// Central finite differences of `f` (maps flattened input -> scalar) around x.
inline std::vector<double> central_diff(const std::function<double(const ad::Tensor&)>& f,
                                        const ad::Tensor& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  ad::Tensor xp = x.clone();
  for (int64_t i = 0; i < x.size(); ++i) {
    double orig = xp.data()[i];
    xp.data()[i] = orig + h;
    double fp = f(xp);
    xp.data()[i] = orig - h;
    double fm = f(xp);
    xp.data()[i] = orig;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline CheckResult compare(const std::vector<double>& analytic, const std::vector<double>& fdg,
                           double rel_tol = 1e-4, double abs_tol = 1e-6) {
  CheckResult r;
  r.total = static_cast<int64_t>(analytic.size());
  for (size_t i = 0; i < analytic.size(); ++i) {
    double a = analytic[i], b = fdg[i];
    double denom = std::max(std::abs(a), std::abs(b));
    double rel = denom > 0 ? std::abs(a - b) / denom : 0.0;
    r.worst_rel = std::max(r.worst_rel, rel);
    if (rel < rel_tol)
      r.rel_pass++;
    else if (std::abs(a - b) < abs_tol)
      r.abs_pass++;
  }
  return r;
}

}  // namespace fd
