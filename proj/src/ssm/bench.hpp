#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssm {

struct BenchRow {
  std::string impl;  // scan-seq | scan-par | attention
  int64_t L = 0, D = 0, N = 0;
  double median_us = 0;
  double p90_us = 0;
};

/// Wall-clock medians per sequence length for both scan executions and a
/// quadratic self-attention reference layer of equal width.
/// `lengths` must be sorted ascending; `repeats` >= 1.
std::vector<BenchRow> benchmark_scan(const std::vector<int64_t>& lengths, int64_t D, int64_t N,
                                     int repeats, uint64_t seed = 1);

/// Least-squares fit y = a*x + b; returns R^2.
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y);

/// Slope of log(y) vs log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ssm
