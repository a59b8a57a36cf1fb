#include "ssm/bench.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ssm/scan.hpp"

namespace ssm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  double idx = p * (v.size() - 1);
  size_t lo = static_cast<size_t>(idx);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = idx - lo;
  return v[lo] * (1 - frac) + v[hi] * frac;
}

template <class F>
std::pair<double, double> time_us(F&& fn, int repeats) {
  fn();  // warmup
  std::vector<double> times(repeats);
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    times[r] = std::chrono::duration<double, std::micro>(t1 - t0).count();
  }
  return {percentile(times, 0.5), percentile(times, 0.9)};
}

// Single-head self-attention of width D: the quadratic reference.
struct AttentionRef {
  RowMat wq, wk, wv;
  explicit AttentionRef(int64_t D, std::mt19937_64& rng) : wq(D, D), wk(D, D), wv(D, D) {
    std::normal_distribution<double> g(0, 1.0 / std::sqrt(double(D)));
    for (auto* m : {&wq, &wk, &wv})
      for (int64_t i = 0; i < D; ++i)
        for (int64_t j = 0; j < D; ++j) (*m)(i, j) = g(rng);
  }
  void forward(const RowMat& x, RowMat& out) const {
    const int64_t L = x.rows(), D = x.cols();
    RowMat q = x * wq, k = x * wk, v = x * wv;
    RowMat s = q * k.transpose() / std::sqrt(double(D));
    for (int64_t i = 0; i < L; ++i) {
      double mx = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - mx).exp();
      s.row(i) /= s.row(i).sum();
    }
    out.noalias() = s * v;
  }
};

}  // namespace

std::vector<BenchRow> benchmark_scan(const std::vector<int64_t>& lengths, int64_t D, int64_t N,
                                     int repeats, uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("benchmark_scan: repeats must be >= 1");
  if (!std::is_sorted(lengths.begin(), lengths.end()))
    throw std::invalid_argument("benchmark_scan: lengths must be sorted ascending");
  if (lengths.empty()) throw std::invalid_argument("benchmark_scan: empty length list");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.05, 1.0);
  std::normal_distribution<double> g(0, 1);
  AttentionRef attn(D, rng);

  std::vector<BenchRow> rows;
  for (int64_t L : lengths) {
    std::vector<double> a_eff(D * N), delta(L * D), b(L * N), c(L * N), x(L * D);
    for (auto& v : a_eff) v = -u01(rng) * 2.0;
    for (auto& v : delta) v = u01(rng);
    for (auto& v : b) v = g(rng);
    for (auto& v : c) v = g(rng);
    for (auto& v : x) v = g(rng);
    ScanInputs in = make_scan_inputs(a_eff, delta, b, c, x, L, D, N);
    ScanState h0 = ScanState::zero(D, N);

    volatile double sink = 0;
    auto [med_seq, p90_seq] = time_us(
        [&] {
          auto r = scan_sequential(in, h0);
          sink = sink + r.y[0];
        },
        repeats);
    rows.push_back({"scan-seq", L, D, N, med_seq, p90_seq});

    auto [med_par, p90_par] = time_us(
        [&] {
          auto r = scan_parallel(in, h0);
          sink = sink + r.y[0];
        },
        repeats);
    rows.push_back({"scan-par", L, D, N, med_par, p90_par});

    RowMat xin(L, D);
    for (int64_t i = 0; i < L; ++i)
      for (int64_t j = 0; j < D; ++j) xin(i, j) = g(rng);
    RowMat out(L, D);
    auto [med_att, p90_att] = time_us(
        [&] {
          attn.forward(xin, out);
          sink = sink + out(0, 0);
        },
        repeats);
    rows.push_back({"attention", L, D, N, med_att, p90_att});
  }
  return rows;
}

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0, ymean = sy / n;
  for (size_t i = 0; i < n; ++i) {
    double fit = slope * x[i] + intercept;
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - ymean) * (y[i] - ymean);
  }
  return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const size_t n = lx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace ssm
