#include "wenv/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>

namespace wenv {

namespace {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

CMat channel_columns(const ChannelRealization& h) {
  CMat H(h.Nt, h.K);
  for (int64_t k = 0; k < h.K; ++k)
    for (int64_t a = 0; a < h.Nt; ++a) H(a, k) = h.at(k, a);
  return H;
}

BeamformingDecision to_decision(const CMat& W) {
  BeamformingDecision d;
  d.Nt = W.rows();
  d.K = W.cols();
  d.re.resize(d.K * d.Nt);
  d.im.resize(d.K * d.Nt);
  for (int64_t k = 0; k < d.K; ++k)
    for (int64_t a = 0; a < d.Nt; ++a) {
      d.re[k * d.Nt + a] = W(a, k).real();
      d.im[k * d.Nt + a] = W(a, k).imag();
    }
  return d;
}

struct Objective {
  double sum_rate = 0;  // bits/s/Hz
  double power = 0;
  double ee = 0;
};

Objective evaluate(const CMat& H, const CMat& W, const NetworkConfig& cfg) {
  Objective o;
  const int64_t K = H.cols();
  for (int64_t k = 0; k < K; ++k) {
    double sig = 0, interf = 0;
    for (int64_t j = 0; j < K; ++j) {
      double p = std::norm(H.col(k).dot(W.col(j)));  // h_k^H w_j
      if (j == k)
        sig = p;
      else
        interf += p;
    }
    o.sum_rate += std::log2(1.0 + sig / (interf + cfg.noise_power));
  }
  o.power = W.squaredNorm();
  o.ee = o.sum_rate / (o.power + cfg.p_circuit);
  return o;
}

double golden_max(double lo, double hi, const std::function<double(double)>& f) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, hi); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  double xm = 0.5 * (a + b);
  return std::max({f(xm), f(lo), f(hi)});
}

// Per-user direction line between MRT and the direction orthogonal to the
// other users' channels. Phases are aligned so real combinations span the
// relevant cone.
std::vector<std::pair<CVec, CVec>> direction_lines(const CMat& H) {
  const int64_t K = H.cols();
  std::vector<std::pair<CVec, CVec>> lines;
  for (int64_t k = 0; k < K; ++k) {
    CVec mrt = H.col(k).normalized();
    CVec zf;
    if (K == 1) {
      zf = mrt;
    } else {
      // project h_k onto the orthogonal complement of the other channels
      CMat others(H.rows(), K - 1);
      int64_t c = 0;
      for (int64_t j = 0; j < K; ++j)
        if (j != k) others.col(c++) = H.col(j);
      Eigen::JacobiSVD<CMat> svd(others, Eigen::ComputeThinU);
      CMat U = svd.matrixU();
      CVec proj = H.col(k);
      for (int64_t r = 0; r < U.cols(); ++r) proj -= U.col(r) * (U.col(r).dot(H.col(k)));
      double nrm = proj.norm();
      zf = nrm > 1e-12 ? CVec(proj / nrm) : mrt;
    }
    lines.emplace_back(mrt, zf);
  }
  return lines;
}

CMat beamformer_from(const std::vector<std::pair<CVec, CVec>>& lines,
                     const std::vector<double>& lambda, const std::vector<double>& power) {
  const int64_t K = lines.size();
  CMat W(lines[0].first.size(), K);
  for (int64_t k = 0; k < K; ++k) {
    CVec dir = (1.0 - lambda[k]) * lines[k].first + lambda[k] * lines[k].second;
    double nrm = dir.norm();
    if (nrm < 1e-12) dir = lines[k].first, nrm = 1.0;
    W.col(k) = dir / nrm * std::sqrt(std::max(0.0, power[k]));
  }
  return W;
}

// Enumerates an axis-aligned grid over (lambda_1..K, p_1..K) within box
// bounds, keeping the best EE with total power <= p_max.
struct GridBest {
  double ee = -1;
  std::vector<double> lambda, power;
};

void grid_pass(const CMat& H, const NetworkConfig& cfg,
               const std::vector<std::pair<CVec, CVec>>& lines,
               const std::vector<std::pair<double, double>>& lambda_box,
               const std::vector<std::pair<double, double>>& power_box, int gl, int gp,
               GridBest& best) {
  const int64_t K = H.cols();
  std::vector<double> lambda(K, 0), power(K, 0);
  std::vector<int> idx(2 * K, 0);
  auto value_at = [&](int dim, int i) {
    if (dim < K) {
      auto [lo, hi] = lambda_box[dim];
      return gl == 1 ? lo : lo + (hi - lo) * i / double(gl - 1);
    }
    auto [lo, hi] = power_box[dim - K];
    return gp == 1 ? lo : lo + (hi - lo) * i / double(gp - 1);
  };
  while (true) {
    double total_p = 0;
    for (int64_t k = 0; k < K; ++k) {
      lambda[k] = value_at(k, idx[k]);
      power[k] = value_at(K + k, idx[K + k]);
      total_p += power[k];
    }
    if (total_p <= cfg.p_max + 1e-12) {
      CMat W = beamformer_from(lines, lambda, power);
      Objective o = evaluate(H, W, cfg);
      if (o.ee > best.ee) {
        best.ee = o.ee;
        best.lambda = lambda;
        best.power = power;
      }
    }
    // odometer over all 2K dims
    int d = 2 * static_cast<int>(K) - 1;
    for (; d >= 0; --d) {
      int lim = d < K ? gl : gp;
      if (++idx[d] < lim) break;
      idx[d] = 0;
    }
    if (d < 0) break;
  }
}

CMat zf_equal_power(const CMat& H, const NetworkConfig& cfg) {
  const int64_t K = H.cols();
  CMat G = H.adjoint() * H;
  CMat W = H * G.ldlt().solve(CMat::Identity(K, K));
  for (int64_t k = 0; k < K; ++k) {
    double nrm = W.col(k).norm();
    if (nrm > 1e-12) W.col(k) *= std::sqrt(cfg.p_max / double(K)) / nrm;
  }
  return W;
}

CMat mrt_equal(const CMat& H, const NetworkConfig& cfg) {
  const int64_t K = H.cols();
  CMat W = H;
  for (int64_t k = 0; k < K; ++k) {
    double nrm = W.col(k).norm();
    if (nrm > 1e-12) W.col(k) *= std::sqrt(cfg.p_max / double(K)) / nrm;
  }
  return W;
}

// One WMMSE pass for max sum_rate(nats) - lam_reg * ||W||^2, s.t. power cap.
void wmmse_ascent(const CMat& H, const NetworkConfig& cfg, double lam_reg, int iters, CMat& W) {
  const int64_t K = H.cols(), Nt = H.rows();
  CVec u(K);
  Eigen::VectorXd v(K);
  for (int it = 0; it < iters; ++it) {
    for (int64_t k = 0; k < K; ++k) {
      double t = cfg.noise_power;
      for (int64_t j = 0; j < K; ++j) t += std::norm(H.col(k).dot(W.col(j)));
      std::complex<double> sig = H.col(k).dot(W.col(k));  // h_k^H w_k
      u(k) = sig / t;
      double e = 1.0 - std::norm(sig) / t;
      v(k) = 1.0 / std::max(e, 1e-12);
    }
    CMat M = CMat::Zero(Nt, Nt);
    for (int64_t j = 0; j < K; ++j)
      M += (v(j) * std::norm(u(j))) * (H.col(j) * H.col(j).adjoint());
    auto solve_w = [&](double mu, CMat& out) {
      CMat A = M + (lam_reg + mu) * CMat::Identity(Nt, Nt);
      Eigen::LDLT<CMat> ldlt(A);
      double p = 0;
      for (int64_t k = 0; k < K; ++k) {
        out.col(k) = ldlt.solve(H.col(k)) * (v(k) * u(k));
        p += out.col(k).squaredNorm();
      }
      return p;
    };
    CMat Wn(Nt, K);
    double p0 = solve_w(0.0, Wn);
    if (p0 > cfg.p_max) {
      double lo = 0, hi = 1.0;
      CMat tmp(Nt, K);
      while (solve_w(hi, tmp) > cfg.p_max && hi < 1e12) hi *= 2;
      for (int b = 0; b < 60; ++b) {
        double mid = 0.5 * (lo + hi);
        if (solve_w(mid, tmp) > cfg.p_max)
          lo = mid;
        else
          hi = mid;
      }
      solve_w(hi, Wn);
    }
    W = Wn;
  }
}

OracleResult dinkelbach_from(const CMat& H, const NetworkConfig& cfg, const OracleOptions& opts,
                             CMat W) {
  constexpr double kLn2 = 0.6931471805599453;
  Objective o = evaluate(H, W, cfg);
  double lambda = o.ee;
  for (int it = 0; it < opts.dinkelbach_iters; ++it) {
    wmmse_ascent(H, cfg, std::max(lambda, 1e-6) * kLn2, opts.wmmse_iters, W);
    o = evaluate(H, W, cfg);
    double f = o.sum_rate - lambda * (o.power + cfg.p_circuit);
    lambda = o.ee;
    if (std::abs(f) < 1e-9) break;
  }
  OracleResult r;
  r.w = to_decision(W);
  r.ee = o.ee;
  r.path = "dinkelbach-wmmse";
  return r;
}

}  // namespace

double k1_optimal_ee_golden(const ChannelRealization& h, const NetworkConfig& cfg) {
  if (h.K != 1) throw std::invalid_argument("k1_optimal_ee_golden: needs K=1");
  double gain = h.norm_sq(0) / cfg.noise_power;
  auto f = [&](double p) { return std::log2(1.0 + p * gain) / (p + cfg.p_circuit); };
  return golden_max(0.0, cfg.p_max, f);
}

OracleResult oracle_exhaustive(const ChannelRealization& h, const NetworkConfig& cfg,
                               const OracleOptions& opts) {
  cfg.validate();
  if (h.K > opts.exhaustive_limit)
    throw OracleLimitError("exhaustive oracle limited to K <= " +
                           std::to_string(opts.exhaustive_limit) + ", got K = " +
                           std::to_string(h.K));
  CMat H = channel_columns(h);
  auto lines = direction_lines(H);
  const int64_t K = h.K;

  std::vector<std::pair<double, double>> lambda_box(K, {0.0, 1.0});
  std::vector<std::pair<double, double>> power_box(K, {0.0, cfg.p_max});
  GridBest best;
  int gl = K == 1 ? 1 : opts.direction_grid;
  grid_pass(H, cfg, lines, lambda_box, power_box, gl, opts.power_grid, best);
  for (int round = 0; round < opts.refine_rounds; ++round) {
    for (int64_t k = 0; k < K; ++k) {
      double lw = (lambda_box[k].second - lambda_box[k].first) * opts.refine_shrink;
      double pw = (power_box[k].second - power_box[k].first) * opts.refine_shrink;
      lambda_box[k] = {std::max(0.0, best.lambda[k] - lw), std::min(1.0, best.lambda[k] + lw)};
      power_box[k] = {std::max(0.0, best.power[k] - pw), std::min(cfg.p_max, best.power[k] + pw)};
    }
    grid_pass(H, cfg, lines, lambda_box, power_box, gl, opts.power_grid, best);
  }
  OracleResult r;
  r.w = to_decision(beamformer_from(lines, best.lambda, best.power));
  r.ee = best.ee;
  r.path = "exhaustive";
  return r;
}

OracleResult oracle_dinkelbach_wmmse(const ChannelRealization& h, const NetworkConfig& cfg,
                                     const OracleOptions& opts) {
  cfg.validate();
  CMat H = channel_columns(h);
  OracleResult a = dinkelbach_from(H, cfg, opts, mrt_equal(H, cfg));
  OracleResult b = dinkelbach_from(H, cfg, opts, zf_equal_power(H, cfg));
  return a.ee >= b.ee ? a : b;
}

OracleResult oracle_beamforming(const ChannelRealization& h, const NetworkConfig& cfg,
                                const OracleOptions& opts) {
  OracleResult iter = oracle_dinkelbach_wmmse(h, cfg, opts);
  if (h.K <= opts.exhaustive_limit) {
    OracleResult grid = oracle_exhaustive(h, cfg, opts);
    if (grid.ee > iter.ee) return grid;
  }
  return iter;
}

}  // namespace wenv
