#include "ssm/scan.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace ssm {

namespace {

void check_state(const ScanInputs& in, const ScanState& h0) {
  if (h0.D != in.D || h0.N != in.N ||
      h0.h.size() != static_cast<size_t>(in.D * in.N))
    throw std::invalid_argument("scan: state shape mismatch");
}

void emit_outputs(const ScanInputs& in, const double* htraj, ScanResult& out) {
  const int64_t L = in.L, D = in.D, N = in.N;
  out.y.assign(L * D, 0.0);
  for (int64_t t = 0; t < L; ++t) {
    const double* ct = in.c_seq.data() + t * N;
    const double* ht = htraj + t * D * N;
    double* yt = out.y.data() + t * D;
    for (int64_t d = 0; d < D; ++d) {
      double acc = 0;
      const double* hd = ht + d * N;
      for (int64_t n = 0; n < N; ++n) acc += ct[n] * hd[n];
      yt[d] = acc;
    }
  }
}

// In-place inclusive prefix composition of affine maps over `n` steps,
// vectorized across M lanes. a/b are (n, M) row-major. Recursion on pairs
// keeps total combines <= ~2n per lane for arbitrary n.
void prefix_affine(double* a, double* b, int64_t n, int64_t M, int64_t& combines,
                   double* arena) {
  if (n <= 1) return;
  int64_t half = n / 2;
  double* za = arena;
  double* zb = arena + half * M;
  for (int64_t i = 0; i < half; ++i) {
    const double* a0 = a + (2 * i) * M;
    const double* b0 = b + (2 * i) * M;
    const double* a1 = a + (2 * i + 1) * M;
    const double* b1 = b + (2 * i + 1) * M;
    double* pa = za + i * M;
    double* pb = zb + i * M;
    for (int64_t m = 0; m < M; ++m) {
      pa[m] = a1[m] * a0[m];
      pb[m] = a1[m] * b0[m] + b1[m];
    }
  }
  combines += half * M;
  prefix_affine(za, zb, half, M, combines, arena + 2 * half * M);
  for (int64_t i = 1; i < n; ++i) {
    double* ai = a + i * M;
    double* bi = b + i * M;
    if (i % 2 == 1) {
      std::memcpy(ai, za + (i / 2) * M, sizeof(double) * M);
      std::memcpy(bi, zb + (i / 2) * M, sizeof(double) * M);
    } else {
      const double* pa = za + (i / 2 - 1) * M;
      const double* pb = zb + (i / 2 - 1) * M;
      for (int64_t m = 0; m < M; ++m) {
        bi[m] = ai[m] * pb[m] + bi[m];
        ai[m] = ai[m] * pa[m];
      }
      combines += M;
    }
  }
}

}  // namespace

void discretize(const double* a_eff, const double* delta, const double* b, int64_t L, int64_t D,
                int64_t N, std::vector<double>& abar, std::vector<double>& bbar) {
  abar.assign(L * D * N, 0.0);
  bbar.assign(L * D * N, 0.0);
  for (int64_t t = 0; t < L; ++t) {
    for (int64_t d = 0; d < D; ++d) {
      double dt = delta[t * D + d];
      if (!(dt > 0))
        throw NonpositiveDeltaError("discretize: delta must be > 0, got " + std::to_string(dt) +
                                    " at (t=" + std::to_string(t) + ", d=" + std::to_string(d) +
                                    ")");
      const double* ad = a_eff + d * N;
      double* at = abar.data() + (t * D + d) * N;
      double* bt = bbar.data() + (t * D + d) * N;
      for (int64_t n = 0; n < N; ++n) {
        at[n] = std::exp(dt * ad[n]);
        bt[n] = dt * b[t * N + n];
      }
    }
  }
}

ScanInputs make_scan_inputs(const std::vector<double>& a_eff, const std::vector<double>& delta,
                            const std::vector<double>& b, const std::vector<double>& c,
                            const std::vector<double>& x, int64_t L, int64_t D, int64_t N) {
  if (a_eff.size() != static_cast<size_t>(D * N) || delta.size() != static_cast<size_t>(L * D) ||
      b.size() != static_cast<size_t>(L * N) || c.size() != static_cast<size_t>(L * N) ||
      x.size() != static_cast<size_t>(L * D))
    throw std::invalid_argument("make_scan_inputs: buffer sizes do not match (L,D,N)");
  ScanInputs in;
  in.L = L;
  in.D = D;
  in.N = N;
  in.c_seq = c;
  in.x_seq = x;
  discretize(a_eff.data(), delta.data(), b.data(), L, D, N, in.abar, in.bbar);
  return in;
}

ScanResult scan_sequential(const ScanInputs& in, const ScanState& h0, ScanStats* stats) {
  check_state(in, h0);
  const int64_t L = in.L, D = in.D, N = in.N;
  ScanResult out;
  out.y.assign(L * D, 0.0);
  std::vector<double> h = h0.h;
  for (int64_t t = 0; t < L; ++t) {
    const double* at = in.abar.data() + t * D * N;
    const double* bt = in.bbar.data() + t * D * N;
    const double* ct = in.c_seq.data() + t * N;
    const double* xt = in.x_seq.data() + t * D;
    double* yt = out.y.data() + t * D;
    for (int64_t d = 0; d < D; ++d) {
      double* hd = h.data() + d * N;
      double x = xt[d];
      double acc = 0;
      for (int64_t n = 0; n < N; ++n) {
        hd[n] = at[d * N + n] * hd[n] + bt[d * N + n] * x;
        acc += ct[n] * hd[n];
      }
      yt[d] = acc;
    }
  }
  if (stats) stats->combines += L * D * N;
  out.final_state = {D, N, std::move(h), h0.t + L};
  return out;
}

ScanResult scan_parallel(const ScanInputs& in, const ScanState& h0, ScanStats* stats) {
  check_state(in, h0);
  const int64_t L = in.L, D = in.D, N = in.N, M = D * N;
  // Affine elements per step: (a, b) with b already folded with x_t.
  std::vector<double> a(in.abar);
  std::vector<double> b(L * M);
  for (int64_t t = 0; t < L; ++t)
    for (int64_t d = 0; d < D; ++d) {
      double x = in.x_seq[t * D + d];
      const double* bb = in.bbar.data() + (t * D + d) * N;
      double* pb = b.data() + (t * D + d) * N;
      for (int64_t n = 0; n < N; ++n) pb[n] = bb[n] * x;
    }
  int64_t combines = 0;
  // levels use half, quarter, ... of (L*M) pairs; 2*L*M covers the recursion
  std::vector<double> arena(2 * L * M);
  prefix_affine(a.data(), b.data(), L, M, combines, arena.data());
  if (stats) stats->combines += combines;
  // h_t = a'_t * h0 + b'_t
  bool zero_state = true;
  for (double v : h0.h)
    if (v != 0.0) {
      zero_state = false;
      break;
    }
  std::vector<double> htraj;
  const double* hsrc;
  if (zero_state) {
    hsrc = b.data();
  } else {
    htraj.assign(L * M, 0.0);
    for (int64_t t = 0; t < L; ++t)
      for (int64_t m = 0; m < M; ++m)
        htraj[t * M + m] = a[t * M + m] * h0.h[m] + b[t * M + m];
    hsrc = htraj.data();
  }
  ScanResult out;
  emit_outputs(in, hsrc, out);
  out.final_state =
      ScanState{D, N, std::vector<double>(hsrc + (L - 1) * M, hsrc + L * M), h0.t + L};
  if (L == 0) out.final_state = h0;
  return out;
}

ScanInputs insert_null_step(const ScanInputs& in, int64_t pos) {
  if (pos < 0 || pos > in.L) throw std::invalid_argument("insert_null_step: bad position");
  const int64_t D = in.D, N = in.N, M = D * N;
  ScanInputs out;
  out.L = in.L + 1;
  out.D = D;
  out.N = N;
  auto insert_block = [&](const std::vector<double>& src, int64_t width, double fill) {
    std::vector<double> dst;
    dst.reserve(src.size() + width);
    dst.insert(dst.end(), src.begin(), src.begin() + pos * width);
    dst.insert(dst.end(), width, fill);
    dst.insert(dst.end(), src.begin() + pos * width, src.end());
    return dst;
  };
  out.abar = insert_block(in.abar, M, 1.0);
  out.bbar = insert_block(in.bbar, M, 0.0);
  out.c_seq = insert_block(in.c_seq, N, 0.0);
  out.x_seq = insert_block(in.x_seq, D, 0.0);
  return out;
}

}  // namespace ssm
