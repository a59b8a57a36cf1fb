#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ssm {

struct NonpositiveDeltaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Counts invocations of the affine combine (one per lane per combine).
struct ScanStats {
  int64_t combines = 0;
};

/// Discretized per-step scan terms for one sequence.
/// Layout is row-major: abar/bbar (L,D,N), c_seq (L,N), x_seq (L,D).
struct ScanInputs {
  int64_t L = 0, D = 0, N = 0;
  std::vector<double> abar;
  std::vector<double> bbar;
  std::vector<double> c_seq;
  std::vector<double> x_seq;
};

struct ScanState {
  int64_t D = 0, N = 0;
  std::vector<double> h;  // (D,N)
  int64_t t = 0;
  static ScanState zero(int64_t D, int64_t N) { return {D, N, std::vector<double>(D * N, 0.0), 0}; }
};

struct ScanResult {
  std::vector<double> y;  // (L,D)
  ScanState final_state;
};

/// Zero-order-hold transition with the simplified input term:
///   abar[t,d,n] = exp(delta[t,d] * a_eff[d,n]),  bbar[t,d,n] = delta[t,d] * b[t,n].
/// a_eff holds the effective (negative) continuous-time transition.
/// Throws NonpositiveDeltaError unless every delta > 0.
void discretize(const double* a_eff, const double* delta, const double* b, int64_t L, int64_t D,
                int64_t N, std::vector<double>& abar, std::vector<double>& bbar);

ScanInputs make_scan_inputs(const std::vector<double>& a_eff, const std::vector<double>& delta,
                            const std::vector<double>& b, const std::vector<double>& c,
                            const std::vector<double>& x, int64_t L, int64_t D, int64_t N);

/// Linear recurrence, one timestep at a time.
ScanResult scan_sequential(const ScanInputs& in, const ScanState& h0, ScanStats* stats = nullptr);

/// Work-efficient parallel prefix over affine-map composition. Mathematically
/// identical to scan_sequential; O(L) combines, O(log L) combining depth,
/// arbitrary (non-power-of-two) L.
ScanResult scan_parallel(const ScanInputs& in, const ScanState& h0, ScanStats* stats = nullptr);

/// Inserts a state no-op step (abar = 1, bbar = 0 — the forced delta = 0 case)
/// before position `pos`.
ScanInputs insert_null_step(const ScanInputs& in, int64_t pos);

}  // namespace ssm
