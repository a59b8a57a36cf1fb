#pragma once

#include "wenv/miso.hpp"

namespace wenv {

struct OracleLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleOptions {
  int64_t exhaustive_limit = 4;  // user cap for the grid path
  int direction_grid = 9;        // grid points per direction coefficient
  int power_grid = 9;            // grid points per power coordinate
  int refine_rounds = 5;         // local re-grids around the incumbent
  double refine_shrink = 0.3;
  int dinkelbach_iters = 30;
  int wmmse_iters = 60;
  double tol = 1e-10;
};

struct OracleResult {
  BeamformingDecision w;
  double ee = 0;
  std::string path;  // "exhaustive" | "dinkelbach-wmmse" | "max(...)"
};

/// K=1 reference: MRT direction, transmit power from golden-section search of
/// log2(1+p*|h|^2/sigma^2)/(p+Pc) — the unique quasiconcave maximizer.
double k1_optimal_ee_golden(const ChannelRealization& h, const NetworkConfig& cfg);

/// Grid search over w_k = sqrt(p_k) * normalize(combination of channel
/// vectors) with deterministic coarse-to-fine refinement. Complete (to grid
/// resolution) for K <= 2 via the MRT/ZF direction line; K in {3,4} searches
/// the same per-user line, which is a deterministic approximation.
OracleResult oracle_exhaustive(const ChannelRealization& h, const NetworkConfig& cfg,
                               const OracleOptions& opts = {});

/// Dinkelbach outer loop on the EE ratio with an inner WMMSE ascent for the
/// subtractive subproblem; returns a stationary point. Any K.
OracleResult oracle_dinkelbach_wmmse(const ChannelRealization& h, const NetworkConfig& cfg,
                                     const OracleOptions& opts = {});

/// Best of both paths (exhaustive only when K <= opts.exhaustive_limit).
OracleResult oracle_beamforming(const ChannelRealization& h, const NetworkConfig& cfg,
                                const OracleOptions& opts = {});

}  // namespace wenv
