#pragma once

#include <string>

#include "expcli/config.hpp"

namespace expcli {

struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunResult {
  std::string out_dir;
};

/// Dispatches the configured experiment kind (beamforming | jscd | scan-bench),
/// writing CSVs, checkpoints, and a manifest into a fresh content-addressed
/// output directory. Never overwrites a previous run.
RunResult run_experiment(const Config& cfg);

/// Renders a figure from a report directory: kind in
/// {latency, bleu, scanbench, training}. Returns the SVG path.
std::string make_plot(const std::string& report_dir, const std::string& kind);

/// Quick invariant suite; prints one line per check, returns the failure count.
int selftest();

/// Worker count from EXPCLI_THREADS (>=1).
int thread_count();

}  // namespace expcli
