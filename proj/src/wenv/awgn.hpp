#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace wenv {

struct UnnormalizedFrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SymbolFrame {
  std::vector<double> s;
  bool normalized = false;
};

/// Scales the frame to unit mean-square magnitude and marks it normalized.
SymbolFrame normalize_power(SymbolFrame frame);

/// y = x + n with per-component noise variance 10^(-snr_db/10) (unit signal
/// power assumed). snr_db = +infinity is the noiseless sentinel.
/// Requires a normalized frame.
SymbolFrame awgn_channel(const SymbolFrame& frame, double snr_db, uint64_t seed);

}  // namespace wenv
