#include "wenv/awgn.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace wenv {

SymbolFrame normalize_power(SymbolFrame frame) {
  if (frame.s.empty()) throw std::invalid_argument("normalize_power: empty frame");
  double ms = 0;
  for (double v : frame.s) ms += v * v;
  ms /= static_cast<double>(frame.s.size());
  double inv = ms > 0 ? 1.0 / std::sqrt(ms) : 0.0;
  for (double& v : frame.s) v *= inv;
  frame.normalized = true;
  return frame;
}

SymbolFrame awgn_channel(const SymbolFrame& frame, double snr_db, uint64_t seed) {
  if (!frame.normalized)
    throw UnnormalizedFrameError("awgn_channel: frame must be power-normalized");
  SymbolFrame out = frame;
  if (snr_db == std::numeric_limits<double>::infinity()) return out;
  double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  for (double& v : out.s) v += g(rng);
  out.normalized = false;
  return out;
}

}  // namespace wenv
