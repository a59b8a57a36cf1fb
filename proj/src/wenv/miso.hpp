#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wenv {

struct InfeasiblePowerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetworkConfig {
  int64_t users = 3;     // K
  int64_t antennas = 4;  // Nt
  double p_max = 1.0;
  double noise_power = 0.1;  // sigma^2 per user
  double p_circuit = 0.5;
  double min_rate = 0.0;       // QoS floor, 0 disables
  double csi_noise_var = 0.0;  // channel-estimation noise, 0 disables

  void validate() const;
};

/// Downlink channel, K users x Nt antennas, stored as paired re/im.
struct ChannelRealization {
  int64_t K = 0, Nt = 0;
  std::vector<double> re, im;  // row-major (K,Nt)
  uint64_t seed = 0;

  std::complex<double> at(int64_t k, int64_t a) const {
    return {re[k * Nt + a], im[k * Nt + a]};
  }
  double norm_sq(int64_t k) const;
};

/// Per-user beamforming vectors, rows w_k.
struct BeamformingDecision {
  int64_t K = 0, Nt = 0;
  std::vector<double> re, im;  // row-major (K,Nt)

  std::complex<double> at(int64_t k, int64_t a) const {
    return {re[k * Nt + a], im[k * Nt + a]};
  }
  double total_power() const;
};

/// i.i.d. circularly symmetric complex Gaussian entries, unit variance,
/// reproducible from (config, seed).
ChannelRealization sample_channel(const NetworkConfig& cfg, uint64_t seed);

/// Additive Gaussian channel-estimation noise of variance cfg.csi_noise_var.
ChannelRealization perturb_csi(const ChannelRealization& h, const NetworkConfig& cfg,
                               uint64_t seed);

struct EeResult {
  double ee = 0;
  std::vector<double> rates;  // bits/s/Hz per user
  std::vector<double> sinr;
  double tx_power = 0;
};

/// SINR_k = |h_k^H w_k|^2 / (sum_{j!=k} |h_k^H w_j|^2 + sigma^2),
/// rate_k = log2(1+SINR_k), EE = sum rates / (tx power + circuit power).
/// Throws InfeasiblePowerError when the budget is exceeded beyond 1e-9.
EeResult energy_efficiency(const ChannelRealization& h, const BeamformingDecision& w,
                           const NetworkConfig& cfg);

/// Maximum ratio transmission with the budget split equally across users.
BeamformingDecision mrt_equal_power(const ChannelRealization& h, const NetworkConfig& cfg);

/// Channel dataset file: per record (u64 seed, u32 K, u32 Nt, K*Nt interleaved
/// re/im f64), all little-endian.
void save_channels(const std::string& path, const std::vector<ChannelRealization>& hs);
std::vector<ChannelRealization> load_channels(const std::string& path);

}  // namespace wenv
