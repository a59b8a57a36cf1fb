#include "wenv/miso.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace wenv {

void NetworkConfig::validate() const {
  if (users < 1 || antennas < 1)
    throw std::invalid_argument("network config: users and antennas must be >= 1");
  if (p_max <= 0 || noise_power <= 0 || p_circuit < 0)
    throw std::invalid_argument("network config: p_max > 0, noise > 0, p_circuit >= 0 required");
}

double ChannelRealization::norm_sq(int64_t k) const {
  double s = 0;
  for (int64_t a = 0; a < Nt; ++a)
    s += re[k * Nt + a] * re[k * Nt + a] + im[k * Nt + a] * im[k * Nt + a];
  return s;
}

double BeamformingDecision::total_power() const {
  double s = 0;
  for (size_t i = 0; i < re.size(); ++i) s += re[i] * re[i] + im[i] * im[i];
  return s;
}

ChannelRealization sample_channel(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  ChannelRealization h;
  h.K = cfg.users;
  h.Nt = cfg.antennas;
  h.seed = seed;
  h.re.resize(h.K * h.Nt);
  h.im.resize(h.K * h.Nt);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(2.0));  // unit complex variance
  for (size_t i = 0; i < h.re.size(); ++i) {
    h.re[i] = g(rng);
    h.im[i] = g(rng);
  }
  return h;
}

ChannelRealization perturb_csi(const ChannelRealization& h, const NetworkConfig& cfg,
                               uint64_t seed) {
  if (cfg.csi_noise_var <= 0) return h;
  ChannelRealization out = h;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> g(0.0, std::sqrt(cfg.csi_noise_var / 2.0));
  for (size_t i = 0; i < out.re.size(); ++i) {
    out.re[i] += g(rng);
    out.im[i] += g(rng);
  }
  return out;
}

EeResult energy_efficiency(const ChannelRealization& h, const BeamformingDecision& w,
                           const NetworkConfig& cfg) {
  if (h.K != w.K || h.Nt != w.Nt)
    throw std::invalid_argument("energy_efficiency: channel/beamformer size mismatch");
  EeResult r;
  r.tx_power = w.total_power();
  if (r.tx_power > cfg.p_max + 1e-9)
    throw InfeasiblePowerError("beamforming power " + std::to_string(r.tx_power) +
                               " exceeds budget " + std::to_string(cfg.p_max));
  const int64_t K = h.K, Nt = h.Nt;
  r.rates.resize(K);
  r.sinr.resize(K);
  double sum_rate = 0;
  for (int64_t k = 0; k < K; ++k) {
    double sig = 0, interf = 0;
    for (int64_t j = 0; j < K; ++j) {
      std::complex<double> dot = 0;
      for (int64_t a = 0; a < Nt; ++a) dot += std::conj(h.at(k, a)) * w.at(j, a);
      double p = std::norm(dot);
      if (j == k)
        sig = p;
      else
        interf += p;
    }
    r.sinr[k] = sig / (interf + cfg.noise_power);
    r.rates[k] = std::log2(1.0 + r.sinr[k]);
    sum_rate += r.rates[k];
  }
  r.ee = sum_rate / (r.tx_power + cfg.p_circuit);
  return r;
}

BeamformingDecision mrt_equal_power(const ChannelRealization& h, const NetworkConfig& cfg) {
  BeamformingDecision w;
  w.K = h.K;
  w.Nt = h.Nt;
  w.re.assign(h.K * h.Nt, 0.0);
  w.im.assign(h.K * h.Nt, 0.0);
  double per_user = cfg.p_max / static_cast<double>(h.K);
  for (int64_t k = 0; k < h.K; ++k) {
    double nrm = std::sqrt(h.norm_sq(k));
    if (nrm == 0) continue;
    double s = std::sqrt(per_user) / nrm;
    for (int64_t a = 0; a < h.Nt; ++a) {
      w.re[k * h.Nt + a] = s * h.re[k * h.Nt + a];
      w.im[k * h.Nt + a] = s * h.im[k * h.Nt + a];
    }
  }
  return w;
}

namespace {
void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
void put_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}
double get_f64(std::istream& is) {
  uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}
}  // namespace

void save_channels(const std::string& path, const std::vector<ChannelRealization>& hs) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open channel file for write: " + path);
  for (const auto& h : hs) {
    put_u64(os, h.seed);
    put_u32(os, static_cast<uint32_t>(h.K));
    put_u32(os, static_cast<uint32_t>(h.Nt));
    for (size_t i = 0; i < h.re.size(); ++i) {
      put_f64(os, h.re[i]);
      put_f64(os, h.im[i]);
    }
  }
}

std::vector<ChannelRealization> load_channels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open channel file: " + path);
  std::vector<ChannelRealization> out;
  while (true) {
    uint64_t seed = get_u64(is);
    if (!is) break;
    ChannelRealization h;
    h.seed = seed;
    h.K = get_u32(is);
    h.Nt = get_u32(is);
    if (!is || h.K <= 0 || h.Nt <= 0) throw std::runtime_error("corrupt channel file: " + path);
    h.re.resize(h.K * h.Nt);
    h.im.resize(h.K * h.Nt);
    for (int64_t i = 0; i < h.K * h.Nt; ++i) {
      h.re[i] = get_f64(is);
      h.im[i] = get_f64(is);
    }
    if (!is) throw std::runtime_error("truncated channel file: " + path);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace wenv
