#include "ad/module.hpp"

namespace ad {

Tensor& ParamStore::ensure(const std::string& name, Tensor init) {
  auto it = params.find(name);
  if (it == params.end()) it = params.emplace(name, std::move(init)).first;
  return it->second;
}

Tensor Bound::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Tensor t = tape_.leaf(store_.at(name));
  bound_.emplace(name, t);
  return t;
}

std::map<std::string, Tensor> Bound::grads_by_name(const GradMap& grads) const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, tensor] : bound_) {
    auto it = grads.find(tensor.node());
    if (it != grads.end()) out[name] = it->second;
  }
  return out;
}

Tensor randn(Rng& rng, Shape shape, double stddev) {
  std::normal_distribution<double> d(0.0, stddev);
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = d(rng);
  return t;
}

Tensor rand_uniform(Rng& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = d(rng);
  return t;
}

Tensor glorot(Rng& rng, int64_t fan_in, int64_t fan_out) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rand_uniform(rng, {fan_in, fan_out}, -limit, limit);
}

}  // namespace ad
