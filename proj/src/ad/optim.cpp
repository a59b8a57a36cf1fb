#include "ad/optim.hpp"

#include <cmath>

namespace ad {

void Adam::step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
  if (cfg_.lr <= 0) throw std::invalid_argument("adam: learning rate must be > 0");
  step_ += 1;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params.params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw MissingGradientError("adam: no gradient for parameter '" + name + "'");
    const Tensor& g = git->second;
    if (g.shape() != p.shape())
      throw ShapeError("adam: gradient shape " + shape_str(g.shape()) +
                       " mismatches parameter '" + name + "' " + shape_str(p.shape()));
    if (!all_finite(g))
      throw DivergenceError("adam: non-finite gradient for parameter '" + name + "'");
    auto sit = state_.find(name);
    if (sit == state_.end())
      sit = state_.emplace(name, Moments{Tensor::zeros(p.shape()), Tensor::zeros(p.shape())})
                .first;
    double* pm = sit->second.m.data();
    double* pv = sit->second.v.data();
    double* pp = p.data();
    const double* pg = g.data();
    for (int64_t i = 0; i < p.size(); ++i) {
      pm[i] = cfg_.beta1 * pm[i] + (1.0 - cfg_.beta1) * pg[i];
      pv[i] = cfg_.beta2 * pv[i] + (1.0 - cfg_.beta2) * pg[i] * pg[i];
      double mhat = pm[i] / bc1;
      double vhat = pv[i] / bc2;
      pp[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace ad
