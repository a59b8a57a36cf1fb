#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "ad/module.hpp"
#include "ad/tensor.hpp"

namespace ad {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingGradientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update. Every parameter must have a finite gradient entry.
  void step(ParamStore& params, const std::map<std::string, Tensor>& grads);

  int64_t steps() const { return step_; }
  AdamConfig& config() { return cfg_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::map<std::string, Moments> state_;
  int64_t step_ = 0;
};

}  // namespace ad
