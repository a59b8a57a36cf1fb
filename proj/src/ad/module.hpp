#pragma once

#include <map>
#include <random>
#include <string>

#include "ad/tape.hpp"
#include "ad/tensor.hpp"

namespace ad {

/// Named parameter set. Ordered by name so every traversal is deterministic.
struct ParamStore {
  std::map<std::string, Tensor> params;

  Tensor& operator[](const std::string& name) { return params[name]; }
  const Tensor& at(const std::string& name) const { return params.at(name); }
  bool contains(const std::string& name) const { return params.count(name) > 0; }
  size_t size() const { return params.size(); }

  /// Registers a parameter if absent, returns it.
  Tensor& ensure(const std::string& name, Tensor init);
};

/// Per-forward binding of parameters onto a tape. Each parameter becomes a
/// leaf exactly once; after backward, `grads_by_name` resolves the map.
class Bound {
 public:
  Bound(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  /// Tracked handle for a named parameter (leaf-registered on first use).
  Tensor operator()(const std::string& name);

  std::map<std::string, Tensor> grads_by_name(const GradMap& grads) const;

  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  ParamStore& store_;
  std::map<std::string, Tensor> bound_;
};

// --- initialization ----------------------------------------------------------

using Rng = std::mt19937_64;

Tensor randn(Rng& rng, Shape shape, double stddev = 1.0);
Tensor rand_uniform(Rng& rng, Shape shape, double lo, double hi);
/// Fan-in scaled init for dense layers.
Tensor glorot(Rng& rng, int64_t fan_in, int64_t fan_out);

}  // namespace ad
