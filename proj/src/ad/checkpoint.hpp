#pragma once

#include <string>

#include "ad/module.hpp"

namespace ad {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Binary parameter checkpoint: 4-byte magic "CKPT", version byte, then
/// (name, shape, f64 little-endian data) records. Full layout in
/// docs/checkpoint-format.md.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::string& name_prefix = "");
/// Loads records into `params` (replacing existing entries of the same name).
/// If `name_prefix` is non-empty, only records whose name starts with it load.
void load_checkpoint(const std::string& path, ParamStore& params,
                     const std::string& name_prefix = "");

}  // namespace ad
