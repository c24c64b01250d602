#pragma once

#include <string>
#include <utility>

#include "subens/config.hpp"
#include "subens/model.hpp"

namespace subens::cli {

inline constexpr int kCheckpointVersion = 1;

// Directory layout: manifest.json (format version, init scheme, seed, config
// snapshot, tensor name -> shape) plus one little-endian float32 blob per
// tensor. Training stays in 64-bit; checkpoints downcast to 32-bit.
void save_checkpoint(const model::ModelParams& params, const ExperimentConfig& cfg,
                     const std::string& dir);

std::pair<model::ModelParams, ExperimentConfig> load_checkpoint(const std::string& dir);

}  // namespace subens::cli
