#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsd/noise.hpp"
#include "nlsd/optim.hpp"
#include "nlsd/predictor.hpp"

namespace nlsd {

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// Binary snapshot of everything a run needs to continue: magic "NLSD",
// u32 format version, then length-prefixed sections in fixed order
// (config, params, optimizer, variances, counters). Tensors are stored as a
// shape list plus little-endian 64-bit floats; round-trips are bit-exact.
struct Checkpoint {
  PredictorConfig config;
  std::vector<Tensor> params;
  OptimizerState optimizer;
  NoiseBank bank;
  std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nlsd
