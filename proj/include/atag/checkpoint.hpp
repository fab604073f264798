#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atag/config.hpp"
#include "atag/model.hpp"
#include "atag/optim.hpp"

namespace atag {

// Layout: "ATAGCKPT", u32 format version, u64 header size, JSON header, then
// little-endian float64 payload: every parameter in registration order,
// followed by the Adam first and second moments when present.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  std::uint64_t config_hash = 0;
  std::size_t epoch = 0;
  std::string rng_state;  // textual mt19937_64 state
  struct TensorData {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };
  std::vector<TensorData> tensors;
  bool has_optimizer = false;
  OptimState optimizer;
};

/// Written to a temporary file and renamed into place, so an interrupted
/// write leaves any previous checkpoint intact.
void save_checkpoint(const std::filesystem::path& path, const AtagModel& model, const RunConfig& config,
                     std::size_t epoch, const OptimState* optimizer = nullptr,
                     const std::string& rng_state = {});

/// Throws FormatError on a bad magic, version, or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies parameter values into the model. Throws ConfigError when names or
/// shapes disagree.
void apply_checkpoint(const Checkpoint& ckpt, AtagModel& model);

}  // namespace atag
