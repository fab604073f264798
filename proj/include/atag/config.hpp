#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "atag/losses.hpp"
#include "atag/model_config.hpp"
#include "atag/optim.hpp"
#include "atag/proposals.hpp"
#include "atag/tensor.hpp"

namespace atag {

// anet: videos resized to T=100, D=100. thumos: 128-snippet windows with 50%
// overlap, D=64. synthetic: desk-scale defaults, no resizing or windowing.
enum class RunMode { anet, thumos, synthetic };
std::string to_string(RunMode m);
RunMode parse_run_mode(const std::string& s);
std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

struct RunConfig {
  RunMode mode = RunMode::synthetic;
  ModelConfig model;
  LossWeights loss;
  AdamConfig optim;
  std::size_t epochs = 200;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  std::size_t window_overlap_percent = 50;  // thumos mode
  SuppressionOptions suppression;
  bool checkpoint_every_epoch = true;

  // Throws ConfigError on any violated constraint.
  void validate() const;
};

/// Mode-specific defaults (widths, T, D, max_out).
RunConfig defaults_for_mode(RunMode mode);

/// Flat "key = value" lines; '#' starts a comment. The mode key (or
/// mode_override) selects the defaults the other keys are applied on top of.
/// Unknown keys, duplicate keys and malformed values throw ConfigError.
RunConfig parse_run_config(const std::string& text, std::optional<RunMode> mode_override = std::nullopt);
RunConfig load_run_config(const std::filesystem::path& path, std::optional<RunMode> mode_override = std::nullopt);

/// Canonical text form; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& c);

/// FNV-1a 64 of the canonical text.
std::uint64_t config_hash(const RunConfig& c);

}  // namespace atag
