#pragma once

#include <cstddef>
#include <random>
#include <string>

namespace atag {

enum class FusionMode { concat, sum, late };
enum class LocalVariant { adaptive, general_gcn, self_attn_gcn, conv };

std::string to_string(FusionMode m);
std::string to_string(LocalVariant v);
FusionMode parse_fusion_mode(const std::string& s);
LocalVariant parse_local_variant(const std::string& s);

/// Architecture hyperparameters. Widths default to desk scale; the reference
/// widths are head_hidden 256, bm_hidden_3d 512, bm_hidden_2d 128.
struct ModelConfig {
  std::size_t length = 32;        // T, fixed by the learned adjacency
  std::size_t channels = 32;      // C, split evenly between the branches
  std::size_t max_duration = 16;  // D
  std::size_t num_samples = 32;   // N sample points per proposal
  std::size_t heads = 8;
  std::size_t transformer_layers = 1;
  std::size_t ffn_expansion = 4;
  std::size_t front_kernel = 7;
  std::size_t delta = 2;
  std::size_t head_hidden = 32;
  std::size_t bm_hidden_3d = 64;
  std::size_t bm_hidden_2d = 32;
  double dropout = 0.1;
  bool use_transformer = true;
  bool use_front_block = true;
  bool use_positional_encoding = true;
  FusionMode fusion = FusionMode::concat;
  LocalVariant local_variant = LocalVariant::adaptive;

  std::size_t global_channels() const { return channels / 2; }
  std::size_t local_channels() const { return channels - channels / 2; }
  // Throws ConfigError on divisibility or range violations.
  void validate() const;
};

// Per-call forward switches. Dropout is active only when training.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  double active_dropout() const { return training && rng ? dropout : 0.0; }
};

}  // namespace atag
