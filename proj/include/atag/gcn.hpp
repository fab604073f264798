#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "atag/model_config.hpp"
#include "atag/params.hpp"

// Local branch: graph convolution over a temporal band of snippets.
namespace atag {

/// Band of half-width delta around the diagonal, self-loops included.
struct BandMask {
  std::size_t length = 0;
  std::size_t delta = 0;
  std::vector<std::uint8_t> keep;  // row-major T x T, 1 inside the band
  Tensor matrix;                   // same, as a constant 0/1 tensor

  bool inside(std::size_t m, std::size_t n) const { return keep[m * length + n] != 0; }
};

// Throws ConfigError when delta >= T.
BandMask build_mask(std::size_t length, std::size_t delta);

struct GcnParams {
  LocalVariant variant = LocalVariant::adaptive;
  BandMask mask;
  Tensor a_a;       // adaptive: learned T x T adjacency
  Tensor theta;     // adaptive: [C_l] difference projector
  Tensor w;         // C_out x C_l channel transform (all graph variants)
  Tensor w_theta;   // self-attn-gcn: C_l x C_l
  Tensor w_phi;     // self-attn-gcn: C_l x C_l
  Tensor conv_w;    // conv: [C_out x C_l x (2 delta + 1)]
  Tensor conv_b;
  Tensor residual_w;  // [C_out x C_l], only when C_out != C_l
};

/// Parameter names: <prefix>a_a, <prefix>theta, <prefix>w, ... depending on the variant.
GcnParams init_gcn(ParameterSet& ps, const std::string& prefix, std::size_t length,
                   std::size_t in_channels, std::size_t out_channels, std::size_t delta,
                   LocalVariant variant, std::mt19937_64& rng);

/// Row m: softmax over the band of relu(theta . |f_m - f_n|); zero outside.
Tensor content_adjacency(const Tensor& features, const Tensor& theta, const BandMask& mask);

struct LocalOutput {
  Tensor features;   // T x C_out
  Tensor adjacency;  // effective T x T aggregation matrix (undefined for conv)
  Tensor content;    // A_d for the adaptive variant
};

/// relu(Adj (F W^T)) + residual, Adj = (A_a + A_d) masked to the band. Row t
/// of the result aggregates the band neighbours of snippet t.
LocalOutput adaptive_gcn_forward(const Tensor& features, const GcnParams& p);

/// Dispatches on p.variant; every variant returns T x C_out.
LocalOutput local_variant_forward(const Tensor& features, const GcnParams& p);

}  // namespace atag
