#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "atag/model_config.hpp"
#include "atag/ops.hpp"
#include "atag/params.hpp"

namespace atag {

/// Combines global (T x C_g) and local (T x C_l) features. concat gives
/// [global | local]; sum requires equal widths. late returns the
/// concatenation too: the model keeps the branches apart through the first
/// head layers and only joins them before the classifiers.
Tensor fuse_global_local(const Tensor& global, const Tensor& local, FusionMode mode);

// --- boundary head -----------------------------------------------------------

struct BoundaryHeadParams {
  // One grouped k3 conv per input part (a single part unless fusion is late).
  std::vector<Tensor> conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;  // [2 x hidden x 1]
};

/// part_widths: channel count of each input part; hidden is split evenly.
BoundaryHeadParams init_boundary_head(ParameterSet& ps, const std::string& prefix,
                                      const std::vector<std::size_t>& part_widths,
                                      std::size_t hidden, std::mt19937_64& rng);

struct BoundaryScores {
  Tensor start;  // [T]
  Tensor end;    // [T]
};

/// conv1d(k3, groups 4) -> ReLU -> conv1d(k1) -> sigmoid, channel 0 start, 1 end.
BoundaryScores boundary_head(const Tensor& fused, const BoundaryHeadParams& p);
BoundaryScores boundary_head(const std::vector<Tensor>& parts, const BoundaryHeadParams& p);

// --- boundary-matching sampling ---------------------------------------------

/// D x T flags, cell (d, j) is the proposal [j, j + d + 1]; valid iff it ends
/// on or before the last snippet, j + d + 1 <= T - 1.
std::vector<std::uint8_t> valid_mask(std::size_t max_duration, std::size_t length);
Tensor valid_mask_tensor(std::size_t max_duration, std::size_t length);

/// T x (N*D*T) interpolation weights. Column n*(D*T) + d*T + j samples
/// position j + (d+1) * n / (N-1) by linear interpolation between the two
/// neighbouring snippets; columns of invalid cells are empty.
std::shared_ptr<const SparseMatrix> build_sampling_matrix(std::size_t length,
                                                          std::size_t max_duration,
                                                          std::size_t num_samples);

/// fused T x C -> C x N x D x T.
Tensor bm_sample(const Tensor& fused, const std::shared_ptr<const SparseMatrix>& sampler,
                 std::size_t max_duration, std::size_t num_samples);
Tensor bm_sample(const Tensor& fused, std::size_t max_duration, std::size_t num_samples = 32);

// --- completeness head -------------------------------------------------------

struct CompletenessHeadParams {
  // Per input part: the N x 1 x 1 3-D conv, stored as [hidden_3d_part x C_part*N].
  std::vector<Tensor> sample_w, sample_b;
  Tensor reduce_w, reduce_b;  // 1x1, hidden_3d -> hidden_2d
  Tensor conv1_w, conv1_b;    // 3x3
  Tensor conv2_w, conv2_b;    // 3x3
  Tensor out_w, out_b;        // 1x1, hidden_2d -> 2
};

CompletenessHeadParams init_completeness_head(ParameterSet& ps, const std::string& prefix,
                                              const std::vector<std::size_t>& part_widths,
                                              std::size_t num_samples, std::size_t hidden_3d,
                                              std::size_t hidden_2d, std::mt19937_64& rng);

struct CompletenessMaps {
  Tensor cc;  // D x T classification map
  Tensor cr;  // D x T regression map
};

/// sampled parts are C_part x N x D x T; invalid cells of both maps are zero.
CompletenessMaps completeness_head(const std::vector<Tensor>& sampled,
                                   const CompletenessHeadParams& p, const Tensor& valid);
CompletenessMaps completeness_head(const Tensor& sampled, const CompletenessHeadParams& p,
                                   const Tensor& valid);

struct ScoreMaps {
  Tensor start, end, actionness;  // [T]
  Tensor cc_map, cr_map;          // D x T
  std::vector<std::uint8_t> valid;
  std::size_t length = 0;
  std::size_t max_duration = 0;
};

}  // namespace atag
