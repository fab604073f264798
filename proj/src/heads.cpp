#include "atag/heads.hpp"

#include <cmath>

#include "atag/errors.hpp"

namespace atag {

Tensor fuse_global_local(const Tensor& global, const Tensor& local, FusionMode mode) {
  if (global.dim(0) != local.dim(0)) {
    throw DimensionError("fusion: global has " + std::to_string(global.dim(0)) +
                         " snippets, local has " + std::to_string(local.dim(0)));
  }
  if (mode == FusionMode::sum) {
    if (global.dim(1) != local.dim(1)) {
      throw ConfigError("sum fusion needs equal widths, got " + std::to_string(global.dim(1)) +
                        " and " + std::to_string(local.dim(1)));
    }
    return add(global, local);
  }
  return concat_lastdim(global, local);
}

BoundaryHeadParams init_boundary_head(ParameterSet& ps, const std::string& prefix,
                                      const std::vector<std::size_t>& part_widths,
                                      std::size_t hidden, std::mt19937_64& rng) {
  const std::size_t parts = part_widths.size();
  const std::size_t part_hidden = hidden / parts;
  if (hidden % parts != 0 || part_hidden % 4 != 0) {
    throw ConfigError("boundary head: hidden width " + std::to_string(hidden) +
                      " must split into parts divisible by 4");
  }
  BoundaryHeadParams p;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t w = part_widths[i];
    if (w % 4 != 0) {
      throw ConfigError("boundary head: input width " + std::to_string(w) + " is not divisible by 4");
    }
    const std::string s = parts == 1 ? "" : std::to_string(i);
    p.conv1_w.push_back(ps.add_uniform(prefix + "conv1_w" + s, {part_hidden, w / 4, 3},
                                       glorot_bound(w / 4 * 3, part_hidden / 4 * 3), rng));
    p.conv1_b.push_back(ps.add_constant(prefix + "conv1_b" + s, {part_hidden}, 0.0));
  }
  p.conv2_w = ps.add_uniform(prefix + "conv2_w", {2, hidden, 1}, glorot_bound(hidden, 2), rng);
  p.conv2_b = ps.add_constant(prefix + "conv2_b", {2}, 0.0);
  return p;
}

BoundaryScores boundary_head(const std::vector<Tensor>& parts, const BoundaryHeadParams& p) {
  if (parts.size() != p.conv1_w.size()) {
    throw ConfigError("boundary head: expected " + std::to_string(p.conv1_w.size()) +
                      " input parts, got " + std::to_string(parts.size()));
  }
  Tensor hidden;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].dim(1) % 4 != 0) {
      throw ConfigError("boundary head: input width " + std::to_string(parts[i].dim(1)) +
                        " is not divisible by 4");
    }
    const Tensor h = relu(conv1d(transpose(parts[i]), p.conv1_w[i], p.conv1_b[i], 4));
    hidden = hidden.defined() ? concat_firstdim(hidden, h) : h;
  }
  const Tensor probs = sigmoid(conv1d(hidden, p.conv2_w, p.conv2_b));
  const std::size_t t_len = probs.dim(1);
  return {reshape(slice_firstdim(probs, 0, 1), {t_len}), reshape(slice_firstdim(probs, 1, 1), {t_len})};
}

BoundaryScores boundary_head(const Tensor& fused, const BoundaryHeadParams& p) {
  return boundary_head(std::vector<Tensor>{fused}, p);
}

std::vector<std::uint8_t> valid_mask(std::size_t max_duration, std::size_t length) {
  std::vector<std::uint8_t> v(max_duration * length, 0);
  for (std::size_t d = 0; d < max_duration; ++d) {
    for (std::size_t j = 0; j < length; ++j) {
      if (j + d + 1 <= length - 1) v[d * length + j] = 1;
    }
  }
  return v;
}

Tensor valid_mask_tensor(std::size_t max_duration, std::size_t length) {
  const auto flags = valid_mask(max_duration, length);
  return Tensor::from({max_duration, length}, std::vector<double>(flags.begin(), flags.end()));
}

std::shared_ptr<const SparseMatrix> build_sampling_matrix(std::size_t length,
                                                          std::size_t max_duration,
                                                          std::size_t num_samples) {
  if (max_duration > length) {
    throw ConfigError("max duration " + std::to_string(max_duration) + " exceeds T = " +
                      std::to_string(length));
  }
  if (num_samples == 0) throw ConfigError("bm sampling needs at least one sample point");
  auto s = std::make_shared<SparseMatrix>();
  const std::size_t cells = max_duration * length;
  s->rows = length;
  s->cols = num_samples * cells;
  s->col_start.reserve(s->cols + 1);
  s->col_start.push_back(0);
  const auto valid = valid_mask(max_duration, length);
  for (std::size_t n = 0; n < num_samples; ++n) {
    const double frac_n = num_samples == 1 ? 0.5
                                           : static_cast<double>(n) / static_cast<double>(num_samples - 1);
    for (std::size_t d = 0; d < max_duration; ++d) {
      for (std::size_t j = 0; j < length; ++j) {
        if (valid[d * length + j]) {
          const double pos = static_cast<double>(j) + static_cast<double>(d + 1) * frac_n;
          auto lo = static_cast<std::size_t>(std::floor(pos));
          if (lo >= length - 1) lo = length - 1;
          const double w_hi = pos - static_cast<double>(lo);
          if (w_hi < 1.0) {
            s->row_index.push_back(lo);
            s->weight.push_back(1.0 - w_hi);
          }
          if (w_hi > 0.0 && lo + 1 < length) {
            s->row_index.push_back(lo + 1);
            s->weight.push_back(w_hi);
          }
        }
        s->col_start.push_back(s->row_index.size());
      }
    }
  }
  return s;
}

Tensor bm_sample(const Tensor& fused, const std::shared_ptr<const SparseMatrix>& sampler,
                 std::size_t max_duration, std::size_t num_samples) {
  const std::size_t t_len = fused.dim(0);
  if (sampler->rows != t_len || sampler->cols != num_samples * max_duration * t_len) {
    throw DimensionError("bm_sample: sampler does not match T=" + std::to_string(t_len) +
                         ", D=" + std::to_string(max_duration) + ", N=" + std::to_string(num_samples));
  }
  const Tensor flat = sparse_matmul(transpose(fused), sampler);
  return reshape(flat, {fused.dim(1), num_samples, max_duration, t_len});
}

Tensor bm_sample(const Tensor& fused, std::size_t max_duration, std::size_t num_samples) {
  return bm_sample(fused, build_sampling_matrix(fused.dim(0), max_duration, num_samples),
                   max_duration, num_samples);
}

CompletenessHeadParams init_completeness_head(ParameterSet& ps, const std::string& prefix,
                                              const std::vector<std::size_t>& part_widths,
                                              std::size_t num_samples, std::size_t hidden_3d,
                                              std::size_t hidden_2d, std::mt19937_64& rng) {
  const std::size_t parts = part_widths.size();
  if (hidden_3d % parts != 0) {
    throw ConfigError("completeness head: hidden width " + std::to_string(hidden_3d) +
                      " does not split into " + std::to_string(parts) + " parts");
  }
  const std::size_t part_hidden = hidden_3d / parts;
  CompletenessHeadParams p;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t fan_in = part_widths[i] * num_samples;
    const std::string s = parts == 1 ? "" : std::to_string(i);
    p.sample_w.push_back(ps.add_uniform(prefix + "sample_w" + s, {part_hidden, fan_in},
                                        glorot_bound(fan_in, part_hidden), rng));
    p.sample_b.push_back(ps.add_constant(prefix + "sample_b" + s, {part_hidden}, 0.0));
  }
  p.reduce_w = ps.add_uniform(prefix + "reduce_w", {hidden_2d, hidden_3d, 1, 1},
                              glorot_bound(hidden_3d, hidden_2d), rng);
  p.reduce_b = ps.add_constant(prefix + "reduce_b", {hidden_2d}, 0.0);
  const double b3 = glorot_bound(hidden_2d * 9, hidden_2d * 9);
  p.conv1_w = ps.add_uniform(prefix + "conv1_w", {hidden_2d, hidden_2d, 3, 3}, b3, rng);
  p.conv1_b = ps.add_constant(prefix + "conv1_b", {hidden_2d}, 0.0);
  p.conv2_w = ps.add_uniform(prefix + "conv2_w", {hidden_2d, hidden_2d, 3, 3}, b3, rng);
  p.conv2_b = ps.add_constant(prefix + "conv2_b", {hidden_2d}, 0.0);
  p.out_w = ps.add_uniform(prefix + "out_w", {2, hidden_2d, 1, 1}, glorot_bound(hidden_2d, 2), rng);
  p.out_b = ps.add_constant(prefix + "out_b", {2}, 0.0);
  return p;
}

CompletenessMaps completeness_head(const std::vector<Tensor>& sampled,
                                   const CompletenessHeadParams& p, const Tensor& valid) {
  if (sampled.size() != p.sample_w.size()) {
    throw ConfigError("completeness head: expected " + std::to_string(p.sample_w.size()) +
                      " input parts, got " + std::to_string(sampled.size()));
  }
  const std::size_t d_len = valid.dim(0);
  const std::size_t t_len = valid.dim(1);
  Tensor hidden;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    const Tensor& x = sampled[i];
    if (x.rank() != 4 || x.dim(2) != d_len || x.dim(3) != t_len ||
        x.dim(0) * x.dim(1) != p.sample_w[i].dim(1)) {
      throw DimensionError("completeness head: sampled input " + shape_to_string(x.shape()) +
                           " does not match weights " + shape_to_string(p.sample_w[i].shape()));
    }
    const Tensor flat = reshape(x, {x.dim(0) * x.dim(1), d_len * t_len});
    const Tensor h = relu(add_bias_firstdim(matmul(p.sample_w[i], flat), p.sample_b[i]));
    hidden = hidden.defined() ? concat_firstdim(hidden, h) : h;
  }
  Tensor maps = reshape(hidden, {hidden.dim(0), d_len, t_len});
  maps = relu(conv2d(maps, p.reduce_w, p.reduce_b));
  maps = relu(conv2d(maps, p.conv1_w, p.conv1_b));
  maps = relu(conv2d(maps, p.conv2_w, p.conv2_b));
  maps = sigmoid(conv2d(maps, p.out_w, p.out_b));
  const Shape map_shape{d_len, t_len};
  return {mul(reshape(slice_firstdim(maps, 0, 1), map_shape), valid),
          mul(reshape(slice_firstdim(maps, 1, 1), map_shape), valid)};
}

CompletenessMaps completeness_head(const Tensor& sampled, const CompletenessHeadParams& p,
                                   const Tensor& valid) {
  return completeness_head(std::vector<Tensor>{sampled}, p, valid);
}

}  // namespace atag
