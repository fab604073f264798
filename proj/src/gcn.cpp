#include "atag/gcn.hpp"

#include <cmath>

#include "atag/errors.hpp"
#include "atag/ops.hpp"

namespace atag {
namespace {

// theta . |f_m - f_n| on in-band pairs, zero elsewhere. T x T.
Tensor band_difference_logits(const Tensor& features, const Tensor& theta, const BandMask& mask) {
  const std::size_t t_len = features.dim(0);
  const std::size_t c = features.dim(1);
  const auto f = features.data();
  const auto th = theta.data();
  std::vector<double> out(t_len * t_len, 0.0);
  for (std::size_t m = 0; m < t_len; ++m) {
    for (std::size_t n = 0; n < t_len; ++n) {
      if (!mask.inside(m, n)) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += th[k] * std::fabs(f[m * c + k] - f[n * c + k]);
      out[m * t_len + n] = s;
    }
  }
  std::vector<std::uint8_t> keep = mask.keep;
  return make_result({t_len, t_len}, std::move(out), {features, theta},
                     [keep = std::move(keep), t_len, c](Node& o) {
    Node& pf = *o.parents[0];
    Node& pt = *o.parents[1];
    const auto& fv = pf.value;
    const auto& tv = pt.value;
    std::vector<double>* gf = pf.requires_grad ? &pf.ensure_grad() : nullptr;
    std::vector<double>* gt = pt.requires_grad ? &pt.ensure_grad() : nullptr;
    for (std::size_t m = 0; m < t_len; ++m) {
      for (std::size_t n = 0; n < t_len; ++n) {
        if (!keep[m * t_len + n] || m == n) continue;
        const double g = o.grad[m * t_len + n];
        if (g == 0.0) continue;
        for (std::size_t k = 0; k < c; ++k) {
          const double d = fv[m * c + k] - fv[n * c + k];
          if (gt) (*gt)[k] += g * std::fabs(d);
          if (gf && d != 0.0) {
            const double s = g * tv[k] * (d > 0.0 ? 1.0 : -1.0);
            (*gf)[m * c + k] += s;
            (*gf)[n * c + k] -= s;
          }
        }
      }
    }
  });
}

}  // namespace

BandMask build_mask(std::size_t length, std::size_t delta) {
  if (delta >= length) {
    throw ConfigError("build_mask: delta " + std::to_string(delta) + " must be < T = " +
                      std::to_string(length));
  }
  BandMask m;
  m.length = length;
  m.delta = delta;
  m.keep.assign(length * length, 0);
  std::vector<double> v(length * length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = 0; j < length; ++j) {
      const std::size_t dist = i > j ? i - j : j - i;
      if (dist <= delta) {
        m.keep[i * length + j] = 1;
        v[i * length + j] = 1.0;
      }
    }
  }
  m.matrix = Tensor::from({length, length}, std::move(v));
  return m;
}

GcnParams init_gcn(ParameterSet& ps, const std::string& prefix, std::size_t length,
                   std::size_t in_channels, std::size_t out_channels, std::size_t delta,
                   LocalVariant variant, std::mt19937_64& rng) {
  GcnParams p;
  p.variant = variant;
  p.mask = build_mask(length, delta);
  const double wb = glorot_bound(in_channels, out_channels);
  switch (variant) {
    case LocalVariant::adaptive: {
      std::uniform_real_distribution<double> noise(-0.01, 0.01);
      const double base = 1.0 / static_cast<double>(2 * delta + 1);
      std::vector<double> a(length * length, 0.0);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (p.mask.keep[i]) a[i] = base + noise(rng);
      }
      p.a_a = ps.add(prefix + "a_a", Tensor::from({length, length}, std::move(a), true));
      p.theta = ps.add_uniform(prefix + "theta", {in_channels}, 1.0 / std::sqrt(static_cast<double>(in_channels)), rng);
      p.w = ps.add_uniform(prefix + "w", {out_channels, in_channels}, wb, rng);
      break;
    }
    case LocalVariant::general_gcn:
      p.w = ps.add_uniform(prefix + "w", {out_channels, in_channels}, wb, rng);
      break;
    case LocalVariant::self_attn_gcn: {
      const double b = glorot_bound(in_channels, in_channels);
      p.w_theta = ps.add_uniform(prefix + "w_theta", {in_channels, in_channels}, b, rng);
      p.w_phi = ps.add_uniform(prefix + "w_phi", {in_channels, in_channels}, b, rng);
      p.w = ps.add_uniform(prefix + "w", {out_channels, in_channels}, wb, rng);
      break;
    }
    case LocalVariant::conv: {
      const std::size_t k = 2 * delta + 1;
      p.conv_w = ps.add_uniform(prefix + "conv_w", {out_channels, in_channels, k},
                                glorot_bound(in_channels * k, out_channels), rng);
      p.conv_b = ps.add_constant(prefix + "conv_b", {out_channels}, 0.0);
      break;
    }
  }
  if (out_channels != in_channels) {
    p.residual_w = ps.add_uniform(prefix + "residual_w", {out_channels, in_channels}, wb, rng);
  }
  return p;
}

Tensor content_adjacency(const Tensor& features, const Tensor& theta, const BandMask& mask) {
  if (features.rank() != 2 || features.dim(0) != mask.length) {
    throw DimensionError("content_adjacency: features " + shape_to_string(features.shape()) +
                         " do not match band of length " + std::to_string(mask.length));
  }
  if (theta.numel() != features.dim(1)) {
    throw DimensionError("content_adjacency: theta has " + std::to_string(theta.numel()) +
                         " entries for " + std::to_string(features.dim(1)) + " channels");
  }
  return softmax_lastdim(relu(band_difference_logits(features, theta, mask)), &mask.keep);
}

namespace {

Tensor residual_path(const Tensor& features, const GcnParams& p) {
  return p.residual_w.defined() ? matmul(features, transpose(p.residual_w)) : features;
}

// Row-normalized band, fixed.
Tensor uniform_band(const BandMask& mask) {
  const std::size_t t_len = mask.length;
  std::vector<double> v(t_len * t_len, 0.0);
  for (std::size_t m = 0; m < t_len; ++m) {
    std::size_t count = 0;
    for (std::size_t n = 0; n < t_len; ++n) count += mask.inside(m, n);
    for (std::size_t n = 0; n < t_len; ++n) {
      if (mask.inside(m, n)) v[m * t_len + n] = 1.0 / static_cast<double>(count);
    }
  }
  return Tensor::from({t_len, t_len}, std::move(v));
}

LocalOutput aggregate(const Tensor& features, const Tensor& adjacency, const GcnParams& p) {
  LocalOutput out;
  out.adjacency = adjacency;
  const Tensor transformed = matmul(features, transpose(p.w));
  out.features = add(relu(matmul(adjacency, transformed)), residual_path(features, p));
  return out;
}

}  // namespace

LocalOutput adaptive_gcn_forward(const Tensor& features, const GcnParams& p) {
  if (features.dim(0) != p.mask.length) {
    throw ConfigError("local branch: sequence length " + std::to_string(features.dim(0)) +
                      " differs from the learned adjacency size " + std::to_string(p.mask.length));
  }
  const Tensor content = content_adjacency(features, p.theta, p.mask);
  const Tensor adjacency = mul(add(p.a_a, content), p.mask.matrix);
  LocalOutput out = aggregate(features, adjacency, p);
  out.content = content;
  return out;
}

LocalOutput local_variant_forward(const Tensor& features, const GcnParams& p) {
  if (features.rank() != 2 || features.dim(0) != p.mask.length) {
    throw ConfigError("local branch: input " + shape_to_string(features.shape()) +
                      " does not match sequence length " + std::to_string(p.mask.length));
  }
  switch (p.variant) {
    case LocalVariant::adaptive:
      return adaptive_gcn_forward(features, p);
    case LocalVariant::general_gcn:
      return aggregate(features, uniform_band(p.mask), p);
    case LocalVariant::self_attn_gcn: {
      const Tensor q = matmul(features, transpose(p.w_theta));
      const Tensor k = matmul(features, transpose(p.w_phi));
      return aggregate(features, softmax_lastdim(matmul(q, transpose(k)), &p.mask.keep), p);
    }
    case LocalVariant::conv: {
      LocalOutput out;
      const Tensor conv = transpose(conv1d(transpose(features), p.conv_w, p.conv_b));
      out.features = add(relu(conv), residual_path(features, p));
      return out;
    }
  }
  throw ConfigError("local branch: unknown variant");
}

}  // namespace atag
