#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "atag/tensor.hpp"

// Differentiable dense ops. Two layouts are used across the model:
// time-major T x C feature matrices and channel-major C x ... maps for
// convolutions. All ops are deterministic.
namespace atag {

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Column-compressed sparse matrix with fixed (non-trainable) weights.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  // Entries of column j live in [col_start[j], col_start[j+1]).
  std::vector<std::size_t> col_start;
  std::vector<std::size_t> row_index;
  std::vector<double> weight;
};

// dense[m x k] * sparse[k x n] -> [m x n]
Tensor sparse_matmul(const Tensor& dense, std::shared_ptr<const SparseMatrix> sparse);

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// Gradient passes where lo <= x <= hi, zero elsewhere.
Tensor clamp(const Tensor& a, double lo, double hi);

// x[... x C] + b[C]
Tensor add_bias_lastdim(const Tensor& x, const Tensor& b);
// x[C x ...] + b[C]
Tensor add_bias_firstdim(const Tensor& x, const Tensor& b);

// --- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// --- shape ------------------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor concat_lastdim(const Tensor& a, const Tensor& b);   // 2-D only
Tensor concat_firstdim(const Tensor& a, const Tensor& b);  // any rank, equal trailing dims
Tensor slice_lastdim(const Tensor& a, std::size_t start, std::size_t length);  // 2-D only
Tensor slice_firstdim(const Tensor& a, std::size_t start, std::size_t length);

// --- normalisation / attention ---------------------------------------------

/// Row-wise softmax over the last dimension with max subtraction.
/// Entries equal to -inf, or whose `keep` flag is 0, receive probability 0.
/// A row whose kept entries are all -inf falls back to uniform over the kept
/// set; a row with nothing kept is all zero and records a warning.
Tensor softmax_lastdim(const Tensor& x, const std::vector<std::uint8_t>* keep = nullptr);

/// Layer normalization over the last dimension: (x - mean) / sqrt(var + eps),
/// then gamma * . + beta. Requires C >= 2.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

// --- convolutions -----------------------------------------------------------

/// Zero-padded "same" cross-correlation. x[C_in x T], w[C_out x C_in/groups x k]
/// with odd k, bias[C_out] (may be undefined).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t groups = 1);

/// x[C_in x H x W], w[C_out x C_in x kh x kw], odd kernel sizes, zero "same" padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);

/// Stride-1 average pool over time, x[C x T], zero padding counted in the divisor.
Tensor avg_pool1d(const Tensor& x, std::size_t kernel);

}  // namespace atag
