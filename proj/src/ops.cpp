#include "atag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "atag/diagnostics.hpp"
#include "atag/errors.hpp"

namespace atag {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  Map(c, M, N).noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
}

// C[m x k] += A[m x n] * B[k x n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  Map(c, M, K).noalias() += ConstMap(a, M, N) * ConstMap(b, K, N).transpose();
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  Map(c, K, N).noalias() += ConstMap(a, M, K).transpose() * ConstMap(b, M, N);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_to_string(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [deriv](Node& n) {
    Node& pa = *n.parents[0];
    auto& g = pa.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * deriv(pa.value[i], n.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) gemm_nt(m, n, k, o.grad.data(), pb.value.data(), pa.ensure_grad().data());
    if (pb.requires_grad) gemm_tn(m, k, n, pa.value.data(), o.grad.data(), pb.ensure_grad().data());
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto in = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j * m + i];
  });
}

Tensor sparse_matmul(const Tensor& dense, std::shared_ptr<const SparseMatrix> sp) {
  const SparseMatrix& s = *sp;
  require_rank(dense, 2, "sparse_matmul");
  if (dense.dim(1) != s.rows) {
    throw DimensionError("sparse_matmul: incompatible shapes " + shape_to_string(dense.shape()) +
                         " and [" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]");
  }
  const std::size_t m = dense.dim(0), k = s.rows, n = s.cols;
  const auto in = dense.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = in.data() + i * k;
    double* orow = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t e = s.col_start[j]; e < s.col_start[j + 1]; ++e)
        acc += s.weight[e] * row[s.row_index[e]];
      orow[j] = acc;
    }
  }
  return make_result({m, n}, std::move(out), {dense}, [m, k, n, sp](Node& o) {
    const SparseMatrix& s = *sp;
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double* grow = g.data() + i * k;
      const double* orow = o.grad.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double go = orow[j];
        if (go == 0.0) continue;
        for (std::size_t e = s.col_start[j]; e < s.col_start[j + 1]; ++e)
          grow[s.row_index[e]] += s.weight[e] * go;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (int p = 0; p < 2; ++p) {
      Node& par = *o.parents[p];
      if (!par.requires_grad) continue;
      auto& g = par.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double v) { return std::log(v); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double v) { return std::fabs(v); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double v) { return v * v; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor add_bias_lastdim(const Tensor& x, const Tensor& b) {
  const std::size_t c = x.shape().back();
  if (b.numel() != c) {
    throw DimensionError("add_bias_lastdim: bias " + shape_to_string(b.shape()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  const auto in = x.data(), bv = b.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + bv[i % c];
  return make_result(x.shape(), std::move(out), {x, b}, [c](Node& o) {
    Node& px = *o.parents[0];
    Node& pb = *o.parents[1];
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i];
    }
  });
}

Tensor add_bias_firstdim(const Tensor& x, const Tensor& b) {
  const std::size_t c = x.dim(0);
  if (b.numel() != c) {
    throw DimensionError("add_bias_firstdim: bias " + shape_to_string(b.shape()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  const std::size_t inner = x.numel() / c;
  const auto in = x.data(), bv = b.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + bv[i / inner];
  return make_result(x.shape(), std::move(out), {x, b}, [inner](Node& o) {
    Node& px = *o.parents[0];
    Node& pb = *o.parents[1];
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i / inner] += o.grad[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result({1}, {acc}, {a}, [](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(shape, std::move(out), {a}, [](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_lastdim");
  require_rank(b, 2, "concat_lastdim");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_lastdim: row mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), n1 = a.dim(1), n2 = b.dim(1), n = n1 + n2;
  std::vector<double> out(m * n);
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(x.data() + i * n1, n1, out.data() + i * n);
    std::copy_n(y.data() + i * n2, n2, out.data() + i * n + n1);
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, n1, n2, n](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n1; ++j) g[i * n1 + j] += o.grad[i * n + j];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n2; ++j) g[i * n2 + j] += o.grad[i * n + n1 + j];
    }
  });
}

Tensor concat_firstdim(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw DimensionError("concat_firstdim: incompatible shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t na = a.numel();
  return make_result(std::move(shape), std::move(out), {a, b}, [na](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[na + i];
    }
  });
}

Tensor slice_lastdim(const Tensor& a, std::size_t start, std::size_t length) {
  require_rank(a, 2, "slice_lastdim");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (start + length > n) {
    throw DimensionError("slice_lastdim: [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") out of range for " +
                         shape_to_string(a.shape()));
  }
  const auto x = a.data();
  std::vector<double> out(m * length);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.data() + i * n + start, length, out.data() + i * length);
  return make_result({m, length}, std::move(out), {a}, [m, n, start, length](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < length; ++j) g[i * n + start + j] += o.grad[i * length + j];
  });
}

Tensor slice_firstdim(const Tensor& a, std::size_t start, std::size_t length) {
  if (a.rank() == 0 || start + length > a.dim(0)) {
    throw DimensionError("slice_firstdim: [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") out of range for " +
                         shape_to_string(a.shape()));
  }
  const std::size_t inner = a.numel() / a.dim(0);
  Shape shape = a.shape();
  shape[0] = length;
  const auto x = a.data();
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(start * inner),
                          x.begin() + static_cast<std::ptrdiff_t>((start + length) * inner));
  const std::size_t offset = start * inner;
  return make_result(std::move(shape), std::move(out), {a}, [offset](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[offset + i] += o.grad[i];
  });
}

Tensor softmax_lastdim(const Tensor& x, const std::vector<std::uint8_t>* keep) {
  if (keep && keep->size() != x.numel()) {
    throw DimensionError("softmax_lastdim: mask length " + std::to_string(keep->size()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.numel() / c;
  const auto in = x.data();
  std::vector<double> out(in.size(), 0.0);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * c;
    double* orow = out.data() + r * c;
    auto kept = [&](std::size_t j) { return !keep || (*keep)[r * c + j] != 0; };
    double mx = kNegInf;
    std::size_t n_kept = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!kept(j)) continue;
      ++n_kept;
      if (row[j] > mx) mx = row[j];
    }
    if (n_kept == 0) {
      record_warning("softmax_lastdim: row " + std::to_string(r) +
                     " has no unmasked entries; emitting zeros");
      continue;
    }
    if (mx == kNegInf) {
      for (std::size_t j = 0; j < c; ++j)
        if (kept(j)) orow[j] = 1.0 / static_cast<double>(n_kept);
      continue;
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!kept(j) || row[j] == kNegInf) continue;
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= z;
  }
  return make_result(x.shape(), std::move(out), {x}, [c, rows](Node& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = o.value.data() + r * c;
      const double* gy = o.grad.data() + r * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < c; ++j) g[r * c + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = x.shape().back();
  if (c < 2) throw DimensionError("layer_norm: need at least 2 channels, got " +
                                  shape_to_string(x.shape()));
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: affine parameters do not match " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = x.numel() / c;
  const auto in = x.data(), gv = gamma.data(), bv = beta.data();
  std::vector<double> out(in.size());
  auto xhat = std::make_shared<std::vector<double>>(in.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = gv[j] * h + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta}, [c, rows, xhat, inv_std](Node& o) {
    Node& px = *o.parents[0];
    Node& pg = *o.parents[1];
    Node& pb = *o.parents[2];
    const auto& gv = pg.value;
    if (pg.requires_grad) {
      auto& g = pg.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i] * (*xhat)[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % c] += o.grad[i];
    }
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      const double inv_c = 1.0 / static_cast<double>(c);
      for (std::size_t r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = o.grad[r * c + j] * gv[j];
          m1 += dh;
          m2 += dh * (*xhat)[r * c + j];
        }
        m1 *= inv_c;
        m2 *= inv_c;
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = o.grad[r * c + j] * gv[j];
          g[r * c + j] += (*inv_std)[r] * (dh - m1 - (*xhat)[r * c + j] * m2);
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  std::vector<double> m(x.numel());
  for (auto& v : m) v = keep(rng) ? s : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(m)));
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t groups) {
  require_rank(x, 2, "conv1d");
  require_rank(w, 3, "conv1d");
  const std::size_t cin = x.dim(0), t_len = x.dim(1), cout = w.dim(0), k = w.dim(2);
  if (groups == 0 || cin % groups != 0 || cout % groups != 0) {
    throw ConfigError("conv1d: channels (" + std::to_string(cin) + " in, " +
                      std::to_string(cout) + " out) not divisible by groups " +
                      std::to_string(groups));
  }
  if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(k));
  const std::size_t cpg = cin / groups, opg = cout / groups;
  if (w.dim(1) != cpg) {
    throw DimensionError("conv1d: kernel " + shape_to_string(w.shape()) + " does not match " +
                         std::to_string(cin) + " input channels in " + std::to_string(groups) +
                         " groups");
  }
  if (bias.defined() && bias.numel() != cout) {
    throw DimensionError("conv1d: bias " + shape_to_string(bias.shape()) + " for " +
                         std::to_string(cout) + " output channels");
  }
  const long half = static_cast<long>(k / 2);
  const long tl = static_cast<long>(t_len);
  const auto xv = x.data(), wv = w.data();
  std::vector<double> out(cout * t_len, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    const std::size_t grp = o / opg;
    double* orow = out.data() + o * t_len;
    if (bias.defined()) std::fill_n(orow, t_len, bias.data()[o]);
    for (std::size_t ci = 0; ci < cpg; ++ci) {
      const double* xrow = xv.data() + (grp * cpg + ci) * t_len;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double wt = wv[(o * cpg + ci) * k + kk];
        const long shift = static_cast<long>(kk) - half;
        const long lo = std::max(0L, -shift), hi = std::min(tl, tl - shift);
        for (long t = lo; t < hi; ++t) orow[t] += wt * xrow[t + shift];
      }
    }
  }
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({cout, t_len}, std::move(out), std::move(inputs),
                     [=](Node& n) {
                       Node& px = *n.parents[0];
                       Node& pw = *n.parents[1];
                       double* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
                       double* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
                       for (std::size_t o = 0; o < cout; ++o) {
                         const std::size_t grp = o / opg;
                         const double* grow = n.grad.data() + o * t_len;
                         for (std::size_t ci = 0; ci < cpg; ++ci) {
                           const std::size_t xc = grp * cpg + ci;
                           const double* xrow = px.value.data() + xc * t_len;
                           for (std::size_t kk = 0; kk < k; ++kk) {
                             const std::size_t widx = (o * cpg + ci) * k + kk;
                             const long shift = static_cast<long>(kk) - half;
                             const long lo = std::max(0L, -shift), hi = std::min(tl, tl - shift);
                             if (gw) {
                               double acc = 0.0;
                               for (long t = lo; t < hi; ++t) acc += grow[t] * xrow[t + shift];
                               gw[widx] += acc;
                             }
                             if (gx) {
                               const double wt = pw.value[widx];
                               double* gxrow = gx + xc * t_len;
                               for (long t = lo; t < hi; ++t) gxrow[t + shift] += wt * grow[t];
                             }
                           }
                         }
                       }
                       if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
                         auto& gb = n.parents[2]->ensure_grad();
                         for (std::size_t o = 0; o < cout; ++o)
                           for (std::size_t t = 0; t < t_len; ++t) gb[o] += n.grad[o * t_len + t];
                       }
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) {
    throw DimensionError("conv2d: kernel " + shape_to_string(w.shape()) + " vs input " +
                         shape_to_string(x.shape()));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw ConfigError("conv2d: kernel sizes must be odd");
  if (bias.defined() && bias.numel() != cout) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " for " +
                         std::to_string(cout) + " output channels");
  }
  const std::size_t hw = h * wd, kk = cin * kh * kw;
  // im2col: rows = (ci, dy, dx), cols = (y, x)
  auto cols = std::make_shared<std::vector<double>>(kk * hw, 0.0);
  const auto xv = x.data();
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t dy = 0; dy < kh; ++dy)
      for (std::size_t dx = 0; dx < kw; ++dx) {
        double* crow = cols->data() + ((ci * kh + dy) * kw + dx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + static_cast<long>(dy) - ph;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (std::size_t xx = 0; xx < wd; ++xx) {
            const long sx = static_cast<long>(xx) + static_cast<long>(dx) - pw;
            if (sx < 0 || sx >= static_cast<long>(wd)) continue;
            crow[y * wd + xx] = xv[(ci * h + sy) * wd + sx];
          }
        }
      }
  std::vector<double> out(cout * hw, 0.0);
  if (bias.defined())
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.data() + o * hw, hw, bias.data()[o]);
  gemm_nn(cout, kk, hw, w.data().data(), cols->data(), out.data());

  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({cout, h, wd}, std::move(out), std::move(inputs), [=](Node& n) {
    Node& px = *n.parents[0];
    Node& pwt = *n.parents[1];
    if (pwt.requires_grad) gemm_nt(cout, hw, kk, n.grad.data(), cols->data(), pwt.ensure_grad().data());
    if (px.requires_grad) {
      std::vector<double> dcols(kk * hw, 0.0);
      gemm_tn(cout, kk, hw, pwt.value.data(), n.grad.data(), dcols.data());
      auto& gx = px.ensure_grad();
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t dy = 0; dy < kh; ++dy)
          for (std::size_t dx = 0; dx < kw; ++dx) {
            const double* crow = dcols.data() + ((ci * kh + dy) * kw + dx) * hw;
            for (std::size_t y = 0; y < h; ++y) {
              const long sy = static_cast<long>(y) + static_cast<long>(dy) - ph;
              if (sy < 0 || sy >= static_cast<long>(h)) continue;
              for (std::size_t xx = 0; xx < wd; ++xx) {
                const long sx = static_cast<long>(xx) + static_cast<long>(dx) - pw;
                if (sx < 0 || sx >= static_cast<long>(wd)) continue;
                gx[(ci * h + sy) * wd + sx] += crow[y * wd + xx];
              }
            }
          }
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      auto& gb = n.parents[2]->ensure_grad();
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < hw; ++i) gb[o] += n.grad[o * hw + i];
    }
  });
}

Tensor avg_pool1d(const Tensor& x, std::size_t kernel) {
  require_rank(x, 2, "avg_pool1d");
  if (kernel % 2 == 0) throw ConfigError("avg_pool1d: kernel must be odd");
  const std::size_t c = x.dim(0), t_len = x.dim(1);
  const long half = static_cast<long>(kernel / 2), tl = static_cast<long>(t_len);
  const double inv = 1.0 / static_cast<double>(kernel);
  const auto xv = x.data();
  std::vector<double> out(c * t_len, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (long t = 0; t < tl; ++t) {
      double acc = 0.0;
      for (long s = std::max(0L, t - half); s <= std::min(tl - 1, t + half); ++s)
        acc += xv[ch * t_len + s];
      out[ch * t_len + t] = acc * inv;
    }
  return make_result({c, t_len}, std::move(out), {x}, [=](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (long t = 0; t < tl; ++t) {
        const double go = n.grad[ch * t_len + t] * inv;
        for (long s = std::max(0L, t - half); s <= std::min(tl - 1, t + half); ++s)
          g[ch * t_len + s] += go;
      }
  });
}

}  // namespace atag
