#pragma once

// Differentiable operations on Tensor. Each op computes its value eagerly and,
// when recording, attaches a propagate function that pushes the output
// gradient to whichever inputs require it.

#include <cmath>
#include <limits>
#include <string>

#include "mmgnn/errors.hpp"
#include "mmgnn/tensor/tensor.hpp"

namespace mmgnn::ad {

namespace detail {

inline std::string shape_of(Index r, Index c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

enum class Broadcast { kSame, kLeftScalar, kRightScalar };

template <typename Scalar>
Broadcast broadcast_kind(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  if (b.size() == 1) return Broadcast::kRightScalar;
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

template <typename Scalar, typename Derived>
void accumulate_broadcast(Node<Scalar>& target, const Eigen::MatrixBase<Derived>& g) {
  if (!target.requires_grad) return;
  if (target.value.size() == 1 && g.size() != 1) {
    target.accumulate(Matrix<Scalar>::Constant(1, 1, g.sum()));
  } else {
    target.accumulate(g);
  }
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar stable_softplus(Scalar x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, Scalar(0));
}

template <typename Scalar>
void require_nonempty(const Tensor<Scalar>& t, const char* op) {
  if (t.size() == 0) throw ContractError(std::string(op) + ": empty reduction");
}

/// Elementwise map with a local derivative computed from (input, output).
template <typename Scalar, typename F, typename D>
Tensor<Scalar> unary(const Tensor<Scalar>& x, F f, D local) {
  Matrix<Scalar> y = x.value().unaryExpr(f);
  return make_result<Scalar>(std::move(y), {x}, [local](Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    in.accumulate((self.grad.array() * local(in.value, self.value).array()).matrix());
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ for " + a.shape_string() + " x " +
                         b.shape_string());
  }
  Matrix<Scalar> c = a.value() * b.value();
  return make_result<Scalar>(std::move(c), {a, b}, [](detail::Node<Scalar>& self) {
    auto& l = self.input(0);
    auto& r = self.input(1);
    if (l.requires_grad) l.accumulate(self.grad * r.value.transpose());
    if (r.requires_grad) r.accumulate(l.value.transpose() * self.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& x) {
  Matrix<Scalar> y = x.value().transpose();
  return make_result<Scalar>(std::move(y), {x}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (in.requires_grad) in.accumulate(self.grad.transpose());
  });
}

// ---------------------------------------------------------------------------
// Elementwise binary ops (same shape, or one side 1x1)

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using detail::Broadcast;
  const auto kind = detail::broadcast_kind(a, b, "add");
  Matrix<Scalar> y;
  switch (kind) {
    case Broadcast::kSame: y = a.value() + b.value(); break;
    case Broadcast::kLeftScalar: y = (b.value().array() + a.value()(0, 0)).matrix(); break;
    case Broadcast::kRightScalar: y = (a.value().array() + b.value()(0, 0)).matrix(); break;
  }
  return make_result<Scalar>(std::move(y), {a, b}, [](detail::Node<Scalar>& self) {
    detail::accumulate_broadcast(self.input(0), self.grad);
    detail::accumulate_broadcast(self.input(1), self.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using detail::Broadcast;
  const auto kind = detail::broadcast_kind(a, b, "sub");
  Matrix<Scalar> y;
  switch (kind) {
    case Broadcast::kSame: y = a.value() - b.value(); break;
    case Broadcast::kLeftScalar: y = (a.value()(0, 0) - b.value().array()).matrix(); break;
    case Broadcast::kRightScalar: y = (a.value().array() - b.value()(0, 0)).matrix(); break;
  }
  return make_result<Scalar>(std::move(y), {a, b}, [](detail::Node<Scalar>& self) {
    detail::accumulate_broadcast(self.input(0), self.grad);
    detail::accumulate_broadcast(self.input(1), -self.grad);
  });
}

/// Hadamard product.
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using detail::Broadcast;
  const auto kind = detail::broadcast_kind(a, b, "mul");
  Matrix<Scalar> y;
  switch (kind) {
    case Broadcast::kSame: y = a.value().cwiseProduct(b.value()); break;
    case Broadcast::kLeftScalar: y = a.value()(0, 0) * b.value(); break;
    case Broadcast::kRightScalar: y = b.value()(0, 0) * a.value(); break;
  }
  return make_result<Scalar>(std::move(y), {a, b}, [](detail::Node<Scalar>& self) {
    auto& l = self.input(0);
    auto& r = self.input(1);
    const bool l_scalar = l.value.size() == 1 && self.value.size() != 1;
    const bool r_scalar = r.value.size() == 1 && self.value.size() != 1;
    if (l.requires_grad) {
      if (r_scalar) {
        l.accumulate(r.value(0, 0) * self.grad);
      } else {
        detail::accumulate_broadcast(l, self.grad.cwiseProduct(r.value));
      }
    }
    if (r.requires_grad) {
      if (l_scalar) {
        r.accumulate(l.value(0, 0) * self.grad);
      } else {
        detail::accumulate_broadcast(r, self.grad.cwiseProduct(l.value));
      }
    }
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar c) {
  Matrix<Scalar> y = c * x.value();
  return make_result<Scalar>(std::move(y), {x}, [c](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (in.requires_grad) in.accumulate(c * self.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, Scalar c) {
  Matrix<Scalar> y = (x.value().array() + c).matrix();
  return make_result<Scalar>(std::move(y), {x}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (in.requires_grad) in.accumulate(self.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> neg(const Tensor<Scalar>& x) {
  return scale(x, Scalar(-1));
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& x) { return neg(x); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& x, Scalar c) { return scale(x, c); }
template <typename Scalar>
Tensor<Scalar> operator*(Scalar c, const Tensor<Scalar>& x) { return scale(x, c); }
template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& x, Scalar c) { return add_scalar(x, c); }
template <typename Scalar>
Tensor<Scalar> operator+(Scalar c, const Tensor<Scalar>& x) { return add_scalar(x, c); }

// ---------------------------------------------------------------------------
// Elementwise unary ops

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return detail::stable_sigmoid(v); },
      [](const Matrix<Scalar>&, const Matrix<Scalar>& y) {
        return Matrix<Scalar>((y.array() * (Scalar(1) - y.array())).matrix());
      });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return v > 0 ? v : Scalar(0); },
      [](const Matrix<Scalar>& in, const Matrix<Scalar>&) {
        return Matrix<Scalar>(in.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); }));
      });
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope) {
  return detail::unary(
      x, [slope](Scalar v) { return v > 0 ? v : slope * v; },
      [slope](const Matrix<Scalar>& in, const Matrix<Scalar>&) {
        return Matrix<Scalar>(in.unaryExpr([slope](Scalar v) { return v > 0 ? Scalar(1) : slope; }));
      });
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return std::exp(v); },
      [](const Matrix<Scalar>&, const Matrix<Scalar>& y) { return y; });
}

template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& x) {
  if (x.size() > 0 && !(x.value().minCoeff() > Scalar(0))) {
    throw DomainError("log: argument has entries <= 0 (min " +
                      std::to_string(static_cast<double>(x.value().minCoeff())) + ")");
  }
  return detail::unary(
      x, [](Scalar v) { return std::log(v); },
      [](const Matrix<Scalar>& in, const Matrix<Scalar>&) {
        return Matrix<Scalar>(in.cwiseInverse());
      });
}

template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return detail::stable_softplus(v); },
      [](const Matrix<Scalar>& in, const Matrix<Scalar>&) {
        return Matrix<Scalar>(in.unaryExpr([](Scalar v) { return detail::stable_sigmoid(v); }));
      });
}

/// x^p for strictly positive x.
template <typename Scalar>
Tensor<Scalar> pow(const Tensor<Scalar>& x, Scalar p) {
  if (x.size() > 0 && !(x.value().minCoeff() > Scalar(0))) {
    throw DomainError("pow: base must be positive");
  }
  return detail::unary(
      x, [p](Scalar v) { return std::pow(v, p); },
      [p](const Matrix<Scalar>& in, const Matrix<Scalar>&) {
        return Matrix<Scalar>(in.unaryExpr([p](Scalar v) { return p * std::pow(v, p - Scalar(1)); }));
      });
}

/// Binary entropy (nats) of sigmoid(x), evaluated from the logit so that it
/// stays finite for saturated inputs.
template <typename Scalar>
Tensor<Scalar> binary_entropy_logits(const Tensor<Scalar>& x) {
  return detail::unary(
      x,
      [](Scalar v) {
        const Scalar p = detail::stable_sigmoid(v);
        return p * detail::stable_softplus(-v) + (Scalar(1) - p) * detail::stable_softplus(v);
      },
      [](const Matrix<Scalar>& in, const Matrix<Scalar>&) {
        return Matrix<Scalar>(in.unaryExpr([](Scalar v) {
          const Scalar p = detail::stable_sigmoid(v);
          return -v * p * (Scalar(1) - p);
        }));
      });
}

// ---------------------------------------------------------------------------
// Reductions. axis 0 collapses rows (result 1 x cols), axis 1 collapses
// columns (result rows x 1).

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  detail::require_nonempty(x, "sum");
  Matrix<Scalar> y = Matrix<Scalar>::Constant(1, 1, x.value().sum());
  return make_result<Scalar>(std::move(y), {x}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (in.requires_grad)
      in.accumulate(Matrix<Scalar>::Constant(in.value.rows(), in.value.cols(), self.grad(0, 0)));
  });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x, int axis) {
  detail::require_nonempty(x, "sum");
  if (axis != 0 && axis != 1) throw ContractError("sum: axis must be 0 or 1");
  Matrix<Scalar> y = axis == 0 ? Matrix<Scalar>(x.value().colwise().sum())
                               : Matrix<Scalar>(x.value().rowwise().sum());
  return make_result<Scalar>(std::move(y), {x}, [axis](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    if (axis == 0) {
      in.accumulate(self.grad.replicate(in.value.rows(), 1));
    } else {
      in.accumulate(self.grad.replicate(1, in.value.cols()));
    }
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  detail::require_nonempty(x, "mean");
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.size()));
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x, int axis) {
  detail::require_nonempty(x, "mean");
  const Index n = axis == 0 ? x.rows() : x.cols();
  return scale(sum(x, axis), Scalar(1) / static_cast<Scalar>(n));
}

/// Maximum; the gradient flows to the first maximal entry.
template <typename Scalar>
Tensor<Scalar> max(const Tensor<Scalar>& x) {
  detail::require_nonempty(x, "max");
  Index r = 0, c = 0;
  const Scalar m = x.value().maxCoeff(&r, &c);
  return make_result<Scalar>(Matrix<Scalar>::Constant(1, 1, m), {x},
                             [r, c](detail::Node<Scalar>& self) {
                               auto& in = self.input(0);
                               if (!in.requires_grad) return;
                               Matrix<Scalar> g = Matrix<Scalar>::Zero(in.value.rows(), in.value.cols());
                               g(r, c) = self.grad(0, 0);
                               in.accumulate(g);
                             });
}

template <typename Scalar>
Tensor<Scalar> max(const Tensor<Scalar>& x, int axis) {
  detail::require_nonempty(x, "max");
  if (axis != 0 && axis != 1) throw ContractError("max: axis must be 0 or 1");
  const auto& v = x.value();
  const Index n = axis == 0 ? v.cols() : v.rows();
  std::vector<Index> arg(static_cast<std::size_t>(n));
  Matrix<Scalar> y = axis == 0 ? Matrix<Scalar>(1, n) : Matrix<Scalar>(n, 1);
  for (Index k = 0; k < n; ++k) {
    Index at = 0;
    if (axis == 0) {
      y(0, k) = v.col(k).maxCoeff(&at);
    } else {
      y(k, 0) = v.row(k).maxCoeff(&at);
    }
    arg[static_cast<std::size_t>(k)] = at;
  }
  return make_result<Scalar>(std::move(y), {x}, [axis, arg](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    Matrix<Scalar> g = Matrix<Scalar>::Zero(in.value.rows(), in.value.cols());
    for (std::size_t k = 0; k < arg.size(); ++k) {
      const Index kk = static_cast<Index>(k);
      if (axis == 0) {
        g(arg[k], kk) = self.grad(0, kk);
      } else {
        g(kk, arg[k]) = self.grad(kk, 0);
      }
    }
    in.accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& x, Index row0, Index nrows, Index col0, Index ncols) {
  if (row0 < 0 || col0 < 0 || nrows < 0 || ncols < 0 || row0 + nrows > x.rows() ||
      col0 + ncols > x.cols()) {
    throw DimensionError("slice: block out of range of " + x.shape_string());
  }
  Matrix<Scalar> y = x.value().block(row0, col0, nrows, ncols);
  return make_result<Scalar>(std::move(y), {x}, [=](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    Matrix<Scalar> g = Matrix<Scalar>::Zero(in.value.rows(), in.value.cols());
    g.block(row0, col0, nrows, ncols) = self.grad;
    in.accumulate(g);
  });
}

template <typename Scalar>
Tensor<Scalar> pick(const Tensor<Scalar>& x, Index r, Index c) {
  return slice(x, r, 1, c, 1);
}

/// Stacks a on top of b.
template <typename Scalar>
Tensor<Scalar> concat_rows(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column counts differ for " + a.shape_string() + " and " +
                         b.shape_string());
  }
  Matrix<Scalar> y(a.rows() + b.rows(), a.cols());
  y << a.value(), b.value();
  const Index split = a.rows();
  return make_result<Scalar>(std::move(y), {a, b}, [split](detail::Node<Scalar>& self) {
    auto& top = self.input(0);
    auto& bottom = self.input(1);
    if (top.requires_grad) top.accumulate(self.grad.topRows(split));
    if (bottom.requires_grad) bottom.accumulate(self.grad.bottomRows(self.grad.rows() - split));
  });
}

/// Places a to the left of b.
template <typename Scalar>
Tensor<Scalar> concat_cols(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ for " + a.shape_string() + " and " +
                         b.shape_string());
  }
  Matrix<Scalar> y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  const Index split = a.cols();
  return make_result<Scalar>(std::move(y), {a, b}, [split](detail::Node<Scalar>& self) {
    auto& left = self.input(0);
    auto& right = self.input(1);
    if (left.requires_grad) left.accumulate(self.grad.leftCols(split));
    if (right.requires_grad) right.accumulate(self.grad.rightCols(self.grad.cols() - split));
  });
}

/// Adds a 1 x c row to every row of x (bias broadcast).
template <typename Scalar>
Tensor<Scalar> add_rowwise(const Tensor<Scalar>& x, const Tensor<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw DimensionError("add_rowwise: row " + row.shape_string() + " does not match " +
                         x.shape_string());
  }
  Matrix<Scalar> y = x.value().rowwise() + row.value().row(0);
  return make_result<Scalar>(std::move(y), {x, row}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    auto& r = self.input(1);
    if (in.requires_grad) in.accumulate(self.grad);
    if (r.requires_grad) r.accumulate(self.grad.colwise().sum());
  });
}

/// diag(col) * x for an r x 1 column.
template <typename Scalar>
Tensor<Scalar> scale_rows(const Tensor<Scalar>& x, const Tensor<Scalar>& col) {
  if (col.cols() != 1 || col.rows() != x.rows()) {
    throw DimensionError("scale_rows: column " + col.shape_string() + " does not match " +
                         x.shape_string());
  }
  Matrix<Scalar> y = col.value().col(0).asDiagonal() * x.value();
  return make_result<Scalar>(std::move(y), {x, col}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    auto& c = self.input(1);
    if (in.requires_grad) in.accumulate(c.value.col(0).asDiagonal() * self.grad);
    if (c.requires_grad) c.accumulate(self.grad.cwiseProduct(in.value).rowwise().sum());
  });
}

/// x * diag(row) for a 1 x c row.
template <typename Scalar>
Tensor<Scalar> scale_cols(const Tensor<Scalar>& x, const Tensor<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw DimensionError("scale_cols: row " + row.shape_string() + " does not match " +
                         x.shape_string());
  }
  Matrix<Scalar> y = x.value() * row.value().row(0).asDiagonal();
  return make_result<Scalar>(std::move(y), {x, row}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    auto& r = self.input(1);
    if (in.requires_grad) in.accumulate(self.grad * r.value.row(0).asDiagonal());
    if (r.requires_grad) r.accumulate(self.grad.cwiseProduct(in.value).colwise().sum());
  });
}

/// Expands a 1 x n(n-1)/2 row of upper-triangular entries (row-major order
/// (0,1), (0,2), ..., (n-2,n-1)) into a symmetric n x n matrix with zero
/// diagonal.
template <typename Scalar>
Tensor<Scalar> mirror_upper(const Tensor<Scalar>& upper, Index n) {
  if (upper.rows() != 1 || upper.cols() != n * (n - 1) / 2) {
    throw DimensionError("mirror_upper: expected 1x" + std::to_string(n * (n - 1) / 2) +
                         " for n=" + std::to_string(n) + ", got " + upper.shape_string());
  }
  Matrix<Scalar> y = Matrix<Scalar>::Zero(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j, ++k) {
      y(i, j) = upper.value()(0, k);
      y(j, i) = upper.value()(0, k);
    }
  }
  return make_result<Scalar>(std::move(y), {upper}, [n](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    Matrix<Scalar> g(1, in.value.cols());
    Index k = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j, ++k) g(0, k) = self.grad(i, j) + self.grad(j, i);
    }
    in.accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// Row-wise softmax family

template <typename Scalar>
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Softmax over each row restricted to entries where `allowed` is true;
/// disallowed entries get probability 0. Every row needs one allowed entry.
template <typename Scalar>
Tensor<Scalar> masked_softmax_rows(const Tensor<Scalar>& x, const BoolMatrix<Scalar>& allowed) {
  if (allowed.rows() != x.rows() || allowed.cols() != x.cols()) {
    throw DimensionError("masked_softmax_rows: mask shape does not match " + x.shape_string());
  }
  const auto& v = x.value();
  Matrix<Scalar> y = Matrix<Scalar>::Zero(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < v.cols(); ++j)
      if (allowed(i, j)) m = std::max(m, v(i, j));
    if (m == -std::numeric_limits<Scalar>::infinity()) {
      throw ContractError("masked_softmax_rows: row " + std::to_string(i) + " has no allowed entry");
    }
    Scalar z = 0;
    for (Index j = 0; j < v.cols(); ++j) {
      if (allowed(i, j)) {
        y(i, j) = std::exp(v(i, j) - m);
        z += y(i, j);
      }
    }
    y.row(i) /= z;
  }
  return make_result<Scalar>(std::move(y), {x}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    const auto& p = self.value;
    Matrix<Scalar> inner = self.grad.cwiseProduct(p).rowwise().sum();
    in.accumulate(p.cwiseProduct(self.grad - inner.replicate(1, p.cols())));
  });
}

template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& x) {
  return masked_softmax_rows(x, BoolMatrix<Scalar>::Constant(x.rows(), x.cols(), true));
}

template <typename Scalar>
Tensor<Scalar> log_softmax_rows(const Tensor<Scalar>& x) {
  const auto& v = x.value();
  Matrix<Scalar> y(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    const Scalar m = v.row(i).maxCoeff();
    const Scalar lse = m + std::log((v.row(i).array() - m).exp().sum());
    y.row(i) = (v.row(i).array() - lse).matrix();
  }
  return make_result<Scalar>(std::move(y), {x}, [](detail::Node<Scalar>& self) {
    auto& in = self.input(0);
    if (!in.requires_grad) return;
    Matrix<Scalar> p = self.value.array().exp().matrix();
    Matrix<Scalar> gsum = self.grad.rowwise().sum();
    in.accumulate(self.grad - p.cwiseProduct(gsum.replicate(1, p.cols())));
  });
}

/// Negative log-likelihood of `label` under softmax(logits) for a 1 x C row.
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits, Index label) {
  if (logits.rows() != 1 || label < 0 || label >= logits.cols()) {
    throw DimensionError("cross_entropy: label " + std::to_string(label) +
                         " invalid for logits " + logits.shape_string());
  }
  return neg(pick(log_softmax_rows(logits), 0, label));
}

}  // namespace mmgnn::ad
