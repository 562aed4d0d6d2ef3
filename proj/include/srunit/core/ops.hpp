#pragma once

#include <cmath>
#include <limits>

#include "srunit/core/autodiff.hpp"

// Differentiable elementwise, reduction and matrix operations on Var.

namespace srunit {

namespace detail {

template <typename Scalar>
inline bool wants(const Node<Scalar>& n, size_t i) {
  return n.parents[i]->requires_grad;
}

template <typename Scalar>
inline auto& pgrad(Node<Scalar>& n, size_t i) {
  return n.parents[i]->grad_buffer();
}

/// Unary elementwise op with derivative expressed through (input, output).
template <typename Scalar, typename F, typename DF>
Var<Scalar> unary(const Var<Scalar>& a, F f, DF df) {
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec().unaryExpr(f);
  Tensor<Scalar> saved = out;
  return make_op<Scalar>(std::move(out), {a}, [df, saved = std::move(saved)](Node<Scalar>& n) {
    const auto& x = n.parents[0]->value.vec();
    auto& g = pgrad(n, 0);
    for (Index i = 0; i < g.size(); ++i) g[i] += n.grad[i] * df(x[i], saved.vec()[i]);
  });
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> constant(Tensor<Scalar> t) {
  return Var<Scalar>(std::move(t), false);
}

template <typename Scalar>
Var<Scalar> parameter(Tensor<Scalar> t) {
  return Var<Scalar>(std::move(t), true);
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec() + b.value().vec();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    if (detail::wants(n, 0)) detail::pgrad(n, 0) += n.grad;
    if (detail::wants(n, 1)) detail::pgrad(n, 1) += n.grad;
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec() - b.value().vec();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    if (detail::wants(n, 0)) detail::pgrad(n, 0) += n.grad;
    if (detail::wants(n, 1)) detail::pgrad(n, 1) -= n.grad;
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec().cwiseProduct(b.value().vec());
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    if (detail::wants(n, 0)) detail::pgrad(n, 0) += n.grad.cwiseProduct(n.parents[1]->value.vec());
    if (detail::wants(n, 1)) detail::pgrad(n, 1) += n.grad.cwiseProduct(n.parents[0]->value.vec());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec() * s;
  return make_op<Scalar>(std::move(out), {a}, [s](Node<Scalar>& n) {
    detail::pgrad(n, 0) += n.grad * s;
  });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec().array() + s;
  return make_op<Scalar>(std::move(out), {a}, [](Node<Scalar>& n) { detail::pgrad(n, 0) += n.grad; });
}

/// a * c for a constant tensor c (no gradient to c).
template <typename Scalar>
Var<Scalar> mul_const(const Var<Scalar>& a, const Tensor<Scalar>& c) {
  require_same_shape(a.shape(), c.shape(), "mul_const");
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec().cwiseProduct(c.vec());
  return make_op<Scalar>(std::move(out), {a}, [c](Node<Scalar>& n) {
    detail::pgrad(n, 0) += n.grad.cwiseProduct(c.vec());
  });
}

template <typename Scalar>
Var<Scalar> add_const(const Var<Scalar>& a, const Tensor<Scalar>& c) {
  require_same_shape(a.shape(), c.shape(), "add_const");
  Tensor<Scalar> out(a.shape());
  out.vec() = a.value().vec() + c.vec();
  return make_op<Scalar>(std::move(out), {a}, [](Node<Scalar>& n) { detail::pgrad(n, 0) += n.grad; });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return mul(a, b); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar s) { return scale(a, s); }
template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) { return scale(a, s); }

template <typename Scalar>
Var<Scalar> neg(const Var<Scalar>& a) { return scale(a, Scalar(-1)); }

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  return detail::unary(a, [](Scalar x) { return x * x; }, [](Scalar x, Scalar) { return Scalar(2) * x; });
}

template <typename Scalar>
Var<Scalar> sqrt(const Var<Scalar>& a) {
  return detail::unary(
      a, [](Scalar x) { return std::sqrt(x); },
      [](Scalar, Scalar y) { return y > Scalar(0) ? Scalar(0.5) / y : Scalar(0); });
}

template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& a) {
  return detail::unary(
      a, [](Scalar x) { return std::abs(x); },
      [](Scalar x, Scalar) { return x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0)); });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  return detail::unary(a, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  return detail::unary(a, [](Scalar x) { return std::log(x); }, [](Scalar x, Scalar) { return Scalar(1) / x; });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  return detail::unary(
      a, [](Scalar x) { return std::tanh(x); }, [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  return detail::unary(
      a, [](Scalar x) { return x > Scalar(0) ? x : Scalar(0); },
      [](Scalar x, Scalar) { return x > Scalar(0) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& a, Scalar slope) {
  return detail::unary(
      a, [slope](Scalar x) { return x > Scalar(0) ? x : slope * x; },
      [slope](Scalar x, Scalar) { return x > Scalar(0) ? Scalar(1) : slope; });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Tensor<Scalar> out = Tensor<Scalar>::scalar(a.value().vec().sum());
  return make_op<Scalar>(std::move(out), {a}, [](Node<Scalar>& n) {
    detail::pgrad(n, 0).array() += n.grad[0];
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  const Index count = a.value().numel();
  if (count == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(count));
}

/// Sum over every dimension except the first: [N, ...] -> [N].
template <typename Scalar>
Var<Scalar> sum_per_sample(const Var<Scalar>& a) {
  const Index rows = a.shape()[0];
  const Index cols = a.value().numel() / rows;
  Tensor<Scalar> out(Shape{rows});
  typename Tensor<Scalar>::ConstMatrixMap m(a.value().data(), rows, cols);
  out.vec() = m.rowwise().sum();
  return make_op<Scalar>(std::move(out), {a}, [rows, cols](Node<Scalar>& n) {
    typename Tensor<Scalar>::MatrixMap g(detail::pgrad(n, 0).data(), rows, cols);
    g.colwise() += n.grad;
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, const Shape& shape) {
  Tensor<Scalar> out = a.value().reshaped(shape);
  return make_op<Scalar>(std::move(out), {a}, [](Node<Scalar>& n) { detail::pgrad(n, 0) += n.grad; });
}

/// Weighted sum of a list of scalar Vars.
template <typename Scalar>
Var<Scalar> weighted_sum(const VarList<Scalar>& terms, const std::vector<Scalar>& weights) {
  if (terms.empty()) return Var<Scalar>::scalar(Scalar(0));
  Var<Scalar> acc = scale(terms[0], weights[0]);
  for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, scale(terms[i], weights[i]));
  return acc;
}

// ---------------------------------------------------------------------------
// Matrix operations on rank-2 tensors.

/// A (m x k) * B (k x n).
template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  a.value().require_rank(2);
  b.value().require_rank(2);
  if (a.shape()[1] != b.shape()[0])
    throw DimensionError("matmul: " + a.shape().str() + " * " + b.shape().str());
  Tensor<Scalar> out(Shape{a.shape()[0], b.shape()[1]});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    const auto& A = n.parents[0]->value;
    const auto& B = n.parents[1]->value;
    typename Tensor<Scalar>::ConstMatrixMap G(n.grad.data(), A.shape()[0], B.shape()[1]);
    if (detail::wants(n, 0)) {
      typename Tensor<Scalar>::MatrixMap gA(detail::pgrad(n, 0).data(), A.shape()[0], A.shape()[1]);
      gA.noalias() += G * B.matrix().transpose();
    }
    if (detail::wants(n, 1)) {
      typename Tensor<Scalar>::MatrixMap gB(detail::pgrad(n, 1).data(), B.shape()[0], B.shape()[1]);
      gB.noalias() += A.matrix().transpose() * G;
    }
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  a.value().require_rank(2);
  const Index rows = a.shape()[0], cols = a.shape()[1];
  Tensor<Scalar> out(Shape{cols, rows});
  out.matrix() = a.value().matrix().transpose();
  return make_op<Scalar>(std::move(out), {a}, [rows, cols](Node<Scalar>& n) {
    typename Tensor<Scalar>::MatrixMap g(detail::pgrad(n, 0).data(), rows, cols);
    typename Tensor<Scalar>::ConstMatrixMap G(n.grad.data(), cols, rows);
    g += G.transpose();
  });
}

/// A (m x n) + b broadcast over rows, b of shape [n].
template <typename Scalar>
Var<Scalar> add_row_bias(const Var<Scalar>& a, const Var<Scalar>& b) {
  a.value().require_rank(2);
  if (b.value().numel() != a.shape()[1]) throw DimensionError("add_row_bias: bias length mismatch");
  Tensor<Scalar> out = a.value();
  out.matrix().rowwise() += b.value().vec().transpose();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    const Index rows = n.value.shape()[0], cols = n.value.shape()[1];
    typename Tensor<Scalar>::ConstMatrixMap G(n.grad.data(), rows, cols);
    if (detail::wants(n, 0)) detail::pgrad(n, 0) += n.grad;
    if (detail::wants(n, 1)) detail::pgrad(n, 1) += G.colwise().sum().transpose();
  });
}

/// Euclidean norm of every row: [m, d] -> [m]. The derivative at a zero row is taken as 0.
template <typename Scalar>
Var<Scalar> row_norms(const Var<Scalar>& a) {
  a.value().require_rank(2);
  Tensor<Scalar> out(Shape{a.shape()[0]});
  out.vec() = a.value().matrix().rowwise().norm();
  Tensor<Scalar> saved = out;
  return make_op<Scalar>(std::move(out), {a}, [saved = std::move(saved)](Node<Scalar>& n) {
    const auto& A = n.parents[0]->value;
    typename Tensor<Scalar>::MatrixMap g(detail::pgrad(n, 0).data(), A.shape()[0], A.shape()[1]);
    for (Index r = 0; r < A.shape()[0]; ++r) {
      const Scalar norm = saved.vec()[r];
      if (norm > Scalar(0)) g.row(r) += (n.grad[r] / norm) * A.matrix().row(r);
    }
  });
}

/// Projects every row onto the unit sphere: row / max(|row|, eps).
template <typename Scalar>
Var<Scalar> l2_normalize_rows(const Var<Scalar>& a, Scalar eps = Scalar(1e-12)) {
  a.value().require_rank(2);
  const Index rows = a.shape()[0];
  Tensor<Scalar> out = a.value();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> denom(rows);
  for (Index r = 0; r < rows; ++r) {
    denom[r] = std::max(a.value().matrix().row(r).norm(), eps);
    out.matrix().row(r) /= denom[r];
  }
  Tensor<Scalar> saved = out;
  return make_op<Scalar>(std::move(out), {a}, [saved = std::move(saved), denom, eps](Node<Scalar>& n) {
    const Index r_count = saved.shape()[0], cols = saved.shape()[1];
    typename Tensor<Scalar>::ConstMatrixMap G(n.grad.data(), r_count, cols);
    typename Tensor<Scalar>::MatrixMap g(detail::pgrad(n, 0).data(), r_count, cols);
    const auto Y = saved.matrix();
    for (Index r = 0; r < r_count; ++r) {
      if (denom[r] > eps) {
        const Scalar proj = G.row(r).dot(Y.row(r));
        g.row(r) += (G.row(r) - proj * Y.row(r)) / denom[r];
      } else {
        g.row(r) += G.row(r) / eps;
      }
    }
  });
}

/// Row-wise dot products of two [m, d] matrices -> [m].
template <typename Scalar>
Var<Scalar> row_dot(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "row_dot");
  a.value().require_rank(2);
  Tensor<Scalar> out(Shape{a.shape()[0]});
  out.vec() = a.value().matrix().cwiseProduct(b.value().matrix()).rowwise().sum();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    const Index rows = n.parents[0]->value.shape()[0], cols = n.parents[0]->value.shape()[1];
    for (int side = 0; side < 2; ++side) {
      if (!detail::wants(n, side)) continue;
      typename Tensor<Scalar>::MatrixMap g(detail::pgrad(n, side).data(), rows, cols);
      const auto other = n.parents[1 - side]->value.matrix();
      for (Index r = 0; r < rows; ++r) g.row(r) += n.grad[r] * other.row(r);
    }
  });
}

/// Selects rows of a [m, d] matrix.
template <typename Scalar>
Var<Scalar> select_rows(const Var<Scalar>& a, const std::vector<Index>& rows) {
  a.value().require_rank(2);
  const Index cols = a.shape()[1];
  Tensor<Scalar> out(Shape{static_cast<Index>(rows.size()), cols});
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.shape()[0]) throw IndexError("select_rows: row out of range");
    out.matrix().row(static_cast<Index>(i)) = a.value().matrix().row(rows[i]);
  }
  return make_op<Scalar>(std::move(out), {a}, [rows, cols](Node<Scalar>& n) {
    const Index src_rows = n.parents[0]->value.shape()[0];
    typename Tensor<Scalar>::MatrixMap g(detail::pgrad(n, 0).data(), src_rows, cols);
    typename Tensor<Scalar>::ConstMatrixMap G(n.grad.data(), static_cast<Index>(rows.size()), cols);
    for (size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += G.row(static_cast<Index>(i));
  });
}

/// Mean over rows of the (N+1)-way cross-entropy whose logits are
/// [pos_i, neg_i0, ..., neg_i(M-1)] * inv_temperature and whose target is the
/// positive. When `exclude_diagonal`, entry neg_ii is dropped (requires M == m).
template <typename Scalar>
Var<Scalar> contrastive_cross_entropy(const Var<Scalar>& pos, const Var<Scalar>& neg,
                                      Scalar inv_temperature, bool exclude_diagonal) {
  neg.value().require_rank(2);
  const Index m = pos.value().numel();
  const Index cols = neg.shape()[1];
  if (neg.shape()[0] != m) throw DimensionError("contrastive_cross_entropy: row count mismatch");
  if (exclude_diagonal && cols != m)
    throw DimensionError("contrastive_cross_entropy: diagonal exclusion needs a square negative block");

  // Softmax over [pos, neg...] per row, saved for backward.
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  RowMatrix prob(m, cols + 1);
  Scalar total = 0;
  for (Index i = 0; i < m; ++i) {
    Scalar mx = pos.value().vec()[i] * inv_temperature;
    for (Index j = 0; j < cols; ++j) {
      if (exclude_diagonal && j == i) continue;
      mx = std::max(mx, neg.value().at(i, j) * inv_temperature);
    }
    Scalar z = 0;
    prob(i, 0) = std::exp(pos.value().vec()[i] * inv_temperature - mx);
    z += prob(i, 0);
    for (Index j = 0; j < cols; ++j) {
      if (exclude_diagonal && j == i) {
        prob(i, j + 1) = 0;
        continue;
      }
      prob(i, j + 1) = std::exp(neg.value().at(i, j) * inv_temperature - mx);
      z += prob(i, j + 1);
    }
    prob.row(i) /= z;
    total += -(pos.value().vec()[i] * inv_temperature - mx - std::log(z));
  }
  Tensor<Scalar> out = Tensor<Scalar>::scalar(total / static_cast<Scalar>(m));
  return make_op<Scalar>(std::move(out), {pos, neg}, [prob, m, cols, inv_temperature](Node<Scalar>& n) {
    const Scalar g = n.grad[0] * inv_temperature / static_cast<Scalar>(m);
    if (detail::wants(n, 0)) {
      auto& gp = detail::pgrad(n, 0);
      for (Index i = 0; i < m; ++i) gp[i] += g * (prob(i, 0) - Scalar(1));
    }
    if (detail::wants(n, 1)) {
      typename Tensor<Scalar>::MatrixMap gn(detail::pgrad(n, 1).data(), m, cols);
      gn += g * prob.rightCols(cols);
    }
  });
}

/// True if every entry is finite.
template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.vec().allFinite();
}

}  // namespace srunit
