#pragma once

#include <array>
#include <cmath>
#include <memory>

#include "srunit/core/ops.hpp"

// Differentiable image operations on NCHW tensors.

namespace srunit {

struct ConvGeometry {
  Index kernel = 3;
  Index stride = 1;
  Index pad = 0;  // zero padding on every side

  Index out_extent(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

/// Spatial coordinate of one patch (one feature-map position of one sample).
struct Coord {
  Index n = 0;
  Index h = 0;
  Index w = 0;
  bool operator==(const Coord& o) const { return n == o.n && h == o.h && w == o.w; }
};

namespace detail {

/// Caffe-style im2col for one image: cols is (C*k*k) x (Ho*Wo) row-major.
template <typename Scalar>
void im2col(const Scalar* img, Index channels, Index height, Index width, const ConvGeometry& g,
            Scalar* cols) {
  const Index ho = g.out_extent(height), wo = g.out_extent(width);
  const Index k = g.kernel;
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = img + c * height * width;
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj, ++row) {
        Scalar* dst = cols + row * ho * wo;
        for (Index oh = 0; oh < ho; ++oh) {
          const Index ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= height) {
            std::fill(dst + oh * wo, dst + (oh + 1) * wo, Scalar(0));
            continue;
          }
          const Scalar* src = plane + ih * width;
          for (Index ow = 0; ow < wo; ++ow) {
            const Index iw = ow * g.stride - g.pad + kj;
            dst[oh * wo + ow] = (iw >= 0 && iw < width) ? src[iw] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters (accumulates) cols back into an image.
template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, const ConvGeometry& g,
            Scalar* img) {
  const Index ho = g.out_extent(height), wo = g.out_extent(width);
  const Index k = g.kernel;
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = img + c * height * width;
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj, ++row) {
        const Scalar* src = cols + row * ho * wo;
        for (Index oh = 0; oh < ho; ++oh) {
          const Index ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= height) continue;
          Scalar* dst = plane + ih * width;
          for (Index ow = 0; ow < wo; ++ow) {
            const Index iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < width) dst[iw] += src[oh * wo + ow];
          }
        }
      }
    }
  }
}

template <typename Scalar>
using RowMat = typename Tensor<Scalar>::RowMatrix;

/// out[n] = W * im2col(x[n]) for all n, W viewed as Cout x (Cin*k*k).
template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const ConvGeometry& g) {
  const Index n = x.n(), cin = x.c(), h = x.h(), w = x.w();
  const Index cout = weight.shape()[0];
  const Index ho = g.out_extent(h), wo = g.out_extent(w);
  const Index kk = cin * g.kernel * g.kernel;
  Tensor<Scalar> out(Shape{n, cout, ho, wo});
  typename Tensor<Scalar>::ConstMatrixMap wm(weight.data(), cout, kk);
  RowMat<Scalar> cols(kk, ho * wo);
  for (Index i = 0; i < n; ++i) {
    im2col(x.data() + i * cin * h * w, cin, h, w, g, cols.data());
    out.image(i).noalias() = wm * cols;
  }
  return out;
}

/// Adjoint of conv_forward with respect to its input.
template <typename Scalar>
Tensor<Scalar> conv_backward_data(const Tensor<Scalar>& gout, const Tensor<Scalar>& weight,
                                  const Shape& in_shape, const ConvGeometry& g) {
  const Index n = in_shape[0], cin = in_shape[1], h = in_shape[2], w = in_shape[3];
  const Index cout = weight.shape()[0];
  const Index kk = cin * g.kernel * g.kernel;
  Tensor<Scalar> gin(in_shape);
  typename Tensor<Scalar>::ConstMatrixMap wm(weight.data(), cout, kk);
  RowMat<Scalar> cols(kk, gout.h() * gout.w());
  for (Index i = 0; i < n; ++i) {
    cols.noalias() = wm.transpose() * gout.image(i);
    col2im(cols.data(), cin, h, w, g, gin.data() + i * cin * h * w);
  }
  return gin;
}

/// Accumulates the weight gradient sum_n gout[n] * im2col(x[n])^T into gw.
template <typename Scalar>
void conv_backward_weight(const Tensor<Scalar>& x, const Tensor<Scalar>& gout, const ConvGeometry& g,
                          Scalar* gw) {
  const Index n = x.n(), cin = x.c(), h = x.h(), w = x.w();
  const Index cout = gout.c();
  const Index kk = cin * g.kernel * g.kernel;
  typename Tensor<Scalar>::MatrixMap gwm(gw, cout, kk);
  RowMat<Scalar> cols(kk, gout.h() * gout.w());
  for (Index i = 0; i < n; ++i) {
    im2col(x.data() + i * cin * h * w, cin, h, w, g, cols.data());
    gwm.noalias() += gout.image(i) * cols.transpose();
  }
}

inline void check_conv_shapes(const Shape& x, const Shape& weight, const ConvGeometry& g) {
  if (x.rank() != 4) throw DimensionError("conv2d: input must be NCHW, got " + x.str());
  if (weight.rank() != 4 || weight[2] != g.kernel || weight[3] != g.kernel)
    throw DimensionError("conv2d: weight " + weight.str() + " does not match kernel " +
                         std::to_string(g.kernel));
  if (weight[1] != x[1])
    throw DimensionError("conv2d: input has " + std::to_string(x[1]) + " channels, weight expects " +
                         std::to_string(weight[1]));
  if (g.out_extent(x[2]) < 1 || g.out_extent(x[3]) < 1)
    throw DimensionError("conv2d: input " + x.str() + " too small for kernel");
}

}  // namespace detail

/// 2-D convolution (cross-correlation) with zero padding. `bias` may be undefined.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   const ConvGeometry& g) {
  detail::check_conv_shapes(x.shape(), weight.shape(), g);
  Tensor<Scalar> out = detail::conv_forward(x.value(), weight.value(), g);
  const bool has_bias = bias.defined();
  if (has_bias)
    for (Index i = 0; i < out.n(); ++i) out.image(i).colwise() += bias.value().vec();
  VarList<Scalar> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_op<Scalar>(std::move(out), parents, [g, has_bias](Node<Scalar>& n) {
    const auto& X = n.parents[0]->value;
    const auto& W = n.parents[1]->value;
    const Tensor<Scalar> G(n.value.shape(), n.grad);
    if (detail::wants(n, 0))
      detail::pgrad(n, 0) += detail::conv_backward_data(G, W, X.shape(), g).vec();
    if (detail::wants(n, 1)) detail::conv_backward_weight(X, G, g, detail::pgrad(n, 1).data());
    if (has_bias && detail::wants(n, 2)) {
      auto& gb = detail::pgrad(n, 2);
      for (Index i = 0; i < G.n(); ++i) gb += G.image(i).rowwise().sum();
    }
  });
}

/// The input-gradient map of conv2d viewed as a differentiable function of the
/// upstream gradient and the weight: returns conv2d's d(out)/d(input)^T applied to
/// `gout`. Used to build second-order terms (input-gradient penalties).
template <typename Scalar>
Var<Scalar> conv2d_input_grad(const Var<Scalar>& gout, const Var<Scalar>& weight, const Shape& in_shape,
                              const ConvGeometry& g) {
  detail::check_conv_shapes(in_shape, weight.shape(), g);
  Tensor<Scalar> out = detail::conv_backward_data(gout.value(), weight.value(), in_shape, g);
  return make_op<Scalar>(std::move(out), {gout, weight}, [g](Node<Scalar>& n) {
    const Tensor<Scalar> L(n.value.shape(), n.grad);
    const auto& G = n.parents[0]->value;
    const auto& W = n.parents[1]->value;
    if (detail::wants(n, 0)) detail::pgrad(n, 0) += detail::conv_forward(L, W, g).vec();
    if (detail::wants(n, 1)) detail::conv_backward_weight(L, G, g, detail::pgrad(n, 1).data());
  });
}

enum class PadMode { Zero, Reflect };

/// Pads H and W by `pad` on each side.
template <typename Scalar>
Var<Scalar> pad2d(const Var<Scalar>& x, Index pad, PadMode mode) {
  x.value().require_rank(4);
  const Index n = x.value().n(), c = x.value().c(), h = x.value().h(), w = x.value().w();
  if (mode == PadMode::Reflect && (pad >= h || pad >= w))
    throw DimensionError("reflect pad " + std::to_string(pad) + " too large for " + x.shape().str());
  const Index ph = h + 2 * pad, pw = w + 2 * pad;
  // Source index for every padded position (-1 = zero).
  auto src_of = [mode, pad](Index i, Index extent) -> Index {
    Index s = i - pad;
    if (s >= 0 && s < extent) return s;
    if (mode == PadMode::Zero) return -1;
    if (s < 0) s = -s;
    if (s >= extent) s = 2 * (extent - 1) - s;
    return s;
  };
  std::vector<Index> src_h(ph), src_w(pw);
  for (Index i = 0; i < ph; ++i) src_h[i] = src_of(i, h);
  for (Index j = 0; j < pw; ++j) src_w[j] = src_of(j, w);
  Tensor<Scalar> out(Shape{n, c, ph, pw});
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch)
      for (Index i = 0; i < ph; ++i)
        for (Index j = 0; j < pw; ++j)
          out.at(b, ch, i, j) =
              (src_h[i] < 0 || src_w[j] < 0) ? Scalar(0) : x.value().at(b, ch, src_h[i], src_w[j]);
  return make_op<Scalar>(std::move(out), {x}, [src_h, src_w, n, c, h, w, ph, pw](Node<Scalar>& node) {
    auto& g = detail::pgrad(node, 0);
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch)
        for (Index i = 0; i < ph; ++i) {
          if (src_h[i] < 0) continue;
          for (Index j = 0; j < pw; ++j) {
            if (src_w[j] < 0) continue;
            g[((b * c + ch) * h + src_h[i]) * w + src_w[j]] += node.grad[((b * c + ch) * ph + i) * pw + j];
          }
        }
  });
}

/// Nearest-neighbour upsampling by an integer factor.
template <typename Scalar>
Var<Scalar> upsample_nearest(const Var<Scalar>& x, Index factor) {
  x.value().require_rank(4);
  const Index n = x.value().n(), c = x.value().c(), h = x.value().h(), w = x.value().w();
  Tensor<Scalar> out(Shape{n, c, h * factor, w * factor});
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch)
      for (Index i = 0; i < h * factor; ++i)
        for (Index j = 0; j < w * factor; ++j) out.at(b, ch, i, j) = x.value().at(b, ch, i / factor, j / factor);
  return make_op<Scalar>(std::move(out), {x}, [n, c, h, w, factor](Node<Scalar>& node) {
    auto& g = detail::pgrad(node, 0);
    const Index H = h * factor, W = w * factor;
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch)
        for (Index i = 0; i < H; ++i)
          for (Index j = 0; j < W; ++j)
            g[((b * c + ch) * h + i / factor) * w + j / factor] += node.grad[((b * c + ch) * H + i) * W + j];
  });
}

/// Per-sample, per-channel normalization over H x W (no affine parameters).
template <typename Scalar>
Var<Scalar> instance_norm(const Var<Scalar>& x, Scalar eps = Scalar(1e-5)) {
  x.value().require_rank(4);
  const Index n = x.value().n(), c = x.value().c();
  const Index plane = x.value().h() * x.value().w();
  Tensor<Scalar> out(x.shape());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(n * c);
  for (Index b = 0; b < n; ++b) {
    auto src = x.value().image(b);
    auto dst = out.image(b);
    for (Index ch = 0; ch < c; ++ch) {
      const Scalar mu = src.row(ch).mean();
      const Scalar var = (src.row(ch).array() - mu).square().mean();
      const Scalar is = Scalar(1) / std::sqrt(var + eps);
      inv_std[b * c + ch] = is;
      dst.row(ch) = (src.row(ch).array() - mu) * is;
    }
  }
  Tensor<Scalar> saved = out;
  return make_op<Scalar>(std::move(out), {x}, [saved = std::move(saved), inv_std, n, c, plane](Node<Scalar>& node) {
    typename Tensor<Scalar>::MatrixMap g(detail::pgrad(node, 0).data(), n * c, plane);
    typename Tensor<Scalar>::ConstMatrixMap G(node.grad.data(), n * c, plane);
    typename Tensor<Scalar>::ConstMatrixMap Y(saved.data(), n * c, plane);
    for (Index r = 0; r < n * c; ++r) {
      const Scalar mg = G.row(r).mean();
      const Scalar mgy = G.row(r).dot(Y.row(r)) / static_cast<Scalar>(plane);
      g.row(r).array() += inv_std[r] * (G.row(r).array() - mg - Y.row(r).array() * mgy);
    }
  });
}

/// Gathers the channel vector at each coordinate: NCHW -> [coords, C].
template <typename Scalar>
Var<Scalar> gather_positions(const Var<Scalar>& fmap, const std::vector<Coord>& coords) {
  fmap.value().require_rank(4);
  const auto& v = fmap.value();
  const Index c = v.c();
  for (const auto& p : coords)
    if (p.n < 0 || p.n >= v.n() || p.h < 0 || p.h >= v.h() || p.w < 0 || p.w >= v.w())
      throw IndexError("patch coordinate (" + std::to_string(p.n) + "," + std::to_string(p.h) + "," +
                       std::to_string(p.w) + ") outside feature map " + v.shape().str());
  Tensor<Scalar> out(Shape{static_cast<Index>(coords.size()), c});
  for (size_t i = 0; i < coords.size(); ++i)
    for (Index ch = 0; ch < c; ++ch) out.at(static_cast<Index>(i), ch) = v.at(coords[i].n, ch, coords[i].h, coords[i].w);
  const Shape in_shape = v.shape();
  return make_op<Scalar>(std::move(out), {fmap}, [coords, in_shape, c](Node<Scalar>& node) {
    auto& g = detail::pgrad(node, 0);
    const Index H = in_shape[2], W = in_shape[3];
    for (size_t i = 0; i < coords.size(); ++i)
      for (Index ch = 0; ch < c; ++ch)
        g[((coords[i].n * c + ch) * H + coords[i].h) * W + coords[i].w] += node.grad[static_cast<Index>(i) * c + ch];
  });
}

/// Sub-window [top, top+height) x [left, left+width) of every image.
template <typename Scalar>
Var<Scalar> crop(const Var<Scalar>& x, Index top, Index left, Index height, Index width) {
  x.value().require_rank(4);
  const auto& v = x.value();
  if (top < 0 || left < 0 || top + height > v.h() || left + width > v.w())
    throw IndexError("crop window outside " + v.shape().str());
  const Index n = v.n(), c = v.c(), H = v.h(), W = v.w();
  Tensor<Scalar> out(Shape{n, c, height, width});
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch)
      for (Index i = 0; i < height; ++i)
        for (Index j = 0; j < width; ++j) out.at(b, ch, i, j) = v.at(b, ch, top + i, left + j);
  return make_op<Scalar>(std::move(out), {x}, [=](Node<Scalar>& node) {
    auto& g = detail::pgrad(node, 0);
    for (Index b = 0; b < n; ++b)
      for (Index ch = 0; ch < c; ++ch)
        for (Index i = 0; i < height; ++i)
          for (Index j = 0; j < width; ++j)
            g[((b * c + ch) * H + top + i) * W + left + j] += node.grad[((b * c + ch) * height + i) * width + j];
  });
}

}  // namespace srunit
