#pragma once

#include <cmath>

#include "srunit/losses/robustness.hpp"
#include "srunit/models/discriminator.hpp"

namespace srunit {

// ---------------------------------------------------------------------------
// E1: standardized self-distance between left and right image halves.

struct DistanceLossParams {
  double mu_x = 0, sigma_x = 1, mu_y = 0, sigma_y = 1;
  /// Take |.| of the bracketed difference (the printed form has none).
  bool absolute = false;

  void validate() const {
    if (!(sigma_x > 0) || !(sigma_y > 0)) throw ArgumentError("distance loss needs sigma_X, sigma_Y > 0");
  }
};

/// Per-sample || L(x) - R(x) ||_1 where L, R are the left and right W/2 columns.
template <typename Scalar>
Var<Scalar> half_l1_distance(const Var<Scalar>& x) {
  x.value().require_rank(4);
  const Index half = x.shape()[3] / 2;
  if (half < 1) throw DimensionError("image too narrow to split into halves");
  const Index h = x.shape()[2], w = x.shape()[3];
  return sum_per_sample(abs(sub(crop(x, 0, 0, h, half), crop(x, 0, w - half, h, half))));
}

/// Mean and standard deviation of half-image L1 distances over a set of images.
template <typename Scalar>
std::pair<double, double> half_distance_stats(const std::vector<Tensor<Scalar>>& images) {
  std::vector<double> d;
  for (const auto& img : images) {
    const auto v = half_l1_distance(constant(img)).value();
    for (Index i = 0; i < v.numel(); ++i) d.push_back(static_cast<double>(v.vec()[i]));
  }
  if (d.empty()) throw ArgumentError("half_distance_stats: no images");
  double mu = 0;
  for (double v : d) mu += v;
  mu /= static_cast<double>(d.size());
  double var = 0;
  for (double v : d) var += (v - mu) * (v - mu);
  var /= static_cast<double>(d.size());
  return {mu, std::sqrt(var)};
}

template <typename Scalar>
Var<Scalar> distance_loss_e1(const Var<Scalar>& x, const Var<Scalar>& gx, const DistanceLossParams& p) {
  p.validate();
  require_same_shape(x.shape(), gx.shape(), "distance_loss_e1");
  const Var<Scalar> src = add_scalar(scale(half_l1_distance(x), Scalar(1 / p.sigma_x)), Scalar(-p.mu_x / p.sigma_x));
  const Var<Scalar> dst = add_scalar(scale(half_l1_distance(gx), Scalar(1 / p.sigma_y)), Scalar(-p.mu_y / p.sigma_y));
  Var<Scalar> diff = sub(src, dst);
  if (p.absolute) diff = abs(diff);
  return mean(diff);
}

// ---------------------------------------------------------------------------
// E2: patch-histogram smoothness.

struct PatchPair {
  Index n = 0;
  Index top1 = 0, left1 = 0;
  Index top2 = 0, left2 = 0;
};

/// `num_patches` random square windows of side `patch` per sample, paired consecutively.
inline std::vector<PatchPair> sample_patch_pairs(Rng& rng, Index batch, Index height, Index width, Index patch,
                                                 Index num_patches = 256) {
  if (patch < 1 || patch > height || patch > width)
    throw ArgumentError("patch size " + std::to_string(patch) + " does not fit the image");
  if (num_patches < 2 || num_patches % 2) throw ArgumentError("num_patches must be an even number >= 2");
  std::vector<PatchPair> pairs;
  for (Index n = 0; n < batch; ++n)
    for (Index i = 0; i < num_patches / 2; ++i) {
      PatchPair p;
      p.n = n;
      p.top1 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(height - patch + 1)));
      p.left1 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(width - patch + 1)));
      p.top2 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(height - patch + 1)));
      p.left2 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(width - patch + 1)));
      pairs.push_back(p);
    }
  return pairs;
}

/// Normalized grayscale histogram of one window with linear (triangular) binning:
/// intensity v in [-1, 1] maps to t = (v + 1) / 2 * bins - 1/2 and splits its unit mass
/// between bins floor(t) and floor(t) + 1 (clamped at the ends). Values at a bin
/// centre land entirely in that bin, so this reduces to the hard histogram there.
template <typename Scalar>
Var<Scalar> soft_gray_histogram(const Var<Scalar>& x, Index n, Index top, Index left, Index size, Index bins) {
  x.value().require_rank(4);
  const auto& v = x.value();
  const Index c = v.c(), H = v.h(), W = v.w();
  if (c != 1 && c != 3) throw DimensionError("histogram expects 1 or 3 channels");
  if (top < 0 || left < 0 || top + size > H || left + size > W || n < 0 || n >= v.n())
    throw IndexError("histogram window outside image");
  static constexpr double kLuma[3] = {0.299, 0.587, 0.114};
  struct Entry {
    Index lo;
    Scalar w_lo, slope;  // mass at lo, d(mass at lo)/d(gray) * bins factor
  };
  const Scalar per_px = Scalar(1) / static_cast<Scalar>(size * size);
  Tensor<Scalar> out(Shape{bins});
  std::vector<Entry> entries;
  entries.reserve(static_cast<size_t>(size * size));
  for (Index i = 0; i < size; ++i)
    for (Index j = 0; j < size; ++j) {
      double gray = 0;
      if (c == 1) {
        gray = v.at(n, 0, top + i, left + j);
      } else {
        for (Index ch = 0; ch < 3; ++ch) gray += kLuma[ch] * v.at(n, ch, top + i, left + j);
      }
      const double t = (gray + 1.0) / 2.0 * static_cast<double>(bins) - 0.5;
      Entry e{};
      if (t <= 0) {
        e = {0, Scalar(1), Scalar(0)};
      } else if (t >= static_cast<double>(bins - 1)) {
        e = {bins - 1, Scalar(1), Scalar(0)};
      } else {
        const Index lo = static_cast<Index>(std::floor(t));
        const double frac = t - static_cast<double>(lo);
        e = {lo, static_cast<Scalar>(1 - frac), Scalar(1)};
      }
      entries.push_back(e);
      out.vec()[e.lo] += e.w_lo * per_px;
      if (e.w_lo < Scalar(1)) out.vec()[e.lo + 1] += (Scalar(1) - e.w_lo) * per_px;
    }
  return make_op<Scalar>(std::move(out), {x}, [=](Node<Scalar>& node) {
    auto& g = detail::pgrad(node, 0);
    const Scalar dt = static_cast<Scalar>(bins) / Scalar(2);
    size_t k = 0;
    for (Index i = 0; i < size; ++i)
      for (Index j = 0; j < size; ++j, ++k) {
        const Entry& e = entries[k];
        if (e.slope == Scalar(0)) continue;
        // mass(lo) = 1 - frac, mass(lo+1) = frac, d frac / d gray = bins / 2.
        const Scalar dgray = (node.grad[e.lo + 1] - node.grad[e.lo]) * dt * per_px;
        if (c == 1) {
          g[((n * c) * H + top + i) * W + left + j] += dgray;
        } else {
          for (Index ch = 0; ch < 3; ++ch)
            g[((n * c + ch) * H + top + i) * W + left + j] += dgray * static_cast<Scalar>(kLuma[ch]);
        }
      }
  });
}

template <typename Scalar>
Var<Scalar> histogram_distance(const Var<Scalar>& x, Index n, Index t1, Index l1, Index t2, Index l2, Index size,
                               Index bins) {
  return sum(abs(sub(soft_gray_histogram(x, n, t1, l1, size, bins), soft_gray_histogram(x, n, t2, l2, size, bins))));
}

/// Mean over pairs of | d(x1, x2) - d(G(x1), G(x2)) |.
template <typename Scalar>
Var<Scalar> smoothness_loss_e2(const Var<Scalar>& x, const Var<Scalar>& gx, const std::vector<PatchPair>& pairs,
                               Index patch, Index bins = 16) {
  require_same_shape(x.shape(), gx.shape(), "smoothness_loss_e2");
  if (pairs.empty()) throw ArgumentError("smoothness_loss_e2: no pairs");
  if (bins < 2) throw ArgumentError("smoothness_loss_e2: need at least 2 bins");
  VarList<Scalar> terms;
  for (const auto& p : pairs) {
    const auto dx = histogram_distance(x, p.n, p.top1, p.left1, p.top2, p.left2, patch, bins);
    const auto dg = histogram_distance(gx, p.n, p.top1, p.left1, p.top2, p.left2, patch, bins);
    terms.push_back(abs(sub(dx, dg)));
  }
  return weighted_sum(terms, std::vector<Scalar>(terms.size(), Scalar(1) / static_cast<Scalar>(terms.size())));
}

// ---------------------------------------------------------------------------
// E5: direct semantics consistency.

/// (1/K) sum_k mean_coords || F_k(G_1^k(x)) - F_k(G_1^k(G(x))) ||_2, with
/// coords[k-1] the sampled coordinates at scale k.
template <typename Scalar>
Var<Scalar> semantics_consistency_e5(const GeneratorSlices<Scalar>& g, const HeadList<Scalar>& heads,
                                     const Var<Scalar>& x, const std::vector<std::vector<Coord>>& coords,
                                     bool train_heads = false, const Var<Scalar>& gx_in = {}) {
  const Index K = g.K();
  if (static_cast<Index>(heads.size()) != K || static_cast<Index>(coords.size()) != K)
    throw ArgumentError("semantics_consistency_e5 needs one head and one coordinate set per scale");
  const Var<Scalar> gx = gx_in.defined() ? gx_in : g.forward(x);
  const auto fx = g.encode(x, K);
  const auto fg = g.encode(gx, K);
  VarList<Scalar> terms;
  for (Index k = 0; k < K; ++k) {
    const auto a = heads[k].extract(fx[k], coords[k], train_heads).embeddings;
    const auto b = heads[k].extract(fg[k], coords[k], train_heads).embeddings;
    terms.push_back(mean(row_norms(sub(a, b))));
  }
  return weighted_sum(terms, std::vector<Scalar>(terms.size(), Scalar(1) / static_cast<Scalar>(K)));
}

// ---------------------------------------------------------------------------
// E6: discriminator input-gradient (Lipschitz) penalty.

enum class LipschitzPoint {
  ChannelMean,  // evaluate at the per-sample, per-channel spatial mean image
  Sample,       // evaluate at x and G(x) themselves
};

template <typename Scalar>
Tensor<Scalar> channel_mean_image(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  for (Index n = 0; n < x.n(); ++n)
    for (Index c = 0; c < x.c(); ++c) out.image(n).row(c).setConstant(x.image(n).row(c).mean());
  return out;
}

/// E_x[ ||grad D at x_bar||_2 + ||grad D at mean G(x)||_2 ], the gradient being of
/// each sample's mean score with respect to the evaluation point. The evaluation
/// points are constants; the gradient flows to the discriminator parameters.
template <typename Scalar>
Var<Scalar> lipschitz_penalty_e6(const PatchDiscriminator<Scalar>& d, const Tensor<Scalar>& x, const Tensor<Scalar>& gx,
                                 LipschitzPoint point = LipschitzPoint::ChannelMean) {
  require_same_shape(x.shape(), gx.shape(), "lipschitz_penalty_e6");
  auto norm_at = [&](const Tensor<Scalar>& at) {
    const Tensor<Scalar> p = point == LipschitzPoint::ChannelMean ? channel_mean_image(at) : at;
    const Var<Scalar> grad = d.input_gradient(constant(p));
    return mean(row_norms(reshape(grad, Shape{p.n(), p.numel() / p.n()})));
  };
  return add(norm_at(x), norm_at(gx));
}

}  // namespace srunit
