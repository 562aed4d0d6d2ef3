#pragma once

#include <algorithm>
#include <set>
#include <tuple>

#include "srunit/models/layers.hpp"

namespace srunit {

/// Unit-norm embeddings of the patches at `indices` of one feature scale.
template <typename Scalar>
struct PatchEmbeddingSet {
  Index scale_index = 0;
  std::vector<Coord> indices;
  Var<Scalar> embeddings;  // [indices.size(), dim]

  Index size() const { return static_cast<Index>(indices.size()); }
};

/// F_k: per-coordinate projector (affine, ReLU, affine) followed by projection onto
/// the unit sphere. The identity mode passes channel vectors through untouched and is
/// only meant for degenerate test configurations.
template <typename Scalar>
class FeatureHead {
 public:
  enum class Mode { Mlp, Identity };

  FeatureHead(Index scale_index, Index in_channels, Index hidden, Index out_dim, double init_std, Rng& rng)
      : scale_(scale_index), in_(in_channels), out_(out_dim), mode_(Mode::Mlp) {
    w1_ = parameter(random_normal<Scalar>(Shape{in_channels, hidden}, init_std, rng));
    b1_ = parameter(Tensor<Scalar>(Shape{hidden}));
    w2_ = parameter(random_normal<Scalar>(Shape{hidden, out_dim}, init_std, rng));
    b2_ = parameter(Tensor<Scalar>(Shape{out_dim}));
  }

  static FeatureHead identity(Index scale_index, Index channels) { return FeatureHead(scale_index, channels); }

  Index scale_index() const { return scale_; }
  Index input_channels() const { return in_; }
  Index output_dim() const { return out_; }
  Mode mode() const { return mode_; }

  /// Embeds an [m, C] matrix of channel vectors. With `track_params` false the
  /// projector weights are used as constants (no gradient reaches them).
  Var<Scalar> embed(const Var<Scalar>& rows, bool track_params = true) const {
    if (rows.shape().rank() != 2 || rows.shape()[1] != in_)
      throw DimensionError("feature head " + std::to_string(scale_) + " expects " + std::to_string(in_) +
                           " channels, got " + rows.shape().str());
    if (mode_ == Mode::Identity) return rows;
    auto pick = [track_params](const Var<Scalar>& p) { return track_params ? p : p.detach(); };
    Var<Scalar> h = relu(add_row_bias(matmul(rows, pick(w1_)), pick(b1_)));
    Var<Scalar> z = add_row_bias(matmul(h, pick(w2_)), pick(b2_));
    return l2_normalize_rows(z);
  }

  PatchEmbeddingSet<Scalar> extract(const Var<Scalar>& fmap, const std::vector<Coord>& indices,
                                    bool track_params = true) const {
    std::set<std::tuple<Index, Index, Index>> seen;
    for (const auto& c : indices)
      if (!seen.insert({c.n, c.h, c.w}).second) throw InvariantError("duplicate patch coordinate");
    PatchEmbeddingSet<Scalar> out;
    out.scale_index = scale_;
    out.indices = indices;
    out.embeddings = embed(gather_positions(fmap, indices), track_params);
    return out;
  }

  ParamList<Scalar> parameters() const {
    if (mode_ == Mode::Identity) return {};
    return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_}};
  }

 private:
  FeatureHead(Index scale_index, Index channels)
      : scale_(scale_index), in_(channels), out_(channels), mode_(Mode::Identity) {}

  Index scale_;
  Index in_;
  Index out_;
  Mode mode_;
  Var<Scalar> w1_, b1_, w2_, b2_;
};

template <typename Scalar>
using HeadList = std::vector<FeatureHead<Scalar>>;

/// One head per selected scale of `g`, sized to that scale's channels.
template <typename Scalar, typename Generator>
HeadList<Scalar> make_feature_heads(const Generator& g, Index hidden, Index out_dim, double init_std, Rng& rng) {
  HeadList<Scalar> heads;
  for (Index k = 1; k <= g.K(); ++k) heads.emplace_back(k, g.channels_after(k), hidden, out_dim, init_std, rng);
  return heads;
}

template <typename Scalar>
ParamList<Scalar> head_parameters(const HeadList<Scalar>& heads) {
  ParamList<Scalar> out;
  for (const auto& h : heads)
    for (auto& p : h.parameters()) out.push_back({"head" + std::to_string(h.scale_index()) + "." + p.name, p.var});
  return out;
}

/// Draws `count` distinct coordinates of sample `n` uniformly without replacement
/// (partial Fisher-Yates over the H*W grid).
inline std::vector<Coord> sample_patch_indices(Rng& rng, Index height, Index width, Index count, Index n = 0) {
  const Index total = height * width;
  if (count < 0 || count > total)
    throw ArgumentError("cannot sample " + std::to_string(count) + " patches from " + std::to_string(total) +
                        " positions");
  std::vector<Index> cells(static_cast<size_t>(total));
  for (Index i = 0; i < total; ++i) cells[static_cast<size_t>(i)] = i;
  std::vector<Coord> out;
  out.reserve(static_cast<size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(cells[static_cast<size_t>(i)], cells[static_cast<size_t>(j)]);
    out.push_back({n, cells[static_cast<size_t>(i)] / width, cells[static_cast<size_t>(i)] % width});
  }
  return out;
}

/// Per-sample patch sampling over a batch: `count` coordinates for each of `batch` samples.
inline std::vector<Coord> sample_batch_patch_indices(Rng& rng, Index batch, Index height, Index width, Index count) {
  std::vector<Coord> out;
  for (Index n = 0; n < batch; ++n) {
    auto part = sample_patch_indices(rng, height, width, count, n);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace srunit
