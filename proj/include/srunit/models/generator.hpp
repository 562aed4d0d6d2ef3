#pragma once

#include <string>
#include <vector>

#include "srunit/models/layers.hpp"

namespace srunit {

struct GeneratorConfig {
  std::string arch = "resnet";  // "resnet" or "identity"
  Index in_channels = 3;
  Index out_channels = 3;
  Index ngf = 8;
  Index n_blocks = 2;
  bool norm = true;
  double init_std = 0.02;
  /// Layer indices whose outputs are the K selected features (empty = default choice).
  std::vector<Index> feature_layers;
  /// K for the identity architecture.
  Index identity_scales = 5;
};

/// The generator written as G = G_{K+1} o ... o G_1 over a flat layer list. Slice k
/// (1-based) covers layers [end(k-1), end(k)); G_1 always ends at layer 0, so it is the
/// identity map, and G_{K+1} runs to the last layer.
template <typename Scalar>
class GeneratorSlices {
 public:
  GeneratorSlices(std::vector<LayerPtr<Scalar>> layers, std::vector<Index> feature_ends, Index in_channels)
      : layers_(std::move(layers)), ends_(std::move(feature_ends)), in_channels_(in_channels) {
    if (ends_.empty()) throw ArgumentError("generator needs at least one selected layer");
    if (ends_[0] != 0) throw ArgumentError("the first selected layer must be the input layer (index 0)");
    for (size_t i = 1; i < ends_.size(); ++i)
      if (ends_[i] < ends_[i - 1]) throw ArgumentError("selected layers must be non-decreasing");
    if (ends_.back() > static_cast<Index>(layers_.size()))
      throw ArgumentError("selected layer index past the end of the network");
    ends_.push_back(static_cast<Index>(layers_.size()));

    // Channel count expected at every slice boundary.
    boundary_channels_.assign(ends_.size() + 1, in_channels_);
    Index ch = in_channels_;
    size_t b = 0;
    for (Index l = 0; l <= static_cast<Index>(layers_.size()); ++l) {
      while (b < ends_.size() && ends_[b] == l) boundary_channels_[++b] = ch;
      if (l == static_cast<Index>(layers_.size())) break;
      const Index want = layers_[l]->input_channels();
      if (want >= 0 && want != ch)
        throw DimensionError("layer " + std::to_string(l) + " expects " + std::to_string(want) +
                             " channels but receives " + std::to_string(ch));
      ch = layers_[l]->output_shape(Shape{1, ch, 64, 64})[1];
    }
  }

  /// Number of selected feature scales.
  Index K() const { return static_cast<Index>(ends_.size()) - 1; }
  Index num_slices() const { return K() + 1; }
  Index input_channels() const { return in_channels_; }
  /// Channels of the output of slice i (i in 1..K+1).
  Index channels_after(Index i) const { return boundary_channels_[static_cast<size_t>(i)]; }

  /// G_j( ... G_{i+1}(x)), i.e. the partial composition of slices i+1..j.
  Var<Scalar> slice_forward(Index i, Index j, const Var<Scalar>& x) const {
    if (i < 1 || j > num_slices())
      throw ArgumentError("slice range (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") outside 1.." + std::to_string(num_slices()));
    if (i >= j)
      throw ArgumentError("slice_forward requires i < j, got (" + std::to_string(i) + ", " + std::to_string(j) +
                          ")");
    if (x.shape().rank() != 4 || x.shape()[1] != channels_after(i))
      throw DimensionError("slice " + std::to_string(i + 1) + " expects input with " +
                           std::to_string(channels_after(i)) + " channels, got " + x.shape().str());
    Var<Scalar> y = x;
    for (Index l = end(i); l < end(j); ++l) y = layers_[l]->forward(y);
    return y;
  }

  /// G(x) = slices 1..K+1.
  Var<Scalar> forward(const Var<Scalar>& x) const {
    if (x.shape().rank() != 4 || x.shape()[1] != in_channels_)
      throw DimensionError("slice 1 expects input with " + std::to_string(in_channels_) + " channels, got " +
                           x.shape().str());
    Var<Scalar> y = x;
    for (const auto& layer : layers_) y = layer->forward(y);
    return y;
  }

  /// Features G_1^k(x) for k = 1..max_scale from a single forward pass.
  VarList<Scalar> encode(const Var<Scalar>& x, Index max_scale) const {
    if (max_scale < 1 || max_scale > K()) throw ArgumentError("encode: scale out of range");
    if (x.shape().rank() != 4 || x.shape()[1] != in_channels_)
      throw DimensionError("slice 1 expects input with " + std::to_string(in_channels_) + " channels, got " +
                           x.shape().str());
    VarList<Scalar> feats;
    Var<Scalar> y = x;
    Index l = 0;
    for (Index k = 1; k <= max_scale; ++k) {
      for (; l < end(k); ++l) y = layers_[l]->forward(y);
      feats.push_back(y);
    }
    return feats;
  }

  /// Output shape of each slice 1..K+1 for an input of shape `in`.
  std::vector<Shape> slice_output_shapes(const Shape& in) const {
    std::vector<Shape> shapes;
    Shape s = in;
    Index l = 0;
    for (Index k = 1; k <= num_slices(); ++k) {
      for (; l < end(k); ++l) s = layers_[l]->output_shape(s);
      shapes.push_back(s);
    }
    return shapes;
  }

  ParamList<Scalar> parameters() const {
    ParamList<Scalar> out;
    for (size_t l = 0; l < layers_.size(); ++l)
      for (auto& p : layers_[l]->parameters()) out.push_back({"layer" + std::to_string(l) + "." + p.name, p.var});
    return out;
  }

  const std::vector<LayerPtr<Scalar>>& layers() const { return layers_; }
  /// Layer index at which slice k ends (k in 0..K+1; end(0) = 0).
  Index end(Index k) const { return k == 0 ? 0 : ends_[static_cast<size_t>(k - 1)]; }

 private:
  std::vector<LayerPtr<Scalar>> layers_;
  std::vector<Index> ends_;  // ends of slices 1..K+1
  Index in_channels_;
  std::vector<Index> boundary_channels_;  // index i -> channels after slice i
};

/// ResNet encoder / residual blocks / decoder, or the all-identity network.
template <typename Scalar>
GeneratorSlices<Scalar> make_generator(const GeneratorConfig& cfg, Rng& rng) {
  std::vector<LayerPtr<Scalar>> layers;
  if (cfg.arch == "identity") {
    if (cfg.in_channels != cfg.out_channels) throw ArgumentError("identity generator needs in == out channels");
    std::vector<Index> ends(static_cast<size_t>(cfg.identity_scales), 0);
    return GeneratorSlices<Scalar>(std::move(layers), ends, cfg.in_channels);
  }
  if (cfg.arch != "resnet") throw ArgumentError("unknown generator arch '" + cfg.arch + "'");
  if (cfg.ngf < 1 || cfg.n_blocks < 0) throw ArgumentError("invalid generator width/depth");

  const double s = cfg.init_std;
  const Index ngf = cfg.ngf;
  auto push = [&](LayerPtr<Scalar> l) { layers.push_back(std::move(l)); };
  auto norm_relu = [&] {
    if (cfg.norm) push(std::make_unique<InstanceNorm<Scalar>>());
    push(std::make_unique<ReLU<Scalar>>());
  };

  std::vector<Index> defaults{0};
  push(std::make_unique<Conv2d<Scalar>>(cfg.in_channels, ngf, 7, 1, 3, PadMode::Reflect, s, rng));
  defaults.push_back(static_cast<Index>(layers.size()));
  norm_relu();
  push(std::make_unique<Conv2d<Scalar>>(ngf, 2 * ngf, 3, 2, 1, PadMode::Zero, s, rng));
  defaults.push_back(static_cast<Index>(layers.size()));
  norm_relu();
  push(std::make_unique<Conv2d<Scalar>>(2 * ngf, 4 * ngf, 3, 2, 1, PadMode::Zero, s, rng));
  defaults.push_back(static_cast<Index>(layers.size()));
  norm_relu();
  const Index blocks_start = static_cast<Index>(layers.size());
  for (Index b = 0; b < cfg.n_blocks; ++b) push(std::make_unique<ResBlock<Scalar>>(4 * ngf, cfg.norm, s, rng));
  if (cfg.n_blocks > 0) defaults.push_back(blocks_start + (cfg.n_blocks + 1) / 2);
  push(std::make_unique<Upsample<Scalar>>(2));
  push(std::make_unique<Conv2d<Scalar>>(4 * ngf, 2 * ngf, 3, 1, 1, PadMode::Zero, s, rng));
  norm_relu();
  push(std::make_unique<Upsample<Scalar>>(2));
  push(std::make_unique<Conv2d<Scalar>>(2 * ngf, ngf, 3, 1, 1, PadMode::Zero, s, rng));
  norm_relu();
  push(std::make_unique<Conv2d<Scalar>>(ngf, cfg.out_channels, 7, 1, 3, PadMode::Reflect, s, rng));
  push(std::make_unique<Tanh<Scalar>>());

  const auto& ends = cfg.feature_layers.empty() ? defaults : cfg.feature_layers;
  return GeneratorSlices<Scalar>(std::move(layers), ends, cfg.in_channels);
}

}  // namespace srunit
