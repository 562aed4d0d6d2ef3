#pragma once

#include "srunit/models/layers.hpp"

namespace srunit {

struct DiscriminatorConfig {
  Index in_channels = 3;
  Index ndf = 8;
  Index n_strided = 2;  // stride-2 conv layers before the stride-1 head
  Index kernel = 4;
  std::string activation = "lrelu";  // "lrelu" or "tanh"
  double slope = 0.2;
  double init_std = 0.02;
};

struct ConvSpec {
  Index in, out, kernel, stride, pad;
};

/// Patch discriminator: conv/activation stack mapping an image to a grid of
/// realness scores. No normalization layers, so input gradients stay a plain
/// chain of transposed convolutions.
template <typename Scalar>
class PatchDiscriminator {
 public:
  PatchDiscriminator(const std::vector<ConvSpec>& specs, const std::string& activation, Scalar slope,
                     double init_std, Rng& rng)
      : activation_(activation), slope_(slope) {
    if (specs.empty()) throw ArgumentError("discriminator needs at least one layer");
    if (activation != "lrelu" && activation != "tanh")
      throw ArgumentError("unknown discriminator activation '" + activation + "'");
    for (const auto& s : specs) convs_.emplace_back(s.in, s.out, s.kernel, s.stride, s.pad, PadMode::Zero, init_std, rng);
  }

  Index num_layers() const { return static_cast<Index>(convs_.size()); }
  const Conv2d<Scalar>& conv(Index l) const { return convs_[static_cast<size_t>(l)]; }

  Var<Scalar> forward(const Var<Scalar>& x) const {
    if (x.shape().rank() != 4 || x.shape()[1] != convs_.front().input_channels())
      throw DimensionError("discriminator expects " + std::to_string(convs_.front().input_channels()) +
                           "-channel images, got " + x.shape().str());
    Var<Scalar> y = x;
    for (size_t l = 0; l < convs_.size(); ++l) {
      y = convs_[l].forward(y);
      if (l + 1 < convs_.size()) y = activate(y);
    }
    return y;
  }

  /// Gradient of each sample's mean score with respect to that sample's input,
  /// evaluated at `x`, as a Var differentiable in the discriminator parameters.
  Var<Scalar> input_gradient(const Var<Scalar>& x) const {
    VarList<Scalar> inputs, pre, post;
    Var<Scalar> y = x;
    for (size_t l = 0; l < convs_.size(); ++l) {
      inputs.push_back(y);
      y = convs_[l].forward(y);
      pre.push_back(y);
      if (l + 1 < convs_.size()) {
        y = activate(y);
        post.push_back(y);
      }
    }
    const Shape& out = pre.back().shape();
    Var<Scalar> g = constant(Tensor<Scalar>(out, Scalar(1) / static_cast<Scalar>(out[1] * out[2] * out[3])));
    for (Index l = num_layers() - 1; l >= 0; --l) {
      if (l + 1 < num_layers()) g = mul(g, activation_derivative(pre[l], post[l]));
      g = conv2d_input_grad(g, convs_[l].weight(), inputs[l].shape(), convs_[l].geometry());
    }
    return g;
  }

  Shape output_shape(const Shape& in) const {
    Shape s = in;
    for (const auto& c : convs_) s = c.output_shape(s);
    return s;
  }

  /// Input pixels seen by one score.
  Index receptive_field() const {
    Index rf = 1;
    for (auto it = convs_.rbegin(); it != convs_.rend(); ++it)
      rf = (rf - 1) * it->geometry().stride + it->geometry().kernel;
    return rf;
  }

  ParamList<Scalar> parameters() const {
    ParamList<Scalar> p;
    for (size_t l = 0; l < convs_.size(); ++l)
      for (auto& q : convs_[l].parameters()) p.push_back({"conv" + std::to_string(l) + "." + q.name, q.var});
    return p;
  }

 private:
  Var<Scalar> activate(const Var<Scalar>& z) const {
    return activation_ == "tanh" ? tanh(z) : leaky_relu(z, slope_);
  }

  Var<Scalar> activation_derivative(const Var<Scalar>& z, const Var<Scalar>& a) const {
    if (activation_ == "tanh") return add_scalar(neg(square(a)), Scalar(1));
    Tensor<Scalar> mask(z.shape());
    for (Index i = 0; i < mask.numel(); ++i) mask.vec()[i] = z.value().vec()[i] > Scalar(0) ? Scalar(1) : slope_;
    return constant(std::move(mask));
  }

  std::string activation_;
  Scalar slope_;
  std::vector<Conv2d<Scalar>> convs_;
};

template <typename Scalar>
PatchDiscriminator<Scalar> make_discriminator(const DiscriminatorConfig& cfg, Rng& rng) {
  std::vector<ConvSpec> specs;
  Index ch = cfg.in_channels, width = cfg.ndf;
  for (Index i = 0; i < cfg.n_strided; ++i) {
    specs.push_back({ch, width, cfg.kernel, 2, 1});
    ch = width;
    width *= 2;
  }
  specs.push_back({ch, 1, cfg.kernel, 1, 1});
  return PatchDiscriminator<Scalar>(specs, cfg.activation, static_cast<Scalar>(cfg.slope), cfg.init_std, rng);
}

}  // namespace srunit
