#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "srunit/core/nn_ops.hpp"
#include "srunit/core/rng.hpp"

namespace srunit {

template <typename Scalar>
struct NamedParam {
  std::string name;
  Var<Scalar> var;
};

template <typename Scalar>
using ParamList = std::vector<NamedParam<Scalar>>;

template <typename Scalar>
Tensor<Scalar> random_normal(const Shape& shape, double stddev, Rng& rng) {
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.numel(); ++i) t.vec()[i] = static_cast<Scalar>(stddev * rng.normal());
  return t;
}

/// A differentiable NCHW -> NCHW map.
template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Var<Scalar> forward(const Var<Scalar>& x) const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  /// Required input channel count, or -1 when any count is accepted.
  virtual Index input_channels() const { return -1; }
  virtual ParamList<Scalar> parameters() const { return {}; }
  virtual std::string name() const = 0;
};

template <typename Scalar>
using LayerPtr = std::unique_ptr<Layer<Scalar>>;

template <typename Scalar>
class Conv2d : public Layer<Scalar> {
 public:
  Conv2d(Index in, Index out, Index kernel, Index stride, Index pad, PadMode pad_mode, double init_std,
         Rng& rng, bool bias = true)
      : in_(in), out_(out), pad_(pad), pad_mode_(pad_mode) {
    geom_.kernel = kernel;
    geom_.stride = stride;
    geom_.pad = pad_mode == PadMode::Zero ? pad : 0;
    weight_ = parameter(random_normal<Scalar>(Shape{out, in, kernel, kernel}, init_std, rng));
    if (bias) bias_ = parameter(Tensor<Scalar>(Shape{out}));
  }

  Var<Scalar> forward(const Var<Scalar>& x) const override {
    if (pad_mode_ == PadMode::Reflect && pad_ > 0) return conv2d(pad2d(x, pad_, PadMode::Reflect), weight_, bias_, geom_);
    return conv2d(x, weight_, bias_, geom_);
  }

  Shape output_shape(const Shape& in) const override {
    const Index extra = pad_mode_ == PadMode::Reflect ? 2 * pad_ : 0;
    return Shape{in[0], out_, geom_.out_extent(in[2] + extra), geom_.out_extent(in[3] + extra)};
  }
  Index input_channels() const override { return in_; }

  ParamList<Scalar> parameters() const override {
    ParamList<Scalar> p{{"weight", weight_}};
    if (bias_.defined()) p.push_back({"bias", bias_});
    return p;
  }
  std::string name() const override { return "conv" + std::to_string(geom_.kernel); }

  const Var<Scalar>& weight() const { return weight_; }
  const Var<Scalar>& bias() const { return bias_; }
  const ConvGeometry& geometry() const { return geom_; }

 private:
  Index in_, out_, pad_;
  PadMode pad_mode_;
  ConvGeometry geom_;
  Var<Scalar> weight_, bias_;
};

template <typename Scalar>
class InstanceNorm : public Layer<Scalar> {
 public:
  Var<Scalar> forward(const Var<Scalar>& x) const override { return instance_norm(x); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string name() const override { return "instance_norm"; }
};

template <typename Scalar>
class ReLU : public Layer<Scalar> {
 public:
  Var<Scalar> forward(const Var<Scalar>& x) const override { return relu(x); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string name() const override { return "relu"; }
};

template <typename Scalar>
class LeakyReLU : public Layer<Scalar> {
 public:
  explicit LeakyReLU(Scalar slope) : slope_(slope) {}
  Var<Scalar> forward(const Var<Scalar>& x) const override { return leaky_relu(x, slope_); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string name() const override { return "leaky_relu"; }

 private:
  Scalar slope_;
};

template <typename Scalar>
class Tanh : public Layer<Scalar> {
 public:
  Var<Scalar> forward(const Var<Scalar>& x) const override { return tanh(x); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string name() const override { return "tanh"; }
};

template <typename Scalar>
class Upsample : public Layer<Scalar> {
 public:
  explicit Upsample(Index factor) : factor_(factor) {}
  Var<Scalar> forward(const Var<Scalar>& x) const override { return upsample_nearest(x, factor_); }
  Shape output_shape(const Shape& in) const override {
    return Shape{in[0], in[1], in[2] * factor_, in[3] * factor_};
  }
  std::string name() const override { return "upsample"; }

 private:
  Index factor_;
};

/// x + conv(relu(norm(conv(x)))) with reflect padding, channel-preserving.
template <typename Scalar>
class ResBlock : public Layer<Scalar> {
 public:
  ResBlock(Index channels, bool norm, double init_std, Rng& rng)
      : channels_(channels), norm_(norm),
        conv1_(channels, channels, 3, 1, 1, PadMode::Reflect, init_std, rng),
        conv2_(channels, channels, 3, 1, 1, PadMode::Reflect, init_std, rng) {}

  Var<Scalar> forward(const Var<Scalar>& x) const override {
    Var<Scalar> y = conv1_.forward(x);
    if (norm_) y = instance_norm(y);
    y = relu(y);
    y = conv2_.forward(y);
    if (norm_) y = instance_norm(y);
    return add(x, y);
  }
  Shape output_shape(const Shape& in) const override { return in; }
  Index input_channels() const override { return channels_; }
  ParamList<Scalar> parameters() const override {
    ParamList<Scalar> p;
    for (auto& q : conv1_.parameters()) p.push_back({"conv1." + q.name, q.var});
    for (auto& q : conv2_.parameters()) p.push_back({"conv2." + q.name, q.var});
    return p;
  }
  std::string name() const override { return "resblock"; }

 private:
  Index channels_;
  bool norm_;
  Conv2d<Scalar> conv1_, conv2_;
};

/// Total number of scalar parameters.
template <typename Scalar>
Index parameter_count(const ParamList<Scalar>& params) {
  Index total = 0;
  for (const auto& p : params) total += p.var.value().numel();
  return total;
}

template <typename Scalar>
void zero_grads(const ParamList<Scalar>& params) {
  for (auto p : params) p.var.zero_grad();
}

template <typename Scalar>
void set_requires_grad(const ParamList<Scalar>& params, bool on) {
  for (auto p : params) p.var.set_requires_grad(on);
}

}  // namespace srunit
