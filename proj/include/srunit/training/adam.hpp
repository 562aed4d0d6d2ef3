#pragma once

#include <cmath>

#include "srunit/models/layers.hpp"

namespace srunit {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Moments are kept per parameter in list order.
template <typename Scalar>
class Adam {
 public:
  using Vector = typename Tensor<Scalar>::Vector;

  Adam(ParamList<Scalar> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.push_back(Vector::Zero(p.var.value().numel()));
      v_.push_back(Vector::Zero(p.var.value().numel()));
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t steps() const { return t_; }

  /// Applies one update from the accumulated gradients and clears them.
  /// Parameters without a gradient (unreached by backward) count as zero-grad.
  void step() {
    ++t_;
    const double bc1 = 1 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar step = static_cast<Scalar>(cfg_.lr / bc1);
    const Scalar eps = static_cast<Scalar>(cfg_.eps);
    const Scalar inv_bc2 = static_cast<Scalar>(1 / bc2);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& var = params_[i].var;
      const Vector& g = var.grad_vec();
      if (g.size() == 0) {
        m_[i] *= b1;
        v_[i] *= b2;
      } else {
        m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
        v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      }
      auto& w = var.mutable_value().vec();
      w.array() -= step * m_[i].array() / ((v_[i].array() * inv_bc2).sqrt() + eps);
      var.zero_grad();
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  const ParamList<Scalar>& params() const { return params_; }
  std::vector<Vector>& first_moments() { return m_; }
  std::vector<Vector>& second_moments() { return v_; }
  const std::vector<Vector>& first_moments() const { return m_; }
  const std::vector<Vector>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  ParamList<Scalar> params_;
  AdamConfig cfg_;
  std::vector<Vector> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace srunit
