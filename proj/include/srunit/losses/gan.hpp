#pragma once

#include "srunit/models/discriminator.hpp"

namespace srunit {

/// Least-squares discriminator loss E[(D(real) - 1)^2] + E[D(fake)^2]. `fake` is
/// detached so no gradient reaches the generator.
template <typename Scalar>
Var<Scalar> gan_loss_d(const PatchDiscriminator<Scalar>& d, const Var<Scalar>& real, const Var<Scalar>& fake) {
  require_same_shape(real.shape(), fake.shape(), "gan_loss_d");
  Var<Scalar> real_term = mean(square(add_scalar(d.forward(real), Scalar(-1))));
  Var<Scalar> fake_term = mean(square(d.forward(fake.detach())));
  return add(real_term, fake_term);
}

/// Least-squares generator loss E[(D(fake) - 1)^2].
template <typename Scalar>
Var<Scalar> gan_loss_g(const PatchDiscriminator<Scalar>& d, const Var<Scalar>& fake) {
  return mean(square(add_scalar(d.forward(fake), Scalar(-1))));
}

}  // namespace srunit
