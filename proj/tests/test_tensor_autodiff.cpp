#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace srunit;
using namespace srunit::test;

TEST(Tensor, ShapeAndIndexing) {
  Tensor<double> t(Shape{2, 3, 4, 5});
  EXPECT_EQ(t.numel(), 120);
  EXPECT_EQ(t.rank(), 4);
  t.at(1, 2, 3, 4) = 7;
  EXPECT_EQ(t.vec()[119], 7);
  t.at(0, 1, 0, 2) = 3;
  EXPECT_EQ(t.vec()[(0 * 3 + 1) * 20 + 2], 3);
  EXPECT_EQ(Shape({2, 3}).str(), "[2x3]");
  EXPECT_THROW(Tensor<double>(Shape{2, 2}, Tensor<double>::Vector::Zero(3)), DimensionError);
  EXPECT_THROW(t.require_rank(2), DimensionError);
  EXPECT_DOUBLE_EQ(Tensor<double>::scalar(2.5).vec()[0], 2.5);
}

TEST(Autodiff, ChainRuleOnScalars) {
  // f = tanh(a*b + a)^2, df/da = 2 t (1 - t^2)(b + 1), df/db = 2 t (1 - t^2) a.
  const double av = 0.3, bv = -0.7;
  Var<double> a = parameter(Tensor<double>::scalar(av)), b = parameter(Tensor<double>::scalar(bv));
  const Var<double> f = square(tanh(add(mul(a, b), a)));
  backward(f);
  const double t = std::tanh(av * bv + av);
  EXPECT_NEAR(f.item(), t * t, 1e-15);
  EXPECT_NEAR(a.grad().vec()[0], 2 * t * (1 - t * t) * (bv + 1), 1e-14);
  EXPECT_NEAR(b.grad().vec()[0], 2 * t * (1 - t * t) * av, 1e-14);
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  Var<double> x = parameter(Tensor<double>(Shape{3}, 2.0));
  const Var<double> y = mul(x, x);           // 2x
  const Var<double> z = sum(add(y, y));      // 4x
  backward(z);
  for (Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad().vec()[i], 8.0);
  // Leaves accumulate across backward calls until cleared.
  backward(sum(x));
  EXPECT_DOUBLE_EQ(x.grad().vec()[0], 9.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Autodiff, ConstantsAndDetachBlockGradients) {
  Var<double> p = parameter(Tensor<double>(Shape{2}, 1.0));
  const Var<double> c = constant(Tensor<double>(Shape{2}, 3.0));
  backward(sum(add(mul(p, c), p.detach())));
  EXPECT_DOUBLE_EQ(p.grad().vec()[0], 3.0);
  EXPECT_FALSE(c.has_grad());
  EXPECT_FALSE(c.requires_grad());
}

TEST(Autodiff, FrozenParametersGetNoGradient) {
  Var<double> p = parameter(Tensor<double>(Shape{2}, 1.0));
  Var<double> q = parameter(Tensor<double>(Shape{2}, 1.0));
  p.set_requires_grad(false);
  backward(sum(mul(p, q)));
  EXPECT_FALSE(p.has_grad());
  EXPECT_TRUE(q.has_grad());
}

TEST(Autodiff, MatmulAndBiasAgainstHandValues) {
  Tensor<double> a(Shape{2, 2}), b(Shape{2, 2});
  a.matrix() << 1, 2, 3, 4;
  b.matrix() << 5, 6, 7, 8;
  Var<double> av = parameter(a), bv = parameter(b);
  const auto m = matmul(av, bv);
  Eigen::Matrix2d want;
  want << 19, 22, 43, 50;
  EXPECT_EQ(m.value().matrix(), want);
  backward(sum(m));
  // d sum(AB)/dA = 1 B^T
  Eigen::Matrix2d ga;
  ga << 11, 15, 11, 15;
  EXPECT_EQ(av.grad().matrix(), ga);
  Tensor<double> bias(Shape{2});
  bias.vec() << 1, -1;
  const auto r = add_row_bias(constant(a), constant(bias));
  EXPECT_EQ(r.value().matrix()(1, 1), 3.0);
}

TEST(Autodiff, ReductionsAndWeightedSum) {
  Tensor<double> t(Shape{2, 1, 1, 3});
  t.vec() << 1, 2, 3, 4, 5, 6;
  const auto x = constant(t);
  EXPECT_DOUBLE_EQ(sum(x).item(), 21);
  EXPECT_DOUBLE_EQ(mean(x).item(), 3.5);
  const auto s = sum_per_sample(x).value();
  EXPECT_EQ(s.vec()[0], 6);
  EXPECT_EQ(s.vec()[1], 15);
  Var<double> a = parameter(Tensor<double>::scalar(2)), b = parameter(Tensor<double>::scalar(3));
  const auto w = weighted_sum<double>({a, b}, {0.5, 2.0});
  EXPECT_DOUBLE_EQ(w.item(), 7);
  backward(w);
  EXPECT_DOUBLE_EQ(a.grad().vec()[0], 0.5);
  EXPECT_DOUBLE_EQ(b.grad().vec()[0], 2.0);
  EXPECT_THROW(add(constant(Tensor<double>(Shape{2})), constant(Tensor<double>(Shape{3}))), DimensionError);
}

TEST(Autodiff, RowNormalization) {
  Tensor<double> t(Shape{2, 2});
  t.matrix() << 3, 4, 0, 0;
  const auto n = l2_normalize_rows(constant(t)).value();
  EXPECT_NEAR(n.matrix()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n.matrix()(0, 1), 0.8, 1e-15);
  EXPECT_EQ(n.matrix()(1, 0), 0.0);  // a zero row stays zero
  EXPECT_DOUBLE_EQ(row_norms(constant(t)).value().vec()[0], 5);
}

TEST(Rng, DeterministicAndStateRoundTrip) {
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  const auto st = a.state();
  const double u = a.uniform();
  Rng c(0);
  c.set_state(st);
  EXPECT_EQ(c.uniform(), u);
  std::set<std::uint64_t> seen;
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(r.below(0), ArgumentError);
  Rng s1(9), s2(9);
  EXPECT_EQ(s1.split().next_u64(), s2.split().next_u64());
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  const int n = 100000;
  double m = 0, v = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    m += x;
    v += x * x;
  }
  m /= n;
  v = v / n - m * m;
  EXPECT_LT(std::abs(m), 3 / std::sqrt(double(n)));
  EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(NnOps, ConvolutionMatchesLoop) {
  Rng rng(3);
  const auto x = random_tensor<double>(Shape{2, 2, 5, 6}, rng);
  const auto w = random_tensor<double>(Shape{3, 2, 3, 3}, rng);
  const auto b = random_tensor<double>(Shape{3}, rng);
  const ConvGeometry geo{3, 2, 1};
  const auto y = conv2d(constant(x), constant(w), constant(b), geo).value();
  ASSERT_EQ(y.shape(), (Shape{2, 3, 3, 3}));
  for (Index n = 0; n < 2; ++n)
    for (Index o = 0; o < 3; ++o)
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) {
          double s = b.vec()[o];
          for (Index c = 0; c < 2; ++c)
            for (Index u = 0; u < 3; ++u)
              for (Index v = 0; v < 3; ++v) {
                const Index yy = 2 * i + u - 1, xx = 2 * j + v - 1;
                if (yy >= 0 && xx >= 0 && yy < 5 && xx < 6) s += w.at(o, c, u, v) * x.at(n, c, yy, xx);
              }
          EXPECT_NEAR(y.at(n, o, i, j), s, 1e-12);
        }
}

TEST(NnOps, ReflectPadAndInstanceNorm) {
  Tensor<double> t(Shape{1, 1, 3, 4});
  t.vec() << 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4;
  const auto p = pad2d(constant(t), 2, PadMode::Reflect).value();
  ASSERT_EQ(p.shape(), (Shape{1, 1, 7, 8}));
  EXPECT_THROW(pad2d(constant(Tensor<double>(Shape{1, 1, 2, 4})), 2, PadMode::Reflect), DimensionError);
  const std::vector<double> row{3, 2, 1, 2, 3, 4, 3, 2};
  for (Index j = 0; j < 8; ++j) EXPECT_EQ(p.at(0, 0, 2, j), row[static_cast<size_t>(j)]);
  Rng rng(4);
  const auto x = random_tensor<double>(Shape{2, 3, 4, 4}, rng, -3, 5);
  const auto n = instance_norm(constant(x)).value();
  for (Index s = 0; s < 2; ++s)
    for (Index c = 0; c < 3; ++c) {
      double m = 0, v = 0;
      for (Index i = 0; i < 16; ++i) m += n.vec()[(s * 3 + c) * 16 + i] / 16;
      for (Index i = 0; i < 16; ++i) v += std::pow(n.vec()[(s * 3 + c) * 16 + i] - m, 2) / 16;
      EXPECT_NEAR(m, 0, 1e-12);
      EXPECT_NEAR(v, 1, 1e-3);
    }
}

TEST(NnOps, GatherPositions) {
  Rng rng(5);
  const auto f = random_tensor<double>(Shape{2, 3, 4, 4}, rng);
  const std::vector<Coord> coords{{0, 1, 2}, {1, 3, 0}};
  const auto g = gather_positions(constant(f), coords).value();
  ASSERT_EQ(g.shape(), (Shape{2, 3}));
  for (Index c = 0; c < 3; ++c) {
    EXPECT_EQ(g.matrix()(0, c), f.at(0, c, 1, 2));
    EXPECT_EQ(g.matrix()(1, c), f.at(1, c, 3, 0));
  }
  EXPECT_THROW(gather_positions(constant(f), {{0, 4, 0}}), IndexError);
}
