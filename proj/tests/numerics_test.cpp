#include <cmath>
#include <limits>
#include <set>

#include "gtest/gtest.h"
#include "support.hpp"
#include "xtamer/layers.hpp"
#include "xtamer/network.hpp"
#include "xtamer/tamer.hpp"

namespace xtamer {
namespace {

using namespace nn;
using testing::check_gradients;
using testing::random_tensor;
using Spec = nn::ActivationSpec<double>;

constexpr double kFdTolerance = 1e-4;
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

TensorD naive_conv(const TensorD& x, const TensorD& k, const TensorD& b) {
  const Index co = k.dim(0), ci = k.dim(1), kk = k.dim(2);
  const Index oh = x.dim(1) - kk + 1, ow = x.dim(2) - kk + 1;
  TensorD out({co, oh, ow});
  for (Index o = 0; o < co; ++o)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) {
        double acc = b[o];
        for (Index c = 0; c < ci; ++c)
          for (Index u = 0; u < kk; ++u)
            for (Index v = 0; v < kk; ++v) acc += k[((o * ci + c) * kk + u) * kk + v] * x(c, i + u, j + v);
        out(o, i, j) = acc;
      }
  return out;
}

TensorD naive_pool(const TensorD& x, Index w) {
  TensorD out({x.dim(0), x.dim(1) / w, x.dim(2) / w});
  for (Index c = 0; c < out.dim(0); ++c)
    for (Index i = 0; i < out.dim(1); ++i)
      for (Index j = 0; j < out.dim(2); ++j) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index u = 0; u < w; ++u)
          for (Index v = 0; v < w; ++v) m = std::max(m, x(c, i * w + u, j * w + v));
        out(c, i, j) = m;
      }
  return out;
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(TensorD({2, 3}, Eigen::VectorXd::Zero(5)), ShapeError);
  TensorD t({2, 3, 4});
  EXPECT_EQ(t.size(), 24);
  EXPECT_THROW(t.matrix(5, 5), ShapeError);
}

TEST(Conv2d, OutputShape) {
  Rng rng(1);
  const auto y = conv2d_forward(random_tensor({1, 64, 64}, rng), random_tensor({8, 1, 5, 5}, rng), TensorD({8}));
  EXPECT_EQ(y.shape(), (Shape{8, 60, 60}));
}

TEST(Conv2d, ZeroInputGivesBias) {
  Rng rng(2);
  const TensorD bias({3}, {0.5, -1.25, 2.0});
  const auto y = conv2d_forward(TensorD({2, 7, 9}), random_tensor({3, 2, 3, 3}, rng), bias);
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < y.dim(1); ++i)
      for (Index j = 0; j < y.dim(2); ++j) EXPECT_EQ(y(c, i, j), bias[c]);
}

TEST(Conv2d, MatchesNestedLoopReference) {
  Rng rng(3);
  const auto x = random_tensor({1, 8, 8}, rng);
  const auto k = random_tensor({2, 1, 3, 3}, rng);
  const auto b = random_tensor({2}, rng);
  const auto got = conv2d_forward(x, k, b);
  const auto want = naive_conv(x, k, b);
  ASSERT_EQ(got.shape(), want.shape());
  for (Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Conv2d, RandomShapesMatchReference) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const Index c = 1 + Index(rng.below(3)), o = 1 + Index(rng.below(4)), k = 1 + Index(rng.below(4));
    const Index h = k + Index(rng.below(6)), w = k + Index(rng.below(6));
    const auto x = random_tensor({c, h, w}, rng), ker = random_tensor({o, c, k, k}, rng), b = random_tensor({o}, rng);
    const auto got = conv2d_forward(x, ker, b);
    const auto want = naive_conv(x, ker, b);
    ASSERT_EQ(got.shape(), want.shape()) << "seed " << seed;
    EXPECT_LT((got.data() - want.data()).cwiseAbs().maxCoeff(), 1e-12) << "seed " << seed;
  }
}

TEST(Conv2d, RejectsKernelLargerThanInput) {
  Rng rng(4);
  EXPECT_THROW(conv2d_forward(random_tensor({1, 4, 4}, rng), random_tensor({1, 1, 5, 5}, rng), TensorD({1})),
               ShapeError);
  EXPECT_THROW(conv2d_forward(random_tensor({2, 8, 8}, rng), random_tensor({1, 1, 3, 3}, rng), TensorD({1})),
               ShapeError);
}

TEST(MaxPool, Shapes) {
  Rng rng(5);
  EXPECT_EQ(maxpool2d(random_tensor({8, 60, 60}, rng)).output.shape(), (Shape{8, 30, 30}));
}

TEST(MaxPool, PicksWindowMaximum) {
  const auto r = maxpool2d(TensorD({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(r.output.size(), 1);
  EXPECT_EQ(r.output[0], 4.0);
}

TEST(MaxPool, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto x = random_tensor({1, 6, 6}, rng);
    const auto got = maxpool2d(x).output;
    const auto want = naive_pool(x, 2);
    ASSERT_EQ(got.shape(), want.shape());
    for (Index i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i]);
  }
}

TEST(Dense, IdentityIsPassThrough) {
  TensorD w({3, 3});
  w.matrix(3, 3).setIdentity();
  const TensorD x({3}, {0.3, -7, 2.5});
  EXPECT_EQ(dense_forward(x, w, TensorD({3}), Spec::linear()), x);
}

TEST(Dense, ScaledTanhStaysInsideRange) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_tensor({4}, rng, -50, 50);
    const auto y = dense_forward(x, random_tensor({5, 4}, rng, -10, 10), random_tensor({5}, rng), Spec::scaled_tanh(2));
    for (Index i = 0; i < y.size(); ++i) {
      EXPECT_LE(y[i], 2.0);
      EXPECT_GE(y[i], -2.0);
    }
  }
  const auto y = activate(Spec::scaled_tanh(2), TensorD({2}, {0.3, -0.7}));
  EXPECT_LT(std::abs(y[0]), 2.0);
  EXPECT_NEAR(y[0], 2 * std::tanh(0.3), 1e-15);
}

TEST(Dense, MatchesHandComputedProduct) {
  const TensorD x({3}, {1.0, -2.0, 0.5});
  const TensorD w({2, 3}, {0.1, 0.2, 0.3, -1.0, 0.0, 4.0});
  const TensorD b({2}, {0.05, -0.5});
  const auto y = dense_forward(x, w, b, Spec::linear());
  EXPECT_NEAR(y[0], 0.1 * 1.0 + 0.2 * -2.0 + 0.3 * 0.5 + 0.05, 1e-15);
  EXPECT_NEAR(y[1], -1.0 * 1.0 + 0.0 * -2.0 + 4.0 * 0.5 - 0.5, 1e-15);
}

TEST(Normalize, KnownVectors) {
  const auto l2 = l2_normalize(TensorD({2}, {3, 4}));
  EXPECT_NEAR(l2[0], 0.6, 1e-8);
  EXPECT_NEAR(l2[1], 0.8, 1e-8);
  const auto l1 = l1_normalize(TensorD({3}, {1, 1, 2}));
  EXPECT_NEAR(l1[0], 0.25, 1e-8);
  EXPECT_NEAR(l1[1], 0.25, 1e-8);
  EXPECT_NEAR(l1[2], 0.5, 1e-8);
}

TEST(Normalize, ZeroVectorStaysZero) {
  const auto z = l2_normalize(TensorD({4}));
  EXPECT_TRUE(z.all_finite());
  EXPECT_EQ(z.data().squaredNorm(), 0.0);
  EXPECT_TRUE(l1_normalize(TensorD({4})).all_finite());
  EXPECT_TRUE(l2_normalize_backward(TensorD({4}), TensorD::constant({4}, 1.0)).all_finite());
}

TEST(Backward, LinearLayerClosedForm) {
  Rng rng(7);
  const auto x = random_tensor({4}, rng);
  const auto w = random_tensor({1, 4}, rng);
  const auto b = random_tensor({1}, rng);
  nn::Network<double> net;
  net.add(nn::Dense<double>{w, b, Spec::linear()});
  const double target = 0.7;
  const auto cache = net.forward(x);
  const double yhat = cache.output()[0];
  const auto g = nn::backward(net, cache, TensorD({1}, {2 * (yhat - target)}));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(g.params[0][i], 2 * (yhat - target) * x[i], 1e-14);
  EXPECT_NEAR(g.params[1][0], 2 * (yhat - target), 1e-14);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(8);
  nn::Network<double> net;
  net.add(nn::Conv2d<double>{random_tensor({2, 1, 3, 3}, rng), random_tensor({2}, rng)});
  net.add(nn::Activation<double>{Spec::relu()});
  net.add(nn::MaxPool2d{});
  net.add(nn::Flatten{});
  net.add(nn::Dense<double>{random_tensor({3, 18}, rng), random_tensor({3}, rng), Spec::tanh()});
  const auto cache = net.forward(random_tensor({1, 8, 8}, rng));
  const auto g = nn::backward(net, cache, TensorD({3}));
  const auto params = net.parameters();
  ASSERT_EQ(g.params.size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(g.params[i].shape(), params[i]->shape());
    EXPECT_EQ(g.params[i].data().cwiseAbs().maxCoeff(), 0.0);
  }
}

// Finite-difference checks, one network per differentiable layer kind.

nn::Network<double> single(nn::Layer<double> layer) {
  nn::Network<double> n;
  n.add(std::move(layer));
  return n;
}

class FiniteDifference : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(FiniteDifference, Conv2d) {
  Rng rng(GetParam());
  auto net = single(nn::Conv2d<double>{random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});
  EXPECT_LT(check_gradients(net, random_tensor({2, 7, 6}, rng), GetParam()).max_relative_error, kFdTolerance);
}

TEST_P(FiniteDifference, MaxPool) {
  Rng rng(GetParam());
  EXPECT_LT(check_gradients(single(nn::MaxPool2d{}), random_tensor({2, 6, 6}, rng), GetParam()).max_relative_error,
            kFdTolerance);
}

TEST_P(FiniteDifference, DenseEveryActivation) {
  for (const auto spec : {Spec::linear(), Spec::tanh(), Spec::relu(), Spec::scaled_tanh(2)}) {
    Rng rng(GetParam());
    auto net = single(nn::Dense<double>{random_tensor({4, 5}, rng), random_tensor({4}, rng), spec});
    EXPECT_LT(check_gradients(net, random_tensor({5}, rng), GetParam()).max_relative_error, kFdTolerance);
  }
}

TEST_P(FiniteDifference, Activations) {
  for (const auto spec : {Spec::tanh(), Spec::relu(), Spec::scaled_tanh(2)}) {
    Rng rng(GetParam());
    EXPECT_LT(check_gradients(single(nn::Activation<double>{spec}), random_tensor({2, 3, 3}, rng), GetParam())
                  .max_relative_error,
              kFdTolerance);
  }
}

TEST_P(FiniteDifference, Normalizations) {
  Rng rng(GetParam());
  EXPECT_LT(check_gradients(single(nn::L1Normalize{}), random_tensor({2, 4, 4}, rng), GetParam()).max_relative_error,
            kFdTolerance);
  EXPECT_LT(check_gradients(single(nn::L2Normalize{}), random_tensor({2, 4, 4}, rng), GetParam()).max_relative_error,
            kFdTolerance);
  EXPECT_LT(check_gradients(single(nn::Scale<double>{3.5}), random_tensor({6}, rng), GetParam()).max_relative_error,
            kFdTolerance);
  EXPECT_LT(check_gradients(single(nn::Flatten{}), random_tensor({2, 2, 3}, rng), GetParam()).max_relative_error,
            kFdTolerance);
}

TEST_P(FiniteDifference, EncoderShapedStack) {
  Rng rng(GetParam());
  nn::Network<double> net;
  net.add(nn::Conv2d<double>{random_tensor({3, 1, 3, 3}, rng), random_tensor({3}, rng, 0.0, 0.2)});
  net.add(nn::Activation<double>{Spec::relu()});
  net.add(nn::MaxPool2d{});
  net.add(nn::L1Normalize{});
  net.add(nn::Scale<double>{3 * 6 * 6});
  net.add(nn::Conv2d<double>{random_tensor({4, 3, 3, 3}, rng), random_tensor({4}, rng, 0.0, 0.2)});
  net.add(nn::Activation<double>{Spec::relu()});
  net.add(nn::MaxPool2d{});
  net.add(nn::L2Normalize{});
  net.add(nn::Flatten{});
  net.add(nn::Dense<double>{random_tensor({7, 16}, rng), random_tensor({7}, rng), Spec::linear()});
  EXPECT_LT(check_gradients(net, random_tensor({1, 14, 14}, rng, 0.0, 1.0), GetParam()).max_relative_error,
            kFdTolerance);
}

TEST_P(FiniteDifference, RewardModelNetwork) {
  RewardModelOptions o;
  o.seed = GetParam();
  o.zero_output_layer = false;
  RewardModel m(o);
  const auto x = m.input_for({3, 11, 20, 20}, action_catalog()[GetParam() % kEmotionCount]);
  EXPECT_LT(check_gradients(m.network(), x, GetParam()).max_relative_error, kFdTolerance);
}

INSTANTIATE_TEST_SUITE_P(Seeds, FiniteDifference, ::testing::ValuesIn(kSeeds));

TEST(Sgd, SingleStepArithmetic) {
  TensorD p({1}, {1.0});
  ASSERT_TRUE(nn::sgd_step<double>({&p}, {TensorD({1}, {2.0})}, 0.1));
  EXPECT_NEAR(p[0], 0.8, 1e-15);
}

TEST(Sgd, ZeroLearningRateLeavesParameters) {
  Rng rng(9);
  auto p = random_tensor({3, 4}, rng);
  const auto before = p;
  ASSERT_TRUE(nn::sgd_step<double>({&p}, {random_tensor({3, 4}, rng)}, 0.0));
  EXPECT_EQ(p, before);
}

TEST(Sgd, NonFiniteGradientRefused) {
  TensorD p({2}, {1.0, 2.0}), q({1}, {3.0});
  const auto bp = p, bq = q;
  EXPECT_FALSE(nn::sgd_step<double>({&p, &q}, {TensorD({2}, {0.1, 0.2}), TensorD({1}, {std::nan("")})}, 0.5));
  EXPECT_EQ(p, bp);
  EXPECT_EQ(q, bq);
}

TEST(Sgd, ConvexQuadraticDecreasesMonotonically) {
  Rng rng(10);
  nn::Network<double> net;
  net.add(nn::Dense<double>{random_tensor({1, 3}, rng), random_tensor({1}, rng), Spec::linear()});
  const auto x = random_tensor({3}, rng);
  const double target = 1.3;
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 100; ++step) {
    const auto cache = net.forward(x);
    const double e = cache.output()[0] - target;
    EXPECT_LE(e * e, prev);
    prev = e * e;
    ASSERT_TRUE(nn::sgd_step(net, nn::backward(net, cache, TensorD({1}, {2 * e})), 0.05));
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Network, FiniteThroughForwardAndBackward) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    nn::Network<double> net;
    net.add(nn::Conv2d<double>{random_tensor({2, 1, 3, 3}, rng, -5, 5), random_tensor({2}, rng)});
    net.add(nn::Activation<double>{Spec::relu()});
    net.add(nn::L1Normalize{});
    net.add(nn::L2Normalize{});
    net.add(nn::Flatten{});
    const auto cache = net.forward(random_tensor({1, 5, 5}, rng, -100, 100));
    for (const auto& t : cache.inputs) EXPECT_TRUE(t.all_finite());
    const auto g = nn::backward(net, cache, random_tensor(cache.output().shape(), rng));
    EXPECT_TRUE(g.all_finite());
    EXPECT_TRUE(g.input.all_finite());
  }
}

TEST(Network, FlattenAndAssignRoundTrip) {
  Rng rng(12);
  nn::Network<double> net;
  net.add(nn::Dense<double>{random_tensor({2, 3}, rng), random_tensor({2}, rng), Spec::tanh()});
  net.add(nn::Dense<double>{random_tensor({1, 2}, rng), random_tensor({1}, rng), Spec::linear()});
  const auto flat = nn::flatten_parameters(net);
  EXPECT_EQ(flat.size(), 2 * 3 + 2 + 2 + 1);
  auto copy = net;
  nn::assign_parameters(copy, Eigen::VectorXd::Zero(flat.size()).eval());
  nn::assign_parameters(copy, flat);
  EXPECT_EQ(nn::flatten_parameters(copy), flat);
  EXPECT_THROW(nn::assign_parameters(copy, Eigen::VectorXd::Zero(3).eval()), ShapeError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    any_diff |= x != c.next();
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, StateRestoreResumesStream) {
  Rng a(7);
  for (int i = 0; i < 13; ++i) a.normal();
  Rng b;
  b.restore(a.state());
  EXPECT_EQ(a, b);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, DistributionBounds) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(7), 7u);
  }
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(4);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6};
  rng.shuffle(std::span<int>(v));
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 7u);
}

TEST(Rng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::uint64_t stream : {0x7A3EULL, 0x5C4EULL, 0xE7B1ULL}) seen.insert(derive_seed(s, stream));
  EXPECT_EQ(seen.size(), 150u);
  static_assert(derive_seed(1, 2) == derive_seed(1, 2));
}

}  // namespace
}  // namespace xtamer
