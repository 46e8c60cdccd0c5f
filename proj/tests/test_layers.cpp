#include <gtest/gtest.h>

#include <cmath>

#include "dfa/batchnorm.hpp"
#include "dfa/block.hpp"
#include "dfa/error.hpp"
#include "support.hpp"

using namespace dfa;
using namespace dfa::test;

namespace {

const Activation kTanh{ActivationKind::tanh, 0};
const Activation kIdentity{ActivationKind::identity, 0};

template <typename T>
Block<T> fc_block(std::size_t in, std::size_t out, Activation act, double dropout = 0,
                  bool bn = false, std::uint64_t seed = 1) {
  Prng rng(seed);
  return Block<T>(fc(out, act, dropout, bn), {in}, 1, &rng);
}

}  // namespace

TEST(Activation, AbsSignConvention) {
  const Activation abs{ActivationKind::abs, 0};
  EXPECT_EQ(activation_eval(abs, -3.0), 3.0);
  EXPECT_EQ(activation_deriv(abs, -3.0), -1.0);
  EXPECT_EQ(activation_deriv(abs, 0.0), 0.0);
}

TEST(Activation, NegativeSlopeLeakyRelu) {
  const auto f = Activation::parse("lrelu(-0.5)");
  EXPECT_EQ(f.kind, ActivationKind::lrelu);
  EXPECT_EQ(activation_eval(f, -2.0), 1.0);
  EXPECT_EQ(activation_deriv(f, -2.0), -0.5);
  EXPECT_EQ(activation_deriv(f, 0.0), -0.5);
  EXPECT_EQ(f.name(), "lrelu(-0.5)");
}

TEST(Activation, KinkConventions) {
  EXPECT_EQ(activation_deriv(Activation{ActivationKind::relu, 0}, 0.0), 0.0);
  EXPECT_EQ(activation_deriv(Activation{ActivationKind::relu, 0}, 1e-300), 1.0);
  EXPECT_THROW(Activation::parse("sigmoid"), ParameterError);
}

TEST(Activation, DerivativeMatchesFiniteDifference) {
  for (const char* name : {"tanh", "relu", "lrelu(0.2)", "lrelu(-0.5)", "abs", "identity"}) {
    const auto f = Activation::parse(name);
    Prng rng(3);
    for (int i = 0; i < 20; ++i) {
      double x = 3 * rng.normal();
      if (std::abs(x) < 1e-3) x += 0.01;
      const double h = 1e-5;
      const double fd = (activation_eval(f, x + h) - activation_eval(f, x - h)) / (2 * h);
      EXPECT_NEAR(activation_deriv(f, x), fd, 1e-6) << name << " at " << x;
    }
  }
}

TEST(Block, IdentityLayerPassesInputThrough) {
  auto b = fc_block<double>(3, 3, kIdentity);
  b.weights() = Tensor<double>::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto x = random_tensor<double>({4, 3}, 2);
  EXPECT_TRUE(bitwise_equal(b.forward(x, ForwardOptions::training(), nullptr), x));

  const auto g = random_tensor<double>({4, 3}, 3);
  Tensor<double> gx;
  const auto grads = b.backward(g, true, &gx);
  EXPECT_TRUE(bitwise_equal(gx, g));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0;
      for (std::size_t s = 0; s < 4; ++s) m += g.at(s, r) * x.at(s, c);
      EXPECT_NEAR(grads.weights.at(r, c), m / 4, 1e-15);
    }
}

TEST(Block, ScalarTanh) {
  auto b = fc_block<double>(1, 1, kTanh);
  b.weights() = Tensor<double>::matrix({{2}});
  b.bias() = Tensor<double>({1}, {1});
  const auto y = b.forward(Tensor<double>({1, 1}, {0.5}), ForwardOptions::evaluation(), nullptr);
  EXPECT_NEAR(y[0], std::tanh(2.0), 1e-12);
  EXPECT_NEAR(y[0], 0.9640, 1e-4);
}

TEST(Block, FcTanhClosedForm) {
  auto b = fc_block<double>(5, 4, kTanh);
  const auto x = random_tensor<double>({3, 5}, 4);
  b.forward(x, ForwardOptions::training(), nullptr);
  const auto g = random_tensor<double>({3, 4}, 5);
  const auto grads = b.param_backward(g);
  for (std::size_t r = 0; r < 4; ++r) {
    double db = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      double a = b.bias()[r];
      for (std::size_t c = 0; c < 5; ++c) a += b.weights().at(r, c) * x.at(s, c);
      db += g.at(s, r) * (1 - std::tanh(a) * std::tanh(a));
    }
    EXPECT_NEAR(grads.bias[r], db / 3, 1e-14);
  }
}

TEST(Block, ConvMatchesDirectConvolution) {
  Prng rng(6);
  Block<double> b(conv(4, kTanh, 3, 1), {2, 6, 5}, 1, &rng);
  for (std::size_t i = 0; i < 4; ++i) b.bias()[i] = 0.1 * double(i);
  const auto x = random_tensor<double>({2, 2, 6, 5}, 7);
  const auto y = b.forward(x, ForwardOptions::evaluation(), nullptr);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 6, 5}));
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          double a = b.bias()[o];
          for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t ki = 0; ki < 3; ++ki)
              for (std::size_t kj = 0; kj < 3; ++kj) {
                const long yi = long(i + ki) - 1, xj = long(j + kj) - 1;
                if (yi < 0 || xj < 0 || yi >= 6 || xj >= 5) continue;
                a += b.weights().at(o, (c * 3 + ki) * 3 + kj) * x[((s * 2 + c) * 6 + yi) * 5 + xj];
              }
          EXPECT_NEAR(y[((s * 4 + o) * 6 + i) * 5 + j], std::tanh(a), 1e-5);
        }
}

TEST(Block, ShapeMismatchAndMissingCache) {
  auto b = fc_block<double>(3, 2, kTanh);
  EXPECT_THROW(b.forward(Tensor<double>({2, 4}), ForwardOptions::training(), nullptr), ShapeError);
  EXPECT_THROW(b.param_backward(Tensor<double>({2, 2})), StateError);
  b.forward(Tensor<double>({2, 3}), ForwardOptions::evaluation(), nullptr);
  EXPECT_THROW(b.param_backward(Tensor<double>({2, 2})), StateError);
}

TEST(Block, DropoutNeedsRngOnlyInTraining) {
  auto b = fc_block<double>(3, 4, kTanh, 0.5);
  const auto x = random_tensor<double>({2, 3}, 1);
  EXPECT_THROW(b.forward(x, ForwardOptions::training(), nullptr), ParameterError);
  const auto y1 = b.forward(x, ForwardOptions::evaluation(), nullptr);
  const auto y2 = b.forward(x, ForwardOptions::evaluation(), nullptr);
  EXPECT_TRUE(bitwise_equal(y1, y2));
}

TEST(Block, InvertedDropoutMaskValuesAndExpectation) {
  const double p = 0.3;
  Prng init(1);
  Block<double> d(dropout(p), {50}, 0, &init);
  const auto x = random_tensor<double>({1, 50}, 2);
  Prng rng(3);
  std::vector<double> mean(50, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto y = d.forward(x, ForwardOptions::training(), &rng);
    for (double m : d.cached_dropout_mask().data())
      ASSERT_TRUE(m == 0.0 || m == 1.0 / (1.0 - p));
    for (std::size_t k = 0; k < 50; ++k) mean[k] += y[k] / draws;
  }
  double num = 0, den = 0;
  for (std::size_t k = 0; k < 50; ++k) {
    num += std::abs(mean[k] - x[k]);
    den += std::abs(x[k]);
  }
  EXPECT_LT(num / den, 0.02);
  EXPECT_THROW(BlockConfig(dropout(1.0)).output_shape({3}), ParameterError);
}

TEST(Block, MaxpoolForwardBackward) {
  Prng init(1);
  Block<double> p(maxpool(), {1, 4, 4}, 0, &init);
  Tensor<double> x({1, 1, 4, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
  const auto y = p.forward(x, ForwardOptions::training(), nullptr);
  EXPECT_EQ(y, Tensor<double>({1, 1, 2, 2}, {6, 8, 14, 16}));
  Tensor<double> gx;
  p.backward(Tensor<double>({1, 4}, {1, 2, 3, 4}), true, &gx);
  EXPECT_EQ(gx[5], 1);
  EXPECT_EQ(gx[7], 2);
  EXPECT_EQ(gx[13], 3);
  EXPECT_EQ(gx[15], 4);
  EXPECT_EQ(gx[0], 0);
}

TEST(Block, HeInitialization) {
  auto b = fc_block<double>(400, 300, kTanh);
  double sq = 0;
  for (double w : b.weights().data()) sq += w * w;
  EXPECT_NEAR(sq / b.weights().size(), 2.0 / 400, 0.05 * 2.0 / 400);
  for (double v : b.bias().data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, ConstantFeatureGivesBeta) {
  BatchNorm<double> bn(2);
  bn.gamma()[0] = 3;
  bn.beta() = Tensor<double>({2}, {0.25, -1});
  const Tensor<double> x({3, 2}, {5, 1, 5, 1, 5, 1});
  const auto y = bn.forward(x, 1, BnStats::batch, true, true);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(y.at(s, 0), 0.25);
    EXPECT_EQ(y.at(s, 1), -1.0);
  }
}

TEST(BatchNorm, NormalizedInputKept) {
  BatchNorm<double> bn(1);
  const auto y = bn.forward(Tensor<double>({2, 1}, {-1, 1}), 1, BnStats::batch, false, false);
  EXPECT_NEAR(y[0], -1, 1e-5);
  EXPECT_NEAR(y[1], 1, 1e-5);
}

TEST(BatchNorm, BatchOfOneRejectedInTraining) {
  BatchNorm<double> bn(3);
  EXPECT_THROW(bn.forward(Tensor<double>({1, 3}), 1, BnStats::batch, true, true), ParameterError);
}

TEST(BatchNorm, RunningStatisticsMomentum) {
  BatchNorm<double> bn(1);
  bn.forward(Tensor<double>({2, 1}, {1, 3}), 1, BnStats::batch, true, false);
  // running = 0.9 * init + 0.1 * batch, unbiased variance 2
  EXPECT_NEAR(bn.running_mean()[0], 0.1 * 2.0, 1e-12);
  EXPECT_NEAR(bn.running_var()[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-12);
  EXPECT_TRUE(bn.has_running_stats());
}

TEST(BatchNorm, EvalBeforeTrainingFallsBack) {
  BatchNorm<double> bn(2);
  const auto x = random_tensor<double>({4, 2}, 1);
  const auto y = bn.forward(x, 1, BnStats::running, false, false);
  EXPECT_TRUE(bn.used_batch_fallback());
  const auto ref = BatchNorm<double>(2).forward(x, 1, BnStats::batch, false, false);
  EXPECT_TRUE(bitwise_equal(y, ref));
}

TEST(BatchNorm, BackwardMatchesFiniteDifference) {
  BatchNorm<double> bn(8);
  bn.gamma() = random_tensor<double>({8}, 2);
  bn.beta() = random_tensor<double>({8}, 3);
  auto x = random_tensor<double>({16, 8}, 4);
  const auto w = random_tensor<double>({16, 8}, 5);  // loss = sum(w * y) / 16
  auto loss = [&]() {
    const auto y = bn.forward(x, 1, BnStats::batch, false, false);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    return s / 16;
  };
  bn.forward(x, 1, BnStats::batch, false, true);
  Tensor<double> g = w;
  const auto grads = bn.backward(g, true, true);  // dgamma/dbeta averaged: sum(w*...)/16
  auto fd = [&](double& p) {
    const double o = p, h = 1e-4;
    p = o + h;
    const double fp = loss();
    p = o - h;
    const double fm = loss();
    p = o;
    return (fp - fm) / (2 * h);
  };
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_NEAR(grads.dgamma[k], fd(bn.gamma()[k]), 1e-8);
    EXPECT_NEAR(grads.dbeta[k], fd(bn.beta()[k]), 1e-8);
  }
  for (std::size_t k = 0; k < x.size(); k += 7) {
    const double num = fd(x[k]) * 16;  // dx is per-sample, not averaged
    EXPECT_NEAR(grads.dx[k], num, 1e-5 * std::max(1.0, std::abs(num)));
  }
}

TEST(BatchNorm, ConvSpatialStatistics) {
  BatchNorm<double> bn(2);
  const auto x = random_tensor<double>({3, 2, 4}, 9);  // batch 3, 2 channels, 4 pixels
  const auto y = bn.forward(x, 4, BnStats::batch, false, false);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t p = 0; p < 4; ++p) m += y[(s * 2 + c) * 4 + p] / 12;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t p = 0; p < 4; ++p) v += std::pow(y[(s * 2 + c) * 4 + p] - m, 2) / 12;
    EXPECT_NEAR(m, 0, 1e-12);
    EXPECT_NEAR(v, 1, 1e-3);
  }
}

TEST(GradientCheck, EveryActivationPassesFiniteDifferences) {
  for (const char* name : {"tanh", "relu", "lrelu(0.1)", "lrelu(-0.5)", "abs", "identity"}) {
    const auto act = Activation::parse(name);
    Network<double> net({6}, {fc(7, act), fc(5, act), output(3)}, 17);
    const auto x = random_tensor<double>({4, 6}, 18);
    const auto y = random_one_hot<double>(4, 3, 19);
    const auto r = check_bp_gradients(net, x, y, 20);
    EXPECT_LT(r.max_rel_error, 1e-5) << name << ": " << r.worst;
    EXPECT_GT(r.checked, 40u) << name;
  }
}

TEST(GradientCheck, ConvBatchnormDropout) {
  Network<double> net({2, 6, 6},
                      {dropout(0.2), conv(3, kTanh, 3, 1, true), maxpool(), conv(4, kTanh, 3, 1),
                       fc(5, kTanh, 0.3, true), output(3)},
                      23);
  const auto x = random_tensor<double>({3, 2, 6, 6}, 24);
  const auto y = random_one_hot<double>(3, 3, 25);
  const auto r = check_bp_gradients(net, x, y, 15);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
  EXPECT_GT(r.checked, 60u);
}
