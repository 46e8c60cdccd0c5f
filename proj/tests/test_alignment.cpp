#include <gtest/gtest.h>

#include <cmath>

#include "dfa/alignment.hpp"
#include "dfa/error.hpp"
#include "support.hpp"

using namespace dfa;
using namespace dfa::test;

namespace {

const Activation kTanh{ActivationKind::tanh, 0};
const Activation kIdentity{ActivationKind::identity, 0};

}  // namespace

TEST(ShadowBp, IdentitySecondLayerPassesErrorThrough) {
  Network<double> net({3}, {fc(3, kIdentity), output(3)}, 1);
  net.layer(2).weights() = Tensor<double>::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto x = random_tensor<double>({4, 3}, 2);
  const auto le = loss_and_error(net.forward(x, ForwardOptions::training(), nullptr),
                                 random_one_hot<double>(4, 3, 3));
  const auto c = shadow_bp_signals(net, le.error);
  EXPECT_TRUE(bitwise_equal(c[0], le.error));
  EXPECT_TRUE(bitwise_equal(c[1], le.error));
}

TEST(ShadowBp, ZeroErrorZeroSignals) {
  Network<double> net({3}, {fc(5, kTanh), fc(4, kTanh), output(2)}, 1);
  net.forward(random_tensor<double>({2, 3}, 2), ForwardOptions::training(), nullptr);
  for (const auto& c : shadow_bp_signals(net, Tensor<double>({2, 2})))
    for (double v : c.data()) EXPECT_EQ(v, 0.0);
}

TEST(ShadowBp, MatchesFiniteDifferenceAtLayerOutput) {
  // Perturb h_1 by splitting the network after block 0.
  Network<double> net({4}, {fc(6, kTanh), fc(5, kTanh), output(3)}, 7);
  const auto x = random_tensor<double>({3, 4}, 8);
  const auto y = random_one_hot<double>(3, 3, 9);
  const auto le = loss_and_error(net.forward(x, ForwardOptions::training(), nullptr), y);
  const auto c = shadow_bp_signals(net, le.error);
  const auto params = net.parameter_fingerprint();
  auto h1 = net.block(0).forward(x, ForwardOptions::evaluation(), nullptr);
  auto loss_from = [&](const Tensor<double>& h) {
    auto a = net.block(1).forward(h, ForwardOptions::evaluation(), nullptr);
    return loss_and_error(net.block(2).forward(a, ForwardOptions::evaluation(), nullptr), y).loss;
  };
  for (std::size_t i = 0; i < h1.size(); ++i) {
    const double o = h1[i], h = 1e-5;
    h1[i] = o + h;
    const double fp = loss_from(h1);
    h1[i] = o - h;
    const double fm = loss_from(h1);
    h1[i] = o;
    // c is the per-sample gradient; the loss is the batch mean
    EXPECT_NEAR(c[0][i] / 3, (fp - fm) / (2 * h), 1e-5 * std::max(1.0, std::abs(c[0][i] / 3)));
  }
  EXPECT_EQ(net.parameter_fingerprint(), params);
}

TEST(Cosine, ParallelAndOrthogonal) {
  const auto a = Tensor<double>::matrix({{1, 2, 3}, {1, 0, 0}});
  const auto b = Tensor<double>::matrix({{2, 4, 6}, {0, 1, 0}});
  const auto r = per_sample_cosine(a, b);
  ASSERT_EQ(r.cosines.size(), 2u);
  EXPECT_NEAR(r.cosines[0], 1.0, 1e-15);
  EXPECT_EQ(r.cosines[1], 0.0);
}

TEST(Cosine, MatchesDirectFormula) {
  const auto a = random_tensor<float>({16, 30}, 1), b = random_tensor<float>({16, 30}, 2);
  const auto r = per_sample_cosine(a, b);
  for (std::size_t s = 0; s < 16; ++s) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < 30; ++k) {
      d += double(a.at(s, k)) * b.at(s, k);
      na += double(a.at(s, k)) * a.at(s, k);
      nb += double(b.at(s, k)) * b.at(s, k);
    }
    EXPECT_NEAR(r.cosines[s], d / std::sqrt(na * nb), 1e-6);
  }
}

TEST(Cosine, DegenerateSamplesExcluded) {
  const auto a = Tensor<double>::matrix({{0, 0}, {1, 1}, {1e-13, 0}});
  const auto b = Tensor<double>::matrix({{1, 0}, {1, 1}, {1, 0}});
  const auto r = per_sample_cosine(a, b);
  EXPECT_EQ(r.excluded, 2u);
  ASSERT_EQ(r.cosines.size(), 1u);
  EXPECT_THROW(per_sample_cosine(a, Tensor<double>({3, 3})), ShapeError);
}

TEST(BatchStats, ConstantAndTwoPoint) {
  const std::vector<double> c = {0.3, 0.3, 0.3};
  EXPECT_EQ(batch_stats(c).std, 0.0);
  const std::vector<double> two = {1.0, 0.0};
  EXPECT_EQ(batch_stats(two).mean, 0.5);
  EXPECT_EQ(batch_stats(two).std, 0.5);
  EXPECT_THROW(batch_stats(std::span<const double>{}), ParameterError);
}

TEST(Alignment, OutputLayerIsExactlyAligned) {
  Network<float> net({2, 6, 6}, {conv(3, kTanh), maxpool(), fc(10, kTanh, 0.2, true), output(4)}, 3);
  Prng fbr(4);
  const auto fb = UnifiedFeedback<float>::build(fbr, 108, 4);
  const auto recs = measure_alignment(net, &fb, random_tensor<float>({16, 2, 6, 6}, 5),
                                      random_one_hot<float>(16, 4, 6), Prng(7));
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_NEAR(recs.back().mean_cos, 1.0, 1e-6);
  EXPECT_LT(recs.back().std_cos, 1e-6);
  EXPECT_EQ(recs.back().n, 16u);
}

TEST(Alignment, DegreesColumn) {
  AlignmentRecord r;
  r.mean_cos = 0.5;
  EXPECT_NEAR(r.degrees(), 60.0, 1e-12);
}

TEST(Alignment, ScaleInvariantInFeedbackNormalization) {
  Network<double> net({8}, {fc(20, kTanh), fc(12, kTanh), output(5)}, 11);
  Prng a(12), b(12);
  const auto norm = UnifiedFeedback<double>::build(a, 20, 5, true);
  const auto raw = UnifiedFeedback<double>::build(b, 20, 5, false);
  const auto x = random_tensor<double>({32, 8}, 13);
  const auto y = random_one_hot<double>(32, 5, 14);
  const auto r1 = measure_alignment(net, &norm, x, y, Prng(1));
  const auto r2 = measure_alignment(net, &raw, x, y, Prng(1));
  ASSERT_EQ(r1.size(), r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_NEAR(r1[i].mean_cos, r2[i].mean_cos, 1e-12);
}

TEST(Alignment, RandomNetworkIsNearOrthogonal) {
  Network<double> net({30}, {fc(100, kTanh), fc(100, kTanh), output(10)}, 21);
  Prng fr(22);
  const auto fb = UnifiedFeedback<double>::build(fr, 100, 10);
  const std::size_t batch = 128;
  const auto recs = measure_alignment(net, &fb, random_tensor<double>({batch, 30}, 23),
                                      random_one_hot<double>(batch, 10, 24), Prng(1));
  for (std::size_t i = 0; i + 1 < recs.size(); ++i)
    EXPECT_LT(std::abs(recs[i].mean_cos), 4.0 / std::sqrt(batch * 100.0) + 0.05) << "layer " << i + 1;
}

TEST(Alignment, StatsMatchLoopOracle) {
  Network<double> net({10}, {fc(20, kTanh), fc(20, kTanh), output(4)}, 31);
  Prng fr(32);
  const auto fb = UnifiedFeedback<double>::build(fr, 20, 4);
  const auto x = random_tensor<double>({128, 10}, 33);
  const auto y = random_one_hot<double>(128, 4, 34);
  const auto recs = measure_alignment(net, &fb, x, y, Prng(1));
  const auto le = loss_and_error(net.forward(x, ForwardOptions::training(), nullptr), y);
  const auto c = shadow_bp_signals(net, le.error);
  const auto t = project_error(fb.view(20), le.error);
  double sum = 0, sq = 0;
  std::vector<double> cos(128);
  for (std::size_t s = 0; s < 128; ++s) {
    double d = 0, nt = 0, nc = 0;
    for (std::size_t k = 0; k < 20; ++k) {
      d += t.at(s, k) * c[0].at(s, k);
      nt += t.at(s, k) * t.at(s, k);
      nc += c[0].at(s, k) * c[0].at(s, k);
    }
    cos[s] = d / std::sqrt(nt * nc);
    sum += cos[s];
  }
  const double mean = sum / 128;
  for (double v : cos) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(recs[0].mean_cos, mean, 1e-6);
  EXPECT_NEAR(recs[0].std_cos, std::sqrt(sq / 128), 1e-6);
  EXPECT_EQ(recs[0].n, 128u);
}

TEST(Alignment, ProbeLeavesParametersAndRunningStats) {
  Network<float> net({6}, {fc(10, kTanh, 0.2, true), output(3)}, 41);
  Prng fr(42);
  const auto fb = UnifiedFeedback<float>::build(fr, 10, 3);
  const auto before = net.parameter_fingerprint();
  measure_alignment(net, &fb, random_tensor<float>({8, 6}, 44), random_one_hot<float>(8, 3, 45),
                    Prng(43));
  EXPECT_EQ(net.parameter_fingerprint(), before);
  EXPECT_FALSE(net.layer(1).batchnorm()->has_running_stats());
}
