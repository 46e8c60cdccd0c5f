#include <gtest/gtest.h>

#include <cmath>

#include "dfa/error.hpp"
#include "dfa/kernels.hpp"
#include "dfa/ops.hpp"
#include "support.hpp"

using namespace dfa;
using dfa::test::random_tensor;

TEST(Tensor, ShapeAndSizeAgree) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.row_size(), 12u);
  EXPECT_THROW(Tensor<float>({2, 0}), ShapeError);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(t.reshape({5, 5}), ShapeError);
}

TEST(Prng, SameSeedSameStream) {
  Prng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Prng, SplitMixFirstOutput) {
  // First SplitMix64 output for seed 0 (published reference value).
  Prng p(0);
  EXPECT_EQ(p.next_u64(), 0xE220A8397B1DCDAFULL);
}

TEST(Prng, UniformRangeAndBelow) {
  Prng p(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = p.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
    ASSERT_LT(p.below(10), 10u);
  }
}

TEST(Prng, ForkIsIndependentAndPure) {
  Prng p(5);
  const Prng f1 = p.fork(1);
  Prng f1b = p.fork(1), f2 = p.fork(2);
  EXPECT_EQ(f1.seed(), f1b.seed());
  EXPECT_NE(f1b.next_u64(), f2.next_u64());
  Prng q(5);
  EXPECT_EQ(p.next_u64(), q.next_u64());
}

TEST(Matmul, IdentityIsExact) {
  const auto a = Tensor<float>::matrix({{1, 2}, {3, 4}});
  const auto i = Tensor<float>::matrix({{1, 0}, {0, 1}});
  EXPECT_TRUE(bitwise_equal(matmul(a, i), a));
}

TEST(Matmul, HandEvaluated) {
  const auto c = matmul(Tensor<float>::matrix({{1, 2}, {3, 4}}), Tensor<float>::matrix({{5}, {6}}));
  EXPECT_EQ(c, Tensor<float>::matrix({{17}, {39}}));
}

TEST(Matmul, RandomMatchesTripleLoop) {
  const auto a = random_tensor<float>({8, 8}, 1), b = random_tensor<float>({8, 8}, 2);
  const auto c = matmul(a, b);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double ref = 0;
      for (std::size_t p = 0; p < 8; ++p) ref += double(a.at(i, p)) * b.at(p, j);
      EXPECT_NEAR(c.at(i, j), ref, 1e-6 * std::max(1.0, std::abs(ref)));
    }
}

TEST(Matmul, MismatchThrows) {
  EXPECT_THROW(matmul(Tensor<float>({2, 3}), Tensor<float>({2, 3})), ShapeError);
  EXPECT_THROW(matmul(Tensor<float>({2, 3, 1}), Tensor<float>({3, 3})), ShapeError);
}

TEST(Matmul, NonFiniteThrows) {
  auto a = Tensor<float>::matrix({{1e30f}});
  EXPECT_THROW(matmul(a, a), NumericError);
}

TEST(GaussianFill, ZeroStdIsConstant) {
  Prng rng(1);
  const auto t = gaussian_fill<float>(rng, {10, 10}, 3.5, 0.0);
  for (float v : t.data()) EXPECT_EQ(v, 3.5f);
  EXPECT_THROW(gaussian_fill<float>(rng, {2}, 0.0, -1.0), ParameterError);
}

TEST(GaussianFill, SeedReproducible) {
  EXPECT_TRUE(bitwise_equal(random_tensor<float>({100}, 42), random_tensor<float>({100}, 42)));
}

TEST(GaussianFill, MomentsOverMillionDraws) {
  const auto t = random_tensor<double>({1000000}, 3);
  double sum = 0, sq = 0;
  for (double v : t.data()) sum += v;
  const double mean = sum / t.size();
  for (double v : t.data()) sq += (v - mean) * (v - mean);
  EXPECT_LT(std::abs(mean), 4.0 / 1000.0);
  EXPECT_NEAR(sq / t.size(), 1.0, 0.02);
}

TEST(Im2col, OneByOneIsReshape) {
  const auto x = random_tensor<float>({3, 4, 5}, 1);
  const auto g = conv_geometry(x.shape(), 1, 1, 1, 0);
  const auto cols = im2col(x, g);
  EXPECT_EQ(cols.shape(), (Shape{3, 20}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(cols[i], x[i]);
  EXPECT_TRUE(bitwise_equal(col2im(cols, g), x));
}

TEST(Im2col, SinglePatch) {
  const Tensor<float> x({1, 2, 2}, {1, 2, 3, 4});
  const auto cols = im2col(x, conv_geometry(x.shape(), 2, 2, 1, 0));
  EXPECT_EQ(cols, Tensor<float>({4, 1}, {1, 2, 3, 4}));
}

TEST(Im2col, NonIntegralOutputThrows) {
  EXPECT_THROW(conv_geometry({1, 4, 4}, 3, 3, 2, 0), ShapeError);
  EXPECT_THROW(conv_geometry({1, 2, 2}, 3, 3, 1, 0), ShapeError);
}

TEST(Im2col, MatchesDirectConvolution) {
  const auto x = random_tensor<double>({3, 8, 8}, 11);
  const auto w = random_tensor<double>({4, 27}, 12);
  const auto g = conv_geometry(x.shape(), 3, 3, 1, 1);
  const auto y = matmul(w, im2col(x, g));
  for (std::size_t o = 0; o < 4; ++o)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        double ref = 0;
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t ki = 0; ki < 3; ++ki)
            for (std::size_t kj = 0; kj < 3; ++kj) {
              const long yi = long(i) + long(ki) - 1, xj = long(j) + long(kj) - 1;
              if (yi < 0 || xj < 0 || yi >= 8 || xj >= 8) continue;
              ref += w.at(o, (c * 3 + ki) * 3 + kj) * x[(c * 8 + yi) * 8 + xj];
            }
        EXPECT_NEAR(y.at(o, i * 8 + j), ref, 1e-6 * std::max(1.0, std::abs(ref)));
      }
}

TEST(Col2im, OverlapCounting) {
  const auto g = conv_geometry({1, 3, 3}, 2, 2, 1, 0);
  const auto img = col2im(Tensor<float>({4, 4}, 1.0f), g);
  EXPECT_EQ(img[4], 4.0f);
  EXPECT_EQ(img[0], 1.0f);
  EXPECT_EQ(img[2], 1.0f);
  EXPECT_EQ(img[6], 1.0f);
  EXPECT_EQ(img[8], 1.0f);
  EXPECT_EQ(img[1], 2.0f);
}

TEST(Col2im, AdjointIdentity) {
  for (const auto& [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
    const Shape shape{4, 15, 15};
    const auto g = conv_geometry(shape, 3, 3, stride, pad);
    const auto x = random_tensor<double>(shape, 21);
    const auto y = random_tensor<double>({g.patch_size(), g.out_pixels()}, 22);
    const auto cx = im2col(x, g);
    const auto ty = col2im(y, g);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * ty[i];
    EXPECT_NEAR(lhs, rhs, 1e-6 * std::abs(lhs));
  }
  EXPECT_THROW(col2im(Tensor<double>({3, 3}), conv_geometry({1, 3, 3}, 2, 2, 1, 0)), ShapeError);
}

class KernelParity : public ::testing::TestWithParam<std::tuple<int, int, int, int, int>> {};

TEST_P(KernelParity, ParallelGemmBitwiseEqualsReference) {
  const auto [m, n, k, ta, tb] = GetParam();
  using kernels::Op;
  const Op oa = ta ? Op::transpose : Op::none, ob = tb ? Op::transpose : Op::none;
  const auto a = random_tensor<float>({std::size_t(m * k)}, 1);
  const auto b = random_tensor<float>({std::size_t(k * n)}, 2);
  const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
  Tensor<float> c1({std::size_t(m * n)}, 0.5f), c2 = c1;
  kernels::gemm(oa, ob, m, n, k, a.ptr(), lda, b.ptr(), ldb, c1.ptr(), n, true);
  kernels::reference::gemm(oa, ob, m, n, k, a.ptr(), lda, b.ptr(), ldb, c2.ptr(), n, true);
  EXPECT_TRUE(bitwise_equal(c1, c2));
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelParity,
                         ::testing::Values(std::make_tuple(1, 1, 1, 0, 0),
                                           std::make_tuple(7, 13, 300, 0, 0),
                                           std::make_tuple(64, 200, 517, 1, 0),
                                           std::make_tuple(33, 65, 129, 0, 1),
                                           std::make_tuple(5, 300, 9, 1, 1)));

TEST(KernelParity, Im2colAndCol2imBitwise) {
  const kernels::ConvGeometry g{3, 9, 7, 3, 3, 2, 1};
  const std::size_t batch = 3;
  const auto img = random_tensor<double>({batch * g.image_size()}, 5);
  std::vector<double> c1(g.patch_size() * batch * g.out_pixels()), c2(c1.size());
  kernels::im2col(img.ptr(), batch, g, c1.data());
  kernels::reference::im2col(img.ptr(), batch, g, c2.data());
  EXPECT_EQ(c1, c2);
  std::vector<double> i1(img.size()), i2(img.size());
  kernels::col2im(c1.data(), batch, g, i1.data());
  kernels::reference::col2im(c1.data(), batch, g, i2.data());
  EXPECT_EQ(i1, i2);
}
