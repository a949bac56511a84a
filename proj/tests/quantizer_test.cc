//
// Copyright 2026 The SecGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "secgd/quantizer.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "secgd/random.h"

namespace secgd {
namespace {

QuantizationParams Params(int m_tilde, int n, int f) {
  return QuantizationParams::Make(m_tilde, n, f);
}

TEST(QuantizationParamsTest, HeadroomIsCeilLog2N) {
  const int expected[] = {0, 0, 1, 2, 2, 3, 3, 3, 3, 4};
  for (int n = 1; n <= 9; ++n) {
    EXPECT_EQ(Params(8, n, 0).headroom_bits(), expected[n]) << "N=" << n;
  }
  EXPECT_EQ(Params(4, 4, 0).total_bits(), 6);
  EXPECT_EQ(Params(20, 4, 10).total_bits(), 22);
}

TEST(QuantizationParamsTest, ClipRadius) {
  EXPECT_DOUBLE_EQ(Params(4, 1, 0).clip_radius(), 7.5);
  EXPECT_DOUBLE_EQ(Params(3, 2, 0).clip_radius(), 3.5);
  EXPECT_DOUBLE_EQ(Params(16, 2, 8).clip_radius(), (32768 - 0.5) / 256);
}

TEST(QuantizationParamsTest, RejectsInvalid) {
  EXPECT_THROW(Params(0, 1, 0), ParameterError);
  EXPECT_THROW(Params(8, 1, 8), ParameterError);
  EXPECT_THROW(Params(8, 0, 0), ParameterError);
  EXPECT_THROW(Params(63, 4, 0), ParameterError);  // m = 65
  EXPECT_NO_THROW(Params(62, 4, 0));
  EXPECT_EQ(QuantizationParams::Make(20, 4).fraction_bits, 10);
}

TEST(ClipLinfTest, InsideBallUnchanged) {
  const auto p = Params(4, 1, 0);
  EXPECT_EQ(ClipLinf({3.0, -2.0}, p), (RealVector{3.0, -2.0}));
  EXPECT_EQ(ClipLinf({0.0, 0.0}, p), (RealVector{0.0, 0.0}));
}

TEST(ClipLinfTest, ScalesOntoBall) {
  EXPECT_EQ(ClipLinf({15.0, -7.5}, Params(4, 1, 0)),
            (RealVector{7.5, -3.75}));
}

TEST(ClipLinfTest, IdempotentAndRatioPreserving) {
  ChaChaRng rng(21);
  const auto p = Params(6, 1, 2);
  for (int trial = 0; trial < 200; ++trial) {
    RealVector g(5);
    for (double& x : g) x = (UniformUnit(rng) - 0.5) * 100;
    const RealVector c = ClipLinf(g, p);
    EXPECT_EQ(ClipLinf(c, p), c);
    double norm = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      norm = std::max(norm, std::abs(c[i]));
      EXPECT_EQ(std::signbit(c[i]), std::signbit(g[i]));
      if (g[0] != 0) {
        EXPECT_NEAR(c[i] / c[0], g[i] / g[0], 1e-12);
      }
    }
    EXPECT_LE(norm, p.clip_radius());
  }
}

TEST(QuantizeTest, HalfwayMeanOverManyDraws) {
  const auto p = Params(4, 1, 0);
  ChaChaRng rng(22);
  double sum = 0;
  int low = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto q = Quantize({5.0}, p, rng)[0];
    ASSERT_TRUE(q == 12 || q == 13);
    low += q == 12;
    sum += static_cast<double>(q);
  }
  EXPECT_NEAR(sum / draws, 12.5, 0.01);
  EXPECT_GT(low, 0);
}

TEST(QuantizeTest, BoundariesAreDeterministic) {
  const auto p = Params(4, 1, 0);
  ChaChaRng rng(23);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(Quantize({-p.clip_radius()}, p, rng)[0], 0u);
    EXPECT_EQ(Quantize({p.clip_radius()}, p, rng)[0], 15u);
    EXPECT_EQ(Quantize({0.5}, p, rng)[0], 8u);
  }
}

TEST(QuantizeTest, RejectsUnclippedInput) {
  const auto p = Params(4, 1, 0);
  ChaChaRng rng(24);
  EXPECT_THROW(Quantize({7.6}, p, rng), PreconditionError);
  EXPECT_THROW(Quantize({std::nan("")}, p, rng), PreconditionError);
  EXPECT_THROW(Preprocess({std::numeric_limits<double>::infinity()}, p, rng),
               DataError);
  EXPECT_EQ(Preprocess({100.0}, p, rng)[0], 15u);
}

TEST(QuantizeTest, OutputShape) {
  const auto p = Params(10, 5, 4);
  ChaChaRng rng(25);
  const GroupVector q = Quantize({0.1, -0.2, 0.3}, p, rng);
  EXPECT_EQ(q.dim(), 3u);
  EXPECT_EQ(q.bits(), 13);
  for (auto e : q.entries()) EXPECT_LT(e, 1u << 10);
}

TEST(QuantizeTest, UnbiasedWithinThreeStandardErrors) {
  ChaChaRng rng(26);
  const auto p = Params(8, 1, 3);
  const int draws = 20000;
  for (int trial = 0; trial < 10; ++trial) {
    const double r = (UniformUnit(rng) * 2 - 1) * p.clip_radius();
    const double x = (r + p.clip_radius()) * 8;
    const double frac = x - std::floor(x);
    double sum = 0;
    for (int i = 0; i < draws; ++i) {
      sum += static_cast<double>(Quantize({r}, p, rng)[0]);
    }
    const double se = std::sqrt(frac * (1 - frac) / draws);
    EXPECT_LE(std::abs(sum / draws - x), 3 * se + 1e-12) << "r=" << r;
  }
}

TEST(DequantizeSumTest, TwoClientsAtZero) {
  const auto p = Params(4, 2, 0);
  ChaChaRng rng(27);
  for (int i = 0; i < 100; ++i) {
    const GroupVector a = Quantize({0.0}, p, rng);
    const GroupVector b = Quantize({0.0}, p, rng);
    ASSERT_TRUE(a[0] == 7 || a[0] == 8);
    const RealVector s = DequantizeSum(a + b, p);
    EXPECT_LE(std::abs(s[0]), 1.0);
  }
}

TEST(DequantizeSumTest, IntegralInputRecoveredExactly) {
  const auto p = Params(4, 1, 0);
  ChaChaRng rng(28);
  const RealVector g{-6.5, -0.5, 0.5, 7.5};
  EXPECT_EQ(DequantizeSum(Quantize(g, p, rng), p), g);
}

TEST(DequantizeSumTest, FourMaximalEntriesDoNotWrap) {
  const auto p = Params(4, 4, 0);
  ASSERT_EQ(p.total_bits(), 6);
  ChaChaRng rng(29);
  std::vector<GroupVector> parts;
  for (int i = 0; i < 4; ++i) parts.push_back(Quantize({7.5}, p, rng));
  const GroupVector s = Sum(parts, 1, 6);
  EXPECT_EQ(s[0], 60u);
  EXPECT_DOUBLE_EQ(DequantizeSum(s, p)[0], 30.0);
}

TEST(DequantizeSumTest, ErrorBoundProperty) {
  ChaChaRng rng(30);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m_tilde = 4 + static_cast<int>(rng() % 20);
    const int f = static_cast<int>(rng() % m_tilde);
    const auto p = Params(m_tilde, n, f);
    const std::size_t dim = 1 + rng() % 8;
    RealVector plain(dim, 0.0);
    std::vector<GroupVector> parts;
    for (int i = 0; i < n; ++i) {
      RealVector g(dim);
      for (double& x : g) x = (UniformUnit(rng) * 2 - 1) * p.clip_radius();
      for (std::size_t j = 0; j < dim; ++j) plain[j] += g[j];
      parts.push_back(Quantize(g, p, rng));
    }
    const RealVector got = DequantizeSum(Sum(parts, dim, p.total_bits()), p);
    for (std::size_t j = 0; j < dim; ++j) {
      EXPECT_LE(std::abs(got[j] - plain[j]),
                n * std::ldexp(1.0, -f) * (1 + 1e-9));
    }
  }
}

}  // namespace
}  // namespace secgd
