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

#include "secgd/adversary.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gtest/gtest.h"
#include "secgd/random.h"
#include "secgd/simulation.h"

namespace secgd {
namespace {

GroupVector Scalar(int bits, std::uint64_t v) { return GroupVector(bits, {v}); }

// Plain reference: every subset, sum recomputed from scratch.
bool BruteForce(const DsssInstance& inst) {
  const std::size_t n = inst.base.size();
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
    if (inst.cardinality &&
        static_cast<std::size_t>(std::popcount(s)) != *inst.cardinality) {
      continue;
    }
    GroupVector acc = GroupVector::Zero(inst.target.dim(), inst.target.bits());
    for (std::size_t i = 0; i < n; ++i) {
      if (s >> i & 1) acc = acc + inst.base[i];
    }
    if (acc == inst.target) return true;
  }
  return false;
}

void ExpectValidWitness(const DsssInstance& inst, const DsssResult& r) {
  ASSERT_TRUE(r.found);
  GroupVector acc = GroupVector::Zero(inst.target.dim(), inst.target.bits());
  for (std::size_t i : r.witness) acc = acc + inst.base.at(i);
  EXPECT_EQ(acc, inst.target);
  if (inst.cardinality) {
    EXPECT_EQ(r.witness.size(), *inst.cardinality);
  }
  for (std::size_t i = 1; i < r.witness.size(); ++i) {
    EXPECT_LT(r.witness[i - 1], r.witness[i]);
  }
}

TEST(DsssDecideTest, PairSummingToThree) {
  const DsssInstance inst{
      {Scalar(2, 1), Scalar(2, 2), Scalar(2, 3), Scalar(2, 0)}, Scalar(2, 3), 2};
  for (auto solver : {DsssSolver::kExhaustive, DsssSolver::kMeetInTheMiddle}) {
    const DsssResult r = DsssDecide(inst, solver);
    ExpectValidWitness(inst, r);
    EXPECT_TRUE(r.witness == (std::vector<std::size_t>{0, 1}) ||
                r.witness == (std::vector<std::size_t>{2, 3}));
  }
}

TEST(DsssDecideTest, WholeMultiset) {
  ChaChaRng rng(81);
  const auto base = UniformVectors(10, 3, 7, rng);
  const DsssInstance inst{base, Sum(base, 3, 7), 10};
  ExpectValidWitness(inst, DsssDecide(inst, DsssSolver::kExhaustive));
  ExpectValidWitness(inst, DsssDecide(inst, DsssSolver::kMeetInTheMiddle));
}

TEST(DsssDecideTest, Unsolvable) {
  const DsssInstance inst{{GroupVector(2, {0, 0})}, GroupVector(2, {1, 0}), 1};
  EXPECT_FALSE(DsssDecide(inst, DsssSolver::kExhaustive).found);
  EXPECT_FALSE(DsssDecide(inst, DsssSolver::kMeetInTheMiddle).found);
}

TEST(DsssDecideTest, EmptySubsetAndNoCardinality) {
  const DsssInstance zero{{Scalar(3, 5)}, Scalar(3, 0), std::nullopt};
  EXPECT_TRUE(DsssDecide(zero).found);
  const DsssInstance none{{Scalar(3, 5)}, Scalar(3, 0), 1};
  EXPECT_FALSE(DsssDecide(none).found);
}

TEST(DsssDecideTest, AgreesWithBruteForce) {
  ChaChaRng rng(82);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng() % 16;
    const std::size_t dim = 1 + rng() % 3;
    const int bits = 1 + static_cast<int>(rng() % 5);
    const auto base = UniformVectors(n, dim, bits, rng);
    const GroupVector target = UniformVectors(1, dim, bits, rng)[0];
    std::optional<std::size_t> card;
    if (rng() % 2) card = rng() % (n + 1);
    const DsssInstance inst{base, target, card};
    const bool expected = BruteForce(inst);
    for (auto solver : {DsssSolver::kExhaustive, DsssSolver::kMeetInTheMiddle,
                        DsssSolver::kAuto}) {
      const DsssResult r = DsssDecide(inst, solver);
      ASSERT_EQ(r.found, expected) << "trial " << trial;
      if (r.found) ExpectValidWitness(inst, r);
    }
  }
}

TEST(DsssDecideTest, RefusesOversizedInstances) {
  ChaChaRng rng(83);
  const auto b25 = UniformVectors(25, 1, 8, rng);
  EXPECT_THROW(DsssDecide({b25, Scalar(8, 0), 3}, DsssSolver::kExhaustive),
               SizeError);
  const auto b41 = UniformVectors(41, 1, 8, rng);
  EXPECT_THROW(DsssDecide({b41, Scalar(8, 0), 3}), SizeError);
  EXPECT_THROW(DsssDecide({b25, GroupVector(8, {0, 0}), 3}), ParameterError);
  EXPECT_THROW(DsssDecide({{Scalar(8, 1)}, Scalar(8, 1), 2}), ParameterError);
}

TEST(DsssDecideTest, WorkGrowsExponentially) {
  // All-zero multiset with a nonzero target is never solvable, so every
  // subset is visited.
  for (std::size_t n : {8u, 12u, 16u, 20u}) {
    const DsssInstance inst{std::vector<GroupVector>(n, Scalar(8, 0)),
                            Scalar(8, 1), std::nullopt};
    EXPECT_EQ(DsssDecide(inst, DsssSolver::kExhaustive).work,
              std::uint64_t{1} << n);
    EXPECT_EQ(DsssDecide(inst, DsssSolver::kMeetInTheMiddle).work,
              (std::uint64_t{1} << (n / 2)) + (std::uint64_t{1} << (n - n / 2)));
  }
}

TEST(ForEachCombinationTest, CountsBinomials) {
  for (std::size_t n = 0; n <= 12; ++n) {
    for (std::size_t k = 0; k <= n + 1; ++k) {
      std::uint64_t count = 0;
      bool ok = true;
      ForEachCombination(n, k, [&](std::uint64_t s) {
        ++count;
        ok = ok && static_cast<std::size_t>(std::popcount(s)) == k;
      });
      const double expected = k > n ? 0 : std::round(std::tgamma(n + 1) /
                                                     (std::tgamma(k + 1) *
                                                      std::tgamma(n - k + 1)));
      EXPECT_EQ(static_cast<double>(count), expected);
      EXPECT_TRUE(ok);
    }
  }
}

TEST(GradientRecoveryTest, PlantedGradientAlwaysFound) {
  ChaChaRng rng(84);
  const RecoveryExperimentReport rep = RecoveryExperiment(2, 2, 2, 3, 30, rng);
  EXPECT_EQ(rep.planted_found, 30u);
}

TEST(GradientRecoveryTest, EmptyViewIsFalseEverywhere) {
  AdversaryView empty;
  EXPECT_TRUE(GradientRecoveryAttack(empty, GroupVector(4, {1, 2}), 2).empty());
  AdversaryView masked_only;
  masked_only.masked_multiset = {{1, 2}, {3, 4}};
  EXPECT_EQ(GradientRecoveryAttack(masked_only, GroupVector(4, {1, 2}), 2),
            (std::vector<bool>{false, false}));
}

TEST(GradientRecoveryTest, FalsePositivesTrackRegime) {
  ChaChaRng rng(85);
  // 2K = 4 > dm = 2: almost every hypothesis is explainable.
  const auto dense = RecoveryExperiment(2, 2, 1, 1, 200, rng);
  EXPECT_GT(dense.false_positive_rate(), 0.3);
  // 2K = 4 < dm = 24: essentially none are.
  const auto sparse = RecoveryExperiment(2, 2, 4, 5, 200, rng);
  EXPECT_EQ(sparse.planted_found, 200u);
  EXPECT_LT(sparse.false_positive_rate(), 0.01);
}

TEST(GradientRecoveryTest, SeedSubsetOption) {
  ChaChaRng rng(86);
  RoundConfig c;
  c.params.assign(2, 0.0);
  c.num_masks = 2;
  c.seed_bits = 64;
  c.quant = QuantizationParams::Make(3, 2, 0);
  Mixnet mixnet(MixnetOptions{}, ChaChaRng(87));
  const std::vector<GroupVector> locals{GroupVector(4, {1, 2}),
                                        GroupVector(4, {3, 4})};
  const auto res = RunSecureSum(c, locals, mixnet, rng);
  RecoveryOptions none;
  none.seed_indices = std::vector<std::size_t>{};
  EXPECT_EQ(GradientRecoveryAttack(res.view, locals[0], 2, none),
            (std::vector<bool>{false, false}));
  RecoveryOptions bad;
  bad.seed_indices = std::vector<std::size_t>{4};
  EXPECT_THROW(GradientRecoveryAttack(res.view, locals[0], 2, bad),
               ParameterError);
}

TEST(InjectivityTest, SecondPreimageRateBelowBound) {
  ChaChaRng rng(88);
  const InjectivityReport rep = InjectivityExperiment(2, 4, 2, 3000, rng);
  ASSERT_TRUE(rep.bound.has_value());
  EXPECT_DOUBLE_EQ(*rep.bound, 0.0625);
  EXPECT_LE(rep.rate, *rep.bound + 3 * rep.standard_error);
}

TEST(InjectivityTest, DegenerateCases) {
  ChaChaRng rng(89);
  const auto zero = InjectivityExperiment(2, 4, 0, 100, rng);
  EXPECT_EQ(zero.rate, 0.0);
  const auto boundary = InjectivityExperiment(1, 2, 1, 1000, rng);
  EXPECT_FALSE(boundary.bound.has_value());
  // Two uniform elements of Z_4: the other singleton collides with
  // probability 1/4.
  EXPECT_NEAR(boundary.rate, 0.25, 0.05);
  EXPECT_THROW(InjectivityExperiment(1, 1, 1, 10, rng), SizeError);
}

TEST(QuasirandomnessTest, HandEnumeratedCases) {
  EXPECT_EQ(SubsetSumTotalVariation({Scalar(1, 0), Scalar(1, 1)}, 1), 0.0);
  EXPECT_DOUBLE_EQ(SubsetSumTotalVariation({Scalar(2, 0), Scalar(2, 0)}, 1),
                   0.75);
  // {1, 2, 3} in Z_4, pairs sum to 3, 0, 1: three of four cells at 1/3.
  EXPECT_DOUBLE_EQ(
      SubsetSumTotalVariation({Scalar(2, 1), Scalar(2, 2), Scalar(2, 3)}, 2),
      0.25);
}

TEST(QuasirandomnessTest, DistanceShrinksWithMoreVectors) {
  ChaChaRng rng(90);
  double previous = 1.0;
  for (std::size_t k : {4u, 6u, 8u}) {
    const auto rep = QuasirandomnessExperiment(2, 2, k, 40, rng);
    EXPECT_LT(rep.median, previous) << "K=" << k;
    previous = rep.median;
  }
}

TEST(QuasirandomnessTest, BoundaryAndGuards) {
  ChaChaRng rng(91);
  const auto rep = QuasirandomnessExperiment(2, 2, 2, 10, rng);
  EXPECT_EQ(rep.distances.size(), 10u);
  EXPECT_TRUE(std::is_sorted(rep.distances.begin(), rep.distances.end()));
  EXPECT_THROW(QuasirandomnessExperiment(2, 2, 1, 10, rng), SizeError);
  EXPECT_THROW(QuasirandomnessExperiment(3, 6, 9, 1, rng), SizeError);
}

TEST(TwoClientFeaturesTest, RecoversOneAndTwo) {
  const double e = std::exp(1.0);
  const auto [x1, x2] = ReconstructTwoClientFeatures(
      std::exp(-1.0) + std::exp(-2.0) - 2, e + e * e - 2);
  EXPECT_NEAR(x1, 1.0, 1e-6);
  EXPECT_NEAR(x2, 2.0, 1e-6);
}

TEST(TwoClientFeaturesTest, EqualFeatures) {
  const double e = std::exp(1.0);
  const auto [x1, x2] =
      ReconstructTwoClientFeatures(2 * std::exp(-1.0) - 2, e + e - 2);
  EXPECT_NEAR(x1, 1.0, 1e-6);
  EXPECT_NEAR(x2, 1.0, 1e-6);
}

TEST(TwoClientFeaturesTest, RoundTripOnRandomPairs) {
  ChaChaRng rng(92);
  for (int i = 0; i < 200; ++i) {
    const double a = 0.05 + 4 * UniformUnit(rng);
    const double b = 0.05 + 4 * UniformUnit(rng);
    const auto [x1, x2] =
        ReconstructTwoClientFeatures(TwoClientGlobalGradient(-1, a, b),
                                     TwoClientGlobalGradient(1, a, b));
    EXPECT_NEAR(x1, std::min(a, b), 1e-6);
    EXPECT_NEAR(x2, std::max(a, b), 1e-6);
  }
}

TEST(TwoClientFeaturesTest, InfeasibleInputsFail) {
  EXPECT_THROW(ReconstructTwoClientFeatures(-3, 1), ReconstructionFailed);
  EXPECT_THROW(ReconstructTwoClientFeatures(0, 0), ReconstructionFailed);
  // A negative feature: both roots must exceed 1.
  EXPECT_THROW(ReconstructTwoClientFeatures(TwoClientGlobalGradient(-1, -0.5, 2),
                                            TwoClientGlobalGradient(1, -0.5, 2)),
               ReconstructionFailed);
  EXPECT_THROW(ReconstructTwoClientFeatures(std::nan(""), 1),
               ReconstructionFailed);
}

}  // namespace
}  // namespace secgd
