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

// The attacker's side of the protocol, at desk scale.
//
// Deciding whether a client could have held gradient h behind a masked
// message a is a d-dimensional subset-sum question: is there a K-element
// submultiset of the observed seed expansions summing to h - a in Z_{2^m}^d?
// This header provides exact solvers for small instances, the reduction
// itself, Monte Carlo probes of the injective and quasi-random regimes of
// the random subset-sum family, and the two-client leakage example that
// motivates adding differential privacy to the global gradient.

#ifndef SECGD_ADVERSARY_H_
#define SECGD_ADVERSARY_H_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "secgd/errors.h"
#include "secgd/group_math.h"
#include "secgd/mask.h"
#include "secgd/mixnet.h"
#include "secgd/random.h"

namespace secgd {

inline constexpr std::size_t kMaxExhaustiveItems = 24;
inline constexpr std::size_t kMaxMeetInTheMiddleItems = 40;

struct DsssInstance {
  std::vector<GroupVector> base;  // B
  GroupVector target;             // w
  // Required subset size, or any size when unset.
  std::optional<std::size_t> cardinality;
};

struct DsssResult {
  bool found = false;
  std::vector<std::size_t> witness;  // ascending indices into base
  std::uint64_t work = 0;            // subset sums evaluated
};

enum class DsssSolver { kAuto, kExhaustive, kMeetInTheMiddle };

namespace internal {

inline std::uint64_t Mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t HashEntries(const std::vector<std::uint64_t>& v) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t e : v) h = Mix64(h ^ e) + 0x9e3779b97f4a7c15ULL;
  return h;
}

// Running subset sum over a fixed list of vectors, updated one flip at a time
// while walking subsets in Gray-code order.
class GraySum {
 public:
  GraySum(const std::vector<GroupVector>& items, std::size_t first,
          std::size_t count, std::size_t dim, int bits)
      : items_(items), first_(first), count_(count), sum_(dim, 0),
        mask_(ModulusMask(bits)) {}

  // Advances to the subset with Gray index i (i >= 1). Returns the mask.
  std::uint64_t Step(std::uint64_t i) {
    const int bit = std::countr_zero(i);
    const std::uint64_t flip = std::uint64_t{1} << bit;
    const GroupVector& v = items_[first_ + bit];
    if (gray_ & flip) {
      for (std::size_t j = 0; j < sum_.size(); ++j) {
        sum_[j] = (sum_[j] - v[j]) & mask_;
      }
    } else {
      for (std::size_t j = 0; j < sum_.size(); ++j) {
        sum_[j] = (sum_[j] + v[j]) & mask_;
      }
    }
    gray_ ^= flip;
    return gray_;
  }

  std::uint64_t subset() const { return gray_; }
  const std::vector<std::uint64_t>& sum() const { return sum_; }
  std::uint64_t total() const { return std::uint64_t{1} << count_; }

 private:
  const std::vector<GroupVector>& items_;
  std::size_t first_;
  std::size_t count_;
  std::vector<std::uint64_t> sum_;
  std::uint64_t mask_;
  std::uint64_t gray_ = 0;
};

inline std::vector<std::uint64_t> SubsetSum(const std::vector<GroupVector>& items,
                                            std::size_t first,
                                            std::uint64_t subset,
                                            std::size_t dim, int bits) {
  std::vector<std::uint64_t> s(dim, 0);
  for (; subset; subset &= subset - 1) {
    const GroupVector& v = items[first + std::countr_zero(subset)];
    for (std::size_t j = 0; j < dim; ++j) s[j] += v[j];
  }
  const std::uint64_t mask = ModulusMask(bits);
  for (auto& e : s) e &= mask;
  return s;
}

inline std::vector<std::size_t> MaskToIndices(std::uint64_t subset,
                                              std::size_t offset) {
  std::vector<std::size_t> out;
  for (; subset; subset &= subset - 1) {
    out.push_back(offset + static_cast<std::size_t>(std::countr_zero(subset)));
  }
  return out;
}

inline void ValidateInstance(const DsssInstance& inst) {
  for (const GroupVector& b : inst.base) {
    if (!b.SameShape(inst.target)) {
      throw ParameterError("d-SSS vectors must share (d, m) with the target");
    }
  }
  if (inst.cardinality && *inst.cardinality > inst.base.size()) {
    throw ParameterError("cardinality exceeds the multiset size");
  }
}

inline DsssResult SolveExhaustive(const DsssInstance& inst) {
  const std::size_t n = inst.base.size();
  const std::size_t dim = inst.target.dim();
  const int bits = inst.target.bits();
  DsssResult out;
  auto matches = [&](std::uint64_t subset, const std::vector<std::uint64_t>& s) {
    if (inst.cardinality &&
        static_cast<std::size_t>(std::popcount(subset)) != *inst.cardinality) {
      return false;
    }
    return s == inst.target.entries();
  };
  GraySum walk(inst.base, 0, n, dim, bits);
  out.work = 1;
  if (matches(0, walk.sum())) {
    out.found = true;
    return out;
  }
  for (std::uint64_t i = 1; i < walk.total(); ++i) {
    const std::uint64_t subset = walk.Step(i);
    ++out.work;
    if (matches(subset, walk.sum())) {
      out.found = true;
      out.witness = MaskToIndices(subset, 0);
      return out;
    }
  }
  return out;
}

inline DsssResult SolveMeetInTheMiddle(const DsssInstance& inst) {
  const std::size_t n = inst.base.size();
  const std::size_t dim = inst.target.dim();
  const int bits = inst.target.bits();
  const std::uint64_t mask = ModulusMask(bits);
  const std::size_t left_n = n / 2;
  const std::size_t right_n = n - left_n;
  DsssResult out;

  struct Entry {
    std::uint64_t hash;
    std::uint32_t count;
    std::uint64_t subset;
  };
  // Right half: every subset sum, keyed by (hash of sum, size).
  std::vector<Entry> table;
  table.reserve(std::size_t{1} << right_n);
  {
    GraySum walk(inst.base, left_n, right_n, dim, bits);
    auto record = [&](std::uint64_t subset) {
      const auto c = static_cast<std::uint32_t>(std::popcount(subset));
      if (inst.cardinality && c > *inst.cardinality) return;
      table.push_back({HashEntries(walk.sum()), inst.cardinality ? c : 0u,
                       subset});
    };
    record(0);
    ++out.work;
    for (std::uint64_t i = 1; i < walk.total(); ++i) {
      record(walk.Step(i));
      ++out.work;
    }
  }
  std::sort(table.begin(), table.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.hash, a.count) < std::tie(b.hash, b.count);
  });

  // Left half: look up the complement w - s.
  GraySum walk(inst.base, 0, left_n, dim, bits);
  std::vector<std::uint64_t> need(dim);
  auto probe = [&](std::uint64_t subset) -> bool {
    const auto c = static_cast<std::size_t>(std::popcount(subset));
    if (inst.cardinality && c > *inst.cardinality) return false;
    for (std::size_t j = 0; j < dim; ++j) {
      need[j] = (inst.target[j] - walk.sum()[j]) & mask;
    }
    const Entry key{HashEntries(need),
                    inst.cardinality
                        ? static_cast<std::uint32_t>(*inst.cardinality - c)
                        : 0u,
                    0};
    auto range = std::equal_range(
        table.begin(), table.end(), key, [](const Entry& a, const Entry& b) {
          return std::tie(a.hash, a.count) < std::tie(b.hash, b.count);
        });
    for (auto it = range.first; it != range.second; ++it) {
      if (SubsetSum(inst.base, left_n, it->subset, dim, bits) == need) {
        out.found = true;
        out.witness = MaskToIndices(subset, 0);
        auto right = MaskToIndices(it->subset, left_n);
        out.witness.insert(out.witness.end(), right.begin(), right.end());
        return true;
      }
    }
    return false;
  };
  ++out.work;
  if (probe(0)) return out;
  for (std::uint64_t i = 1; i < walk.total(); ++i) {
    ++out.work;
    if (probe(walk.Step(i))) return out;
  }
  return out;
}

}  // namespace internal

// Exact decision (with witness) for the d-dimensional subset-sum problem over
// Z_{2^m}^d. Refuses instances beyond the exhaustive-search guards rather than
// approximating.
inline DsssResult DsssDecide(const DsssInstance& instance,
                             DsssSolver solver = DsssSolver::kAuto) {
  internal::ValidateInstance(instance);
  const std::size_t n = instance.base.size();
  if (solver == DsssSolver::kAuto) {
    solver = n <= 12 ? DsssSolver::kExhaustive : DsssSolver::kMeetInTheMiddle;
  }
  if (solver == DsssSolver::kExhaustive) {
    if (n > kMaxExhaustiveItems) {
      throw SizeError("exhaustive d-SSS limited to " +
                      std::to_string(kMaxExhaustiveItems) + " vectors, got " +
                      std::to_string(n));
    }
    return internal::SolveExhaustive(instance);
  }
  if (n > kMaxMeetInTheMiddleItems) {
    throw SizeError("meet-in-the-middle d-SSS limited to " +
                    std::to_string(kMaxMeetInTheMiddleItems) +
                    " vectors, got " + std::to_string(n));
  }
  return internal::SolveMeetInTheMiddle(instance);
}

struct RecoveryOptions {
  // Restrict B to these positions of the view's seed multiset. Unset means
  // every observed seed.
  std::optional<std::vector<std::size_t>> seed_indices;
  DsssSolver solver = DsssSolver::kAuto;
};

// For each masked gradient a in the view (in masked_multiset order), decides
// whether some K observed seeds expand to h - a, i.e. whether a client holding
// quantized gradient h could have produced a.
inline std::vector<bool> GradientRecoveryAttack(
    const AdversaryView& view, const GroupVector& hypothesis,
    std::size_t num_masks, const RecoveryOptions& options = {}) {
  const std::size_t dim = hypothesis.dim();
  const int bits = hypothesis.bits();
  std::vector<GroupVector> base;
  auto add_seed = [&](const std::vector<std::uint8_t>& payload) {
    if (payload.empty()) throw FormatError("empty seed payload");
    // The expansion only depends on the seed bytes, so q = 8 * length is
    // equivalent to the true q here.
    base.push_back(Expand(DecodeSeed(payload, static_cast<int>(
                                                  8 * payload.size())),
                          dim, bits));
  };
  if (options.seed_indices) {
    for (std::size_t i : *options.seed_indices) {
      if (i >= view.seed_multiset.size()) {
        throw ParameterError("seed index out of range");
      }
      add_seed(view.seed_multiset[i]);
    }
  } else {
    for (const auto& p : view.seed_multiset) add_seed(p);
  }
  if (base.size() > kMaxMeetInTheMiddleItems) {
    throw SizeError("view holds " + std::to_string(base.size()) +
                    " seeds; solver limit is " +
                    std::to_string(kMaxMeetInTheMiddleItems));
  }

  std::vector<bool> out;
  out.reserve(view.masked_multiset.size());
  for (const auto& payload : view.masked_multiset) {
    const GroupVector masked = Deserialize(payload, dim, bits);
    if (num_masks > base.size()) {
      out.push_back(false);
      continue;
    }
    DsssInstance inst{base, Sub(hypothesis, masked), num_masks};
    out.push_back(DsssDecide(inst, options.solver).found);
  }
  return out;
}

// Calls f(subset) for every n-bit mask with exactly k bits set, ascending.
template <typename F>
void ForEachCombination(std::size_t n, std::size_t k, F&& f) {
  if (k > n) return;
  if (k == 0) {
    f(std::uint64_t{0});
    return;
  }
  const std::uint64_t limit = std::uint64_t{1} << n;
  std::uint64_t s = (std::uint64_t{1} << k) - 1;
  while (s < limit) {
    f(s);
    const std::uint64_t c = s & (~s + 1);
    const std::uint64_t r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
}

template <typename Rng>
std::vector<GroupVector> UniformVectors(std::size_t count, std::size_t dim,
                                        int bits, Rng& rng) {
  const std::uint64_t mask = ModulusMask(bits);
  std::vector<GroupVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint64_t> e(dim);
    for (auto& x : e) x = rng() & mask;
    out.emplace_back(bits, std::move(e));
  }
  return out;
}

struct InjectivityReport {
  std::size_t trials = 0;
  std::size_t collisions = 0;
  double rate = 0;
  double standard_error = 0;
  // 2^(2K - dm); only reported in the injective regime 2K < dm.
  std::optional<double> bound;
};

// Draws B (2K uniform vectors) and a uniform K-subset S, then searches every
// other K-subset for a second preimage of the same sum.
template <typename Rng>
InjectivityReport InjectivityExperiment(std::size_t dim, int bits,
                                        std::size_t num_masks,
                                        std::size_t trials, Rng& rng) {
  const std::size_t n = 2 * num_masks;
  const std::size_t dm = dim * static_cast<std::size_t>(bits);
  if (n > dm) throw SizeError("injectivity regime requires 2K <= dm");
  if (n > kMaxExhaustiveItems) {
    throw SizeError("2K too large for exhaustive second-preimage search");
  }
  InjectivityReport rep;
  rep.trials = trials;
  if (n < dm) rep.bound = std::ldexp(1.0, static_cast<int>(n) - static_cast<int>(dm));
  if (num_masks == 0 || trials == 0) return rep;

  std::vector<std::uint64_t> subsets;
  ForEachCombination(n, num_masks, [&](std::uint64_t s) { subsets.push_back(s); });
  for (std::size_t t = 0; t < trials; ++t) {
    const auto base = UniformVectors(n, dim, bits, rng);
    const std::uint64_t chosen = subsets[UniformBelow(rng, subsets.size())];
    const auto target = internal::SubsetSum(base, 0, chosen, dim, bits);
    for (std::uint64_t s : subsets) {
      if (s != chosen && internal::SubsetSum(base, 0, s, dim, bits) == target) {
        ++rep.collisions;
        break;
      }
    }
  }
  rep.rate = static_cast<double>(rep.collisions) / trials;
  rep.standard_error = std::sqrt(rep.rate * (1 - rep.rate) / trials);
  return rep;
}

// Exact total-variation distance between the sum of a uniformly random
// K-subset of `base` and the uniform distribution on Z_{2^m}^d.
inline double SubsetSumTotalVariation(const std::vector<GroupVector>& base,
                                      std::size_t num_masks) {
  if (base.empty()) throw ParameterError("empty multiset");
  const std::size_t dim = base.front().dim();
  const int bits = base.front().bits();
  const std::size_t dm = dim * static_cast<std::size_t>(bits);
  if (dm > 16) throw SizeError("tabulation limited to dm <= 16");
  if (base.size() > kMaxExhaustiveItems) {
    throw SizeError("too many vectors for exhaustive tabulation");
  }
  if (num_masks > base.size()) throw ParameterError("K exceeds |B|");
  std::vector<std::uint64_t> histogram(std::size_t{1} << dm, 0);
  std::uint64_t total = 0;
  ForEachCombination(base.size(), num_masks, [&](std::uint64_t s) {
    const auto sum = internal::SubsetSum(base, 0, s, dim, bits);
    std::size_t cell = 0;
    for (std::uint64_t e : sum) cell = (cell << bits) | e;
    ++histogram[cell];
    ++total;
  });
  const double uniform = 1.0 / histogram.size();
  double tv = 0;
  for (std::uint64_t h : histogram) {
    tv += std::abs(static_cast<double>(h) / total - uniform);
  }
  return tv / 2;
}

struct QuasirandomnessReport {
  std::vector<double> distances;  // one per draw of B, ascending
  double median = 0;
  double mean = 0;
};

template <typename Rng>
QuasirandomnessReport QuasirandomnessExperiment(std::size_t dim, int bits,
                                                std::size_t num_masks,
                                                std::size_t trials, Rng& rng) {
  const std::size_t n = 2 * num_masks;
  const std::size_t dm = dim * static_cast<std::size_t>(bits);
  if (n < dm) throw SizeError("quasi-random regime requires 2K >= dm");
  if (dm > 16) throw SizeError("tabulation limited to dm <= 16");
  if (n > kMaxExhaustiveItems) throw SizeError("2K too large to tabulate");
  QuasirandomnessReport rep;
  if (trials == 0) return rep;
  for (std::size_t t = 0; t < trials; ++t) {
    rep.distances.push_back(
        SubsetSumTotalVariation(UniformVectors(n, dim, bits, rng), num_masks));
  }
  std::sort(rep.distances.begin(), rep.distances.end());
  const std::size_t k = rep.distances.size();
  rep.median = k % 2 ? rep.distances[k / 2]
                     : (rep.distances[k / 2 - 1] + rep.distances[k / 2]) / 2;
  for (double x : rep.distances) rep.mean += x;
  rep.mean /= k;
  return rep;
}

// Two clients with one positive feature each and loss L(w, x) = e^{wx}/x - w,
// so dL/dw = e^{wx} - 1. The global gradient at w.
inline double TwoClientGlobalGradient(double w, double x1, double x2) {
  return std::exp(w * x1) - 1 + std::exp(w * x2) - 1;
}

// Recovers {x1, x2} (ascending) from the global gradients observed at w = -1
// and w = 1. With u = e^{x1}, v = e^{x2}: u + v = g(1) + 2 and
// 1/u + 1/v = g(-1) + 2, so uv = (u + v) / (1/u + 1/v) and u, v are the roots
// of z^2 - (u + v) z + uv.
inline std::pair<double, double> ReconstructTwoClientFeatures(
    double gradient_at_minus_one, double gradient_at_plus_one) {
  const double sum = gradient_at_plus_one + 2;
  const double inv_sum = gradient_at_minus_one + 2;
  if (!(sum > 0 && inv_sum > 0) || !std::isfinite(sum) ||
      !std::isfinite(inv_sum)) {
    throw ReconstructionFailed("observed gradients admit no real features");
  }
  const double product = sum / inv_sum;
  double disc = sum * sum - 4 * product;
  // x1 == x2 sits exactly on disc == 0; allow rounding noise there.
  if (disc < 0 && disc > -1e-9 * sum * sum) disc = 0;
  if (disc < 0) throw ReconstructionFailed("no real solution");
  const double root = std::sqrt(disc);
  const double v = (sum + root) / 2;
  const double u = product / v;
  if (!(u > 1)) {
    throw ReconstructionFailed("solution has a non-positive feature");
  }
  return {std::log(u), std::log(v)};
}

}  // namespace secgd

#endif  // SECGD_ADVERSARY_H_
