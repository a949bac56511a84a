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

// Real <-> Z_{2^m} mapping: L-infinity clipping, shifting, stochastic rounding
// and recovery of the real-valued sum.

#ifndef SECGD_QUANTIZER_H_
#define SECGD_QUANTIZER_H_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "secgd/errors.h"
#include "secgd/group_math.h"
#include "secgd/random.h"

namespace secgd {

using RealVector = std::vector<double>;

inline bool AllFinite(const RealVector& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

struct QuantizationParams {
  int m_tilde = 16;        // bits per local entry
  int fraction_bits = 8;   // bits after the binary point
  int num_clients = 2;

  // Default fraction bits: half of the local entry width.
  static QuantizationParams Make(int m_tilde, int num_clients) {
    return Make(m_tilde, num_clients, m_tilde / 2);
  }
  static QuantizationParams Make(int m_tilde, int num_clients,
                                 int fraction_bits) {
    QuantizationParams p{m_tilde, fraction_bits, num_clients};
    p.Validate();
    return p;
  }

  // ceil(log2 N) headroom bits so that N summands below 2^m_tilde never wrap.
  int headroom_bits() const {
    return num_clients <= 1
               ? 0
               : std::bit_width(static_cast<std::uint64_t>(num_clients - 1));
  }

  int total_bits() const { return m_tilde + headroom_bits(); }

  // C = (2^(m_tilde-1) - 1/2) / 2^f.
  double clip_radius() const {
    return std::ldexp(std::ldexp(1.0, m_tilde - 1) - 0.5, -fraction_bits);
  }

  void Validate() const {
    if (m_tilde < 1) throw ParameterError("m_tilde must be >= 1");
    if (fraction_bits < 0 || fraction_bits >= m_tilde) {
      throw ParameterError("fraction bits must be in [0, m_tilde)");
    }
    if (num_clients < 1) throw ParameterError("N must be >= 1");
    if (total_bits() > kMaxGroupBits) {
      throw ParameterError("m = m_tilde + ceil(log2 N) = " +
                           std::to_string(total_bits()) + " exceeds 64");
    }
    if (!(clip_radius() > 0)) throw ParameterError("clip radius not positive");
  }

  friend bool operator==(const QuantizationParams&,
                         const QuantizationParams&) = default;
};

// Projects onto the L-infinity ball of radius C, preserving entry ratios.
inline RealVector ClipLinf(const RealVector& g,
                           const QuantizationParams& params) {
  const double radius = params.clip_radius();
  double norm = 0;
  for (double x : g) norm = std::max(norm, std::abs(x));
  if (norm <= radius) return g;
  RealVector out(g.size());
  const double scale = radius / norm;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * scale;
  // Rounding in the product can overshoot the radius by one ulp.
  for (double& x : out) x = std::clamp(x, -radius, radius);
  return out;
}

// Stochastic rounding of the shifted, scaled entries into [0, 2^m_tilde - 1],
// emitted as a vector in Z_{2^m} with m = params.total_bits(). Unbiased:
// E[entry] = (r + C) * 2^f.
template <typename Rng>
GroupVector Quantize(const RealVector& g, const QuantizationParams& params,
                     Rng& rng) {
  const double radius = params.clip_radius();
  const double scale = std::ldexp(1.0, params.fraction_bits);
  std::vector<std::uint64_t> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g[i];
    if (!(r >= -radius && r <= radius)) {
      throw PreconditionError("entry " + std::to_string(r) +
                              " outside the clip radius " +
                              std::to_string(radius) + "; clip first");
    }
    const double x = (r + radius) * scale;
    const double lower = std::floor(x);
    const double frac = x - lower;
    auto q = static_cast<std::uint64_t>(lower);
    if (frac > 0 && UniformUnit(rng) < frac) ++q;
    out[i] = q;
  }
  return GroupVector(params.total_bits(), std::move(out));
}

// Clip then quantize.
template <typename Rng>
GroupVector Preprocess(const RealVector& g, const QuantizationParams& params,
                       Rng& rng) {
  if (!AllFinite(g)) throw DataError("gradient has non-finite entries");
  return Quantize(ClipLinf(g, params), params, rng);
}

// Undoes the shift and scale for a sum of N quantized vectors: s/2^f - N*C.
inline RealVector DequantizeSum(const GroupVector& sum,
                                const QuantizationParams& params) {
  const double offset = params.num_clients * params.clip_radius();
  RealVector out(sum.dim());
  for (std::size_t i = 0; i < sum.dim(); ++i) {
    out[i] = std::ldexp(static_cast<double>(sum[i]), -params.fraction_bits) -
             offset;
  }
  return out;
}

}  // namespace secgd

#endif  // SECGD_QUANTIZER_H_
