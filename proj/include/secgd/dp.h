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

// Gaussian-mechanism calibration and the per-honest-client noise split for
// the global gradient.
//
// GaussianSigma calibrates with the bound applied to the variance:
//   sigma^2 > (Delta2 / epsilon) * sqrt(2 ln(1.25 / delta)).
// The classical Gaussian mechanism states the same expression as a bound on
// sigma. README.md describes the difference.

#ifndef SECGD_DP_H_
#define SECGD_DP_H_

#include <cmath>
#include <random>

#include "secgd/errors.h"
#include "secgd/quantizer.h"
#include "secgd/random.h"

namespace secgd {

struct DpParams {
  double epsilon = 1.0;
  double delta = 1e-5;
  double l2_sensitivity = 1.0;
  int num_clients = 2;  // N
  int num_honest = 2;   // N_tilde

  void Validate() const {
    if (!(epsilon > 0) || !std::isfinite(epsilon)) {
      throw ParameterError("epsilon must be positive");
    }
    if (!(delta > 0 && delta < 1)) {
      throw ParameterError("delta must be in (0, 1)");
    }
    if (!(l2_sensitivity > 0) || !std::isfinite(l2_sensitivity)) {
      throw ParameterError("L2 sensitivity must be positive");
    }
    if (num_honest < 1 || num_honest > num_clients) {
      throw ParameterError("need 1 <= N_tilde <= N");
    }
  }
};

// Right-hand side of the variance bound.
inline double GaussianVarianceBound(const DpParams& p) {
  p.Validate();
  return p.l2_sensitivity / p.epsilon * std::sqrt(2 * std::log(1.25 / p.delta));
}

// Smallest sigma (to 1e-9 relative) whose square strictly exceeds the bound.
inline double GaussianSigma(const DpParams& p) {
  const double sigma = std::sqrt(GaussianVarianceBound(p) * (1 + 1e-9));
  if (!(sigma > 0) || !std::isfinite(sigma)) {
    throw ParameterError("sigma is not positive and finite");
  }
  return sigma;
}

inline double PerClientVariance(double sigma, int num_honest) {
  return sigma * sigma / num_honest;
}

struct NoiseAccounting {
  double per_client_variance;   // sigma^2 / N_tilde
  double honest_variance;       // N_tilde honest clients: sigma^2
  double all_clients_variance;  // every client adds sigma^2 / N_tilde
  double colluders_full_variance;  // (1 + N - N_tilde) sigma^2
};

inline NoiseAccounting AccountNoise(double sigma, const DpParams& p) {
  const double s2 = sigma * sigma;
  const double per = s2 / p.num_honest;
  return {per, per * p.num_honest, per * p.num_clients,
          (1.0 + p.num_clients - p.num_honest) * s2};
}

// Naive sequential composition over T rounds.
inline double ComposedEpsilon(double epsilon, int rounds) {
  return epsilon * rounds;
}

inline RealVector ClipL2(const RealVector& g, double bound) {
  if (!(bound > 0)) throw ParameterError("L2 clip bound must be positive");
  double sq = 0;
  for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm <= bound) return g;
  RealVector out(g.size());
  const double scale = bound / norm;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * scale;
  return out;
}

// Standard normal via Box-Muller on UniformUnit, so draws do not depend on the
// standard library's normal_distribution.
template <typename Rng>
double StandardNormal(Rng& rng) {
  double u1;
  do {
    u1 = UniformUnit(rng);
  } while (u1 == 0.0);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Adds i.i.d. N(0, sigma^2 / N_tilde) to every entry.
template <typename Rng>
RealVector LocalDpNoise(const RealVector& g, double sigma, int num_honest,
                        Rng& rng) {
  if (num_honest < 1) throw ParameterError("N_tilde must be >= 1");
  if (!(sigma >= 0)) throw ParameterError("sigma must be non-negative");
  if (sigma == 0) return g;
  const double sd = sigma / std::sqrt(static_cast<double>(num_honest));
  RealVector out(g);
  for (double& x : out) x += sd * StandardNormal(rng);
  return out;
}

// Client-side DP stage, run before the L-infinity clip and quantization:
// L2 clip to the sensitivity, then add the honest-client share of noise.
struct DpClientStage {
  double clip_norm;
  double sigma;
  int num_honest;

  template <typename Rng>
  RealVector Apply(const RealVector& g, Rng& rng) const {
    return LocalDpNoise(ClipL2(g, clip_norm), sigma, num_honest, rng);
  }
};

}  // namespace secgd

#endif  // SECGD_DP_H_
