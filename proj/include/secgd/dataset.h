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

// Synthetic, partitioned datasets and the local losses the simulator trains.

#ifndef SECGD_DATASET_H_
#define SECGD_DATASET_H_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "secgd/dp.h"
#include "secgd/errors.h"
#include "secgd/quantizer.h"
#include "secgd/random.h"

namespace secgd {

enum class ModelKind { kLinear, kLogistic };

struct DatasetSpec {
  ModelKind kind = ModelKind::kLinear;
  std::size_t num_clients = 4;
  std::size_t dim = 8;
  std::size_t samples_per_client = 32;
  double feature_scale = 1.0;
  double label_noise = 0.1;  // std-dev of the additive noise (linear only)
  std::uint64_t seed = 1;
};

struct ClientData {
  std::vector<RealVector> features;
  RealVector labels;
};

struct Dataset {
  std::vector<ClientData> clients;
  RealVector w_star;
};

inline double Dot(const RealVector& a, const RealVector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double Sigmoid(double z) {
  return z >= 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));
}

// Deterministic in spec.seed. Samples are generated in one stream and split
// into contiguous blocks, so N = 1 yields the whole dataset.
inline Dataset MakeDataset(const DatasetSpec& spec) {
  if (spec.num_clients == 0 || spec.dim == 0 || spec.samples_per_client == 0) {
    throw ParameterError("dataset needs clients, dimensions and samples");
  }
  ChaChaRng rng(spec.seed, /*stream=*/0xda7a);
  Dataset ds;
  ds.w_star.resize(spec.dim);
  for (double& w : ds.w_star) w = StandardNormal(rng);
  ds.clients.resize(spec.num_clients);
  for (ClientData& c : ds.clients) {
    for (std::size_t s = 0; s < spec.samples_per_client; ++s) {
      RealVector x(spec.dim);
      for (double& v : x) v = spec.feature_scale * StandardNormal(rng);
      const double z = Dot(x, ds.w_star);
      double y;
      if (spec.kind == ModelKind::kLinear) {
        y = z + spec.label_noise * StandardNormal(rng);
      } else {
        y = UniformUnit(rng) < Sigmoid(z) ? 1.0 : 0.0;
      }
      c.features.push_back(std::move(x));
      c.labels.push_back(y);
    }
  }
  return ds;
}

// Mean loss over the client's samples: squared error / 2 or log loss.
inline double LocalLoss(ModelKind kind, const ClientData& data,
                        const RealVector& w) {
  double total = 0;
  for (std::size_t s = 0; s < data.labels.size(); ++s) {
    const double z = Dot(data.features[s], w);
    const double y = data.labels[s];
    if (kind == ModelKind::kLinear) {
      total += 0.5 * (z - y) * (z - y);
    } else {
      // log(1 + e^z) - y z, computed stably.
      total += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) -
               y * z;
    }
  }
  return total / data.labels.size();
}

inline RealVector LocalGradient(ModelKind kind, const ClientData& data,
                                const RealVector& w) {
  RealVector g(w.size(), 0.0);
  for (std::size_t s = 0; s < data.labels.size(); ++s) {
    const RealVector& x = data.features[s];
    const double z = Dot(x, w);
    const double r = kind == ModelKind::kLinear ? z - data.labels[s]
                                                : Sigmoid(z) - data.labels[s];
    for (std::size_t j = 0; j < w.size(); ++j) g[j] += r * x[j];
  }
  for (double& v : g) v /= data.labels.size();
  return g;
}

inline double GlobalLoss(ModelKind kind, const Dataset& ds,
                         const RealVector& w) {
  double total = 0;
  for (const ClientData& c : ds.clients) total += LocalLoss(kind, c, w);
  return total / ds.clients.size();
}

}  // namespace secgd

#endif  // SECGD_DATASET_H_
