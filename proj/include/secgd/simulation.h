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

// End-to-end orchestration: one protocol round across N clients, the mixnet
// and the server; full training runs against a plaintext baseline; and the
// cost accounting for both.

#ifndef SECGD_SIMULATION_H_
#define SECGD_SIMULATION_H_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "secgd/adversary.h"
#include "secgd/client.h"
#include "secgd/dataset.h"
#include "secgd/dp.h"
#include "secgd/errors.h"
#include "secgd/experiment_config.h"
#include "secgd/mask.h"
#include "secgd/mixnet.h"
#include "secgd/protocol.h"
#include "secgd/quantizer.h"
#include "secgd/server.h"
#include "secgd/tcp_transport.h"

namespace secgd {

// Bytes one client uploads per round in data messages:
// d*ceil(m/8) + K*ceil(q/8) + (K+1) headers.
constexpr std::size_t ExpectedUplinkBytes(std::size_t dim, int bits,
                                          std::size_t masks, int seed_bits) {
  return dim * BytesPerEntry(bits) + masks * SeedBytes(seed_bits) +
         (masks + 1) * kMessageHeaderBytes;
}

struct CostReport {
  std::size_t uplink_bytes = 0;    // per client per round, data messages
  std::size_t request_bytes = 0;   // per client per round, param + hash requests
  std::size_t downlink_bytes = 0;  // per client per round, config + digests
  double client_compute_s = 0;     // mean per client per round
  double server_compute_s = 0;     // mean per round
};

// Fully resolved protocol parameters for an experiment.
struct ProtocolSetup {
  QuantizationParams quant;
  std::uint32_t masks;
  int seed_bits;
  std::vector<std::string> warnings;
};

inline ProtocolSetup ResolveProtocol(const ExperimentConfig& c) {
  ValidateConfig(c);
  ProtocolSetup s{QuantizationParams::Make(c.m_tilde, c.clients,
                                           c.fraction_bits),
                  0, 0, {}};
  const std::uint32_t recommended =
      RecommendedNumMasks(static_cast<std::size_t>(c.dim), s.quant.total_bits());
  s.masks = c.masks > 0 ? static_cast<std::uint32_t>(c.masks) : recommended;
  if (s.masks < recommended) {
    s.warnings.push_back("K = " + std::to_string(s.masks) +
                         " is below d*m/2 = " + std::to_string(recommended) +
                         "; subset-sum hardness is weakened");
  }
  s.seed_bits =
      c.seed_bits > 0 ? c.seed_bits : SeedBits(s.masks, c.collision_p);
  if (c.hash_checks == 0) {
    s.warnings.push_back("hash_checks = 0: equivocation cannot be detected");
  }
  return s;
}

// Integer-level secure sum: each client masks its quantized vector and
// submits through the mixnet; the server ledger collects and sums. This is
// the protocol core without config fetch, gradients or model updates.
struct SecureSumResult {
  std::variant<GroupVector, RoundVoid> aggregate;
  AdversaryView view;
  std::vector<PreparedRound> prepared;
};

template <typename Rng>
SecureSumResult RunSecureSum(const RoundConfig& config,
                             const std::vector<GroupVector>& quantized,
                             Mixnet& mixnet, Rng& rng) {
  mixnet.OpenRound(config.round, config.round_length_s);
  SecureSumResult out{GroupVector::Zero(config.dim(), config.group_bits()),
                      {}, {}};
  for (const GroupVector& q : quantized) {
    out.prepared.push_back(MaskAndSchedule(config, q, rng));
    for (const ScheduledMessage& m : out.prepared.back().messages) {
      mixnet.Submit(m.message, m.send_time);
    }
  }
  RoundLedger ledger = RoundLedger::ForConfig(config);
  mixnet.CloseRound(config.round, [&](const RoundMessage& msg, double) {
    ledger.Append(msg);
  });
  ledger.Close();
  out.aggregate = AggregateExact(ledger);
  out.view = mixnet.Tap(config.round);
  return out;
}

struct RecoveryExperimentReport {
  std::size_t trials = 0;
  std::size_t planted_found = 0;      // true client's masked message flagged
  std::size_t false_positive_hits = 0;
  std::size_t false_positive_queries = 0;

  double false_positive_rate() const {
    return false_positive_queries
               ? static_cast<double>(false_positive_hits) /
                     false_positive_queries
               : 0.0;
  }
};

// Plants N uniformly random quantized gradients, runs the secure sum, and
// asks the reduction (a) whether client 0's true gradient explains client 0's
// masked message and (b) whether a fresh random hypothesis explains any masked
// message.
inline RecoveryExperimentReport RecoveryExperiment(int num_clients,
                                                   std::uint32_t masks,
                                                   std::size_t dim, int m_tilde,
                                                   std::size_t trials,
                                                   ChaChaRng& rng) {
  RoundConfig config;
  config.params.assign(dim, 0.0);
  config.num_masks = masks;
  config.seed_bits = 64;
  config.quant = QuantizationParams::Make(m_tilde, num_clients, 0);
  const int bits = config.group_bits();
  Mixnet mixnet(MixnetOptions{}, rng.Fork(7));
  RecoveryExperimentReport rep;
  rep.trials = trials;
  const std::uint64_t local_mask = ModulusMask(m_tilde);
  auto draw = [&] {
    std::vector<std::uint64_t> e(dim);
    for (auto& x : e) x = rng() & local_mask;
    return GroupVector(bits, std::move(e));
  };
  for (std::size_t t = 0; t < trials; ++t) {
    config.round = static_cast<std::uint32_t>(t);
    std::vector<GroupVector> quantized;
    for (int i = 0; i < num_clients; ++i) quantized.push_back(draw());
    SecureSumResult res = RunSecureSum(config, quantized, mixnet, rng);

    std::vector<std::uint8_t> planted_payload;
    for (const auto& m : res.prepared[0].messages) {
      if (m.message.type == MessageType::kMaskedGradient) {
        planted_payload = m.message.payload;
      }
    }
    const auto hits = GradientRecoveryAttack(res.view, quantized[0], masks);
    for (std::size_t k = 0; k < hits.size(); ++k) {
      if (hits[k] && res.view.masked_multiset[k] == planted_payload) {
        ++rep.planted_found;
        break;
      }
    }

    GroupVector decoy = draw();
    bool sent = false;
    for (const auto& q : quantized) sent = sent || q == decoy;
    if (sent) continue;
    const auto decoy_hits = GradientRecoveryAttack(res.view, decoy, masks);
    rep.false_positive_queries += decoy_hits.size();
    rep.false_positive_hits += static_cast<std::size_t>(
        std::count(decoy_hits.begin(), decoy_hits.end(), true));
  }
  return rep;
}

struct RoundRecord {
  std::uint32_t t = 0;
  std::uint32_t wire_round = 0;
  int attempts = 0;
  double loss_secgd = 0;
  double loss_plain = 0;
  double linf_distance = 0;
  bool exact = false;  // integer aggregate == sum of local quantized vectors
};

struct RecoveryRecord {
  std::uint32_t wire_round = 0;
  std::size_t masked_messages = 0;
  std::size_t candidates = 0;  // masked messages consistent with the hypothesis
  bool planted_found = false;
};

struct EquivocationRecord {
  std::size_t victims = 0;
  std::size_t victims_detected = 0;
  std::size_t bystanders_aborted = 0;
  bool round_void = false;
};

struct TrainingResult {
  std::vector<RoundRecord> rounds;
  RealVector w_secgd;
  RealVector w_plain;
  RealVector w_star;
  ProtocolSetup setup;
  CostReport cost;
  std::size_t void_rounds = 0;
  std::optional<RecoveryRecord> recovery;
  std::optional<EquivocationRecord> equivocation;
  std::optional<double> dp_sigma;
  std::optional<NoiseAccounting> dp_accounting;
};

inline double LinfDistance(const RealVector& a, const RealVector& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// The wiring of one simulated deployment.
class Simulation {
 public:
  explicit Simulation(const ExperimentConfig& config)
      : config_(config),
        setup_(ResolveProtocol(config)),
        dataset_(MakeDataset(DatasetSpec{
            config.dataset, static_cast<std::size_t>(config.clients),
            static_cast<std::size_t>(config.dim),
            static_cast<std::size_t>(config.samples_per_client),
            config.feature_scale, config.label_noise, config.data_seed})),
        root_rng_(config.seed, /*stream=*/0x5ec9d) {
    ModelState initial;
    initial.w.assign(static_cast<std::size_t>(config.dim), 0.0);
    initial.eta = {config.eta, config.eta_decay};
    initial.lambda = config.lambda;
    initial.regularizer = config.regularizer;
    plain_ = initial;
    server_ = std::make_unique<Server>(
        initial, ServerSettings{setup_.masks, setup_.seed_bits, setup_.quant,
                                config.round_length_s});

    std::shared_ptr<Transport> transport;
    if (config.transport == TransportKind::kTcpLoopback) {
      transport = std::make_shared<TcpLoopbackTransport>();
    }
    MixnetOptions mix;
    mix.latency = config.latency_model;
    mix.latency_s = config.latency_s;
    mix.latency_budget_s = config.latency_model == LatencyModel::kUniform
                               ? config.latency_s
                               : 20 * config.latency_s;
    mix.drop_probability = config.drop_probability;
    mixnet_ = std::make_unique<Mixnet>(mix, root_rng_.Fork(1), transport);

    if (config.dp) {
      const DpParams p{config.dp_epsilon, config.dp_delta, config.dp_clip,
                       config.clients, config.dp_honest};
      dp_sigma_ = GaussianSigma(p);
      dp_accounting_ = AccountNoise(*dp_sigma_, p);
    }
    const ClientPolicy policy{config.hash_checks, config.min_m_tilde};
    for (int i = 0; i < config.clients; ++i) {
      const ClientData* data = &dataset_.clients[static_cast<std::size_t>(i)];
      const ModelKind kind = config.dataset;
      std::optional<DpClientStage> dp;
      if (dp_sigma_) dp = DpClientStage{config.dp_clip, *dp_sigma_, config.dp_honest};
      clients_.emplace_back(
          [data, kind](const RealVector& w) {
            return LocalGradient(kind, *data, w);
          },
          policy, root_rng_.Fork(100 + static_cast<std::uint64_t>(i)), dp);
    }
  }

  struct RoundRun {
    RoundOutcome outcome;
    std::vector<std::optional<PreparedRound>> prepared;  // nullopt: aborted
    std::vector<std::optional<ProtocolAbort>> aborts;
  };

  // One protocol attempt: publish, fetch + verify, mask + submit, deliver,
  // aggregate. Clients run concurrently; results are order-independent.
  RoundRun RunRound() {
    const PublishedRound pub = server_->PublishRound();
    const std::uint32_t wire = pub.config.round;
    mixnet_->OpenRound(wire, pub.config.round_length_s);

    const std::size_t n = clients_.size();
    RoundRun run{{}, std::vector<std::optional<PreparedRound>>(n),
                 std::vector<std::optional<ProtocolAbort>>(n)};
    std::vector<double> compute_s(n, 0);
    std::vector<std::size_t> downlink(n, 0), requests(n, 0);

    auto serve = [this](const RoundMessage& req, ConnectionTag tag) {
      return server_->HandleRequest(req, tag);
    };
    auto work = [&, this](std::size_t i) {
      const auto start = std::chrono::steady_clock::now();
      const RoundMessage param_req{MessageType::kParamRequest, wire, {}};
      const auto config_bytes =
          server_->HandleRequest(param_req, static_cast<ConnectionTag>(i + 1));
      requests[i] += EncodeMessage(param_req).size();
      downlink[i] += config_bytes.size();
      const RoundConfig fetched = DecodeConfig(config_bytes);
      HashOracle oracle = [&, i]() -> std::optional<Digest> {
        const RoundMessage req{MessageType::kHashRequest, wire, {}};
        requests[i] += EncodeMessage(req).size();
        const auto bytes = mixnet_->Request(req, serve);
        downlink[i] += bytes.size();
        if (bytes.size() != kDigestBytes) return std::nullopt;
        Digest d;
        std::copy(bytes.begin(), bytes.end(), d.begin());
        return d;
      };
      try {
        run.prepared[i] = clients_[i].RunRound(fetched, oracle);
      } catch (const ProtocolAbort& abort) {
        run.aborts[i] = abort;
      }
      compute_s[i] = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    };
    std::vector<std::future<void>> tasks;
    for (std::size_t i = 0; i < n; ++i) {
      tasks.push_back(std::async(std::launch::async, work, i));
    }
    for (auto& t : tasks) t.get();

    std::size_t uplink = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!run.prepared[i]) continue;
      std::size_t bytes = 0;
      for (const ScheduledMessage& m : run.prepared[i]->messages) {
        bytes += EncodeMessage(m.message).size();
        mixnet_->Submit(m.message, m.send_time);
      }
      uplink = std::max(uplink, bytes);
    }

    const auto server_start = std::chrono::steady_clock::now();
    mixnet_->CloseRound(wire, [this](const RoundMessage& msg, double) {
      server_->ledger().Append(msg);
    });
    run.outcome = server_->CloseRound();
    const double server_s = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - server_start)
                                .count();

    ++cost_rounds_;
    cost_.uplink_bytes = std::max(cost_.uplink_bytes, uplink);
    cost_.request_bytes =
        std::max(cost_.request_bytes,
                 *std::max_element(requests.begin(), requests.end()));
    cost_.downlink_bytes =
        std::max(cost_.downlink_bytes,
                 *std::max_element(downlink.begin(), downlink.end()));
    double mean_client = 0;
    for (double s : compute_s) mean_client += s / n;
    cost_.client_compute_s +=
        (mean_client - cost_.client_compute_s) / cost_rounds_;
    cost_.server_compute_s += (server_s - cost_.server_compute_s) / cost_rounds_;
    return run;
  }

  // Plaintext distributed GD step on the same data.
  void StepPlain() {
    RealVector g(plain_.w.size(), 0.0);
    for (const ClientData& c : dataset_.clients) {
      const RealVector gi = LocalGradient(config_.dataset, c, plain_.w);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += gi[j];
    }
    plain_ = UpdateModel(plain_, g, config_.clients);
  }

  Server& server() { return *server_; }
  Mixnet& mixnet() { return *mixnet_; }
  const ModelState& plain() const { return plain_; }
  const Dataset& dataset() const { return dataset_; }
  const ProtocolSetup& setup() const { return setup_; }
  const CostReport& cost() const { return cost_; }
  const std::optional<double>& dp_sigma() const { return dp_sigma_; }
  const std::optional<NoiseAccounting>& dp_accounting() const {
    return dp_accounting_;
  }

 private:
  ExperimentConfig config_;
  ProtocolSetup setup_;
  Dataset dataset_;
  ChaChaRng root_rng_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<Mixnet> mixnet_;
  std::vector<Client> clients_;
  ModelState plain_;
  CostReport cost_;
  std::size_t cost_rounds_ = 0;
  std::optional<double> dp_sigma_;
  std::optional<NoiseAccounting> dp_accounting_;
};

inline bool ExactSumMatches(const Simulation::RoundRun& run) {
  if (!run.outcome.exact_sum) return false;
  const GroupVector& sum = *run.outcome.exact_sum;
  std::vector<GroupVector> parts;
  for (const auto& p : run.prepared) {
    if (p) parts.push_back(p->local_quantized);
  }
  return Sum(parts, sum.dim(), sum.bits()) == sum;
}

// One round against a server that hands a forged parameter vector to the
// clients in `victims` (0-based) and the honest config to everyone else.
inline EquivocationRecord RunEquivocationRound(const ExperimentConfig& config,
                                               const std::set<int>& victims) {
  Simulation sim(config);
  RealVector forged = sim.server().state().w;
  for (double& w : forged) w += 1.0;
  std::set<ConnectionTag> tags;
  for (int v : victims) tags.insert(static_cast<ConnectionTag>(v + 1));
  sim.server().Equivocate(tags, forged);
  const Simulation::RoundRun run = sim.RunRound();
  EquivocationRecord rec;
  rec.victims = victims.size();
  for (std::size_t i = 0; i < run.aborts.size(); ++i) {
    const bool detected =
        run.aborts[i] &&
        run.aborts[i]->reason() == ProtocolAbort::Reason::kEquivocation;
    if (victims.count(static_cast<int>(i))) {
      rec.victims_detected += detected ? 1 : 0;
    } else if (run.aborts[i]) {
      ++rec.bystanders_aborted;
    }
  }
  rec.round_void = !run.outcome.completed() && !run.outcome.exact_sum &&
                   !run.outcome.global_gradient;
  return rec;
}

// Runs config.rounds SecGD rounds next to a plaintext baseline with identical
// data and initialization. Void rounds are retried up to retry_limit times.
// Throws ProtocolAbort on detected equivocation or exhausted retries, and
// TrainingDiverged if either model or its loss stops being finite.
inline TrainingResult RunTraining(const ExperimentConfig& config,
                                  TrainingResult* partial = nullptr) {
  Simulation sim(config);
  TrainingResult res;
  res.setup = sim.setup();
  res.w_star = sim.dataset().w_star;
  res.dp_sigma = sim.dp_sigma();
  res.dp_accounting = sim.dp_accounting();
  auto publish = [&] {
    res.w_secgd = sim.server().state().w;
    res.w_plain = sim.plain().w;
    res.cost = sim.cost();
    if (partial) *partial = res;
  };

  if (config.equivocate) {
    RealVector forged = sim.server().state().w;
    for (double& w : forged) w += 1.0;
    sim.server().Equivocate({1}, forged);
  }

  for (int t = 0; t < config.rounds; ++t) {
    RoundRecord rec;
    rec.t = static_cast<std::uint32_t>(t);
    for (;;) {
      ++rec.attempts;
      Simulation::RoundRun run = sim.RunRound();
      rec.wire_round = run.outcome.wire_round;

      if (config.equivocate && !res.equivocation) {
        EquivocationRecord eq;
        eq.victims = 1;
        eq.victims_detected =
            run.aborts[0] &&
                    run.aborts[0]->reason() == ProtocolAbort::Reason::kEquivocation
                ? 1
                : 0;
        for (std::size_t i = 1; i < run.aborts.size(); ++i) {
          if (run.aborts[i]) ++eq.bystanders_aborted;
        }
        eq.round_void = !run.outcome.completed();
        res.equivocation = eq;
        sim.server().StopEquivocating();
      }
      for (const auto& a : run.aborts) {
        if (a && a->reason() != ProtocolAbort::Reason::kTimeout) {
          publish();
          throw *a;
        }
      }

      if (run.outcome.completed()) {
        rec.exact = ExactSumMatches(run);
        if (config.attack_recovery && !res.recovery) {
          RecoveryRecord r;
          r.wire_round = rec.wire_round;
          const AdversaryView view = sim.mixnet().Tap(rec.wire_round);
          r.masked_messages = view.masked_multiset.size();
          if (view.seed_multiset.size() <= kMaxMeetInTheMiddleItems) {
            const auto hits = GradientRecoveryAttack(
                view, run.prepared[0]->local_quantized, res.setup.masks);
            r.candidates = static_cast<std::size_t>(
                std::count(hits.begin(), hits.end(), true));
            r.planted_found = r.candidates > 0;
          }
          res.recovery = r;
        }
        break;
      }
      ++res.void_rounds;
      if (rec.attempts > config.retry_limit) {
        publish();
        throw ProtocolAbort(ProtocolAbort::Reason::kRetriesExhausted,
                            "round " + std::to_string(t) + " void after " +
                                std::to_string(rec.attempts) + " attempts");
      }
    }
    sim.StepPlain();
    const ModelKind kind = config.dataset;
    rec.loss_secgd = GlobalLoss(kind, sim.dataset(), sim.server().state().w);
    rec.loss_plain = GlobalLoss(kind, sim.dataset(), sim.plain().w);
    rec.linf_distance = LinfDistance(sim.server().state().w, sim.plain().w);
    res.rounds.push_back(rec);
    if (!std::isfinite(rec.loss_secgd) || !std::isfinite(rec.loss_plain) ||
        !AllFinite(sim.server().state().w) || !AllFinite(sim.plain().w)) {
      publish();
      throw TrainingDiverged("model diverged after round " +
                             std::to_string(t));
    }
  }
  publish();
  return res;
}

}  // namespace secgd

#endif  // SECGD_SIMULATION_H_
