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

// Server side: publish the round config, answer parameter and hash requests,
// collect the N(K+1) messages, recover the exact sum and update the model.

#ifndef SECGD_SERVER_H_
#define SECGD_SERVER_H_

#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "secgd/errors.h"
#include "secgd/group_math.h"
#include "secgd/mask.h"
#include "secgd/protocol.h"
#include "secgd/quantizer.h"

namespace secgd {

// eta^t = eta0 / (1 + decay * t); decay 0 gives a constant rate.
struct LearningRateSchedule {
  double eta0 = 0.1;
  double decay = 0.0;

  double At(std::uint32_t t) const { return eta0 / (1.0 + decay * t); }
  double Max() const { return eta0; }
};

struct ModelState {
  RealVector w;
  std::uint32_t t = 0;
  LearningRateSchedule eta;
  double lambda = 0.0;
  Regularizer regularizer = Regularizer::kNone;
};

// w <- w - eta^t (g / N + lambda * grad R(w)), R(w) = |w|^2 / 2 for L2.
inline ModelState UpdateModel(const ModelState& state, const RealVector& g,
                              int num_clients) {
  if (g.size() != state.w.size()) {
    throw ParameterError("gradient dimension does not match the model");
  }
  if (num_clients < 1) throw ParameterError("N must be >= 1");
  if (!AllFinite(g)) throw DataError("global gradient is not finite");
  const double eta = state.eta.At(state.t);
  ModelState next = state;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double step = g[i] / num_clients;
    if (state.regularizer == Regularizer::kL2) step += state.lambda * state.w[i];
    next.w[i] = state.w[i] - eta * step;
  }
  if (!AllFinite(next.w)) throw TrainingDiverged("model parameters diverged");
  ++next.t;
  return next;
}

// Message counts of a round that cannot be completed. Carries no vector data.
struct RoundVoid {
  std::size_t masked_received;
  std::size_t masked_expected;
  std::size_t seeds_received;
  std::size_t seeds_expected;
};

// The two multisets the server accumulates during a round. Counted by type
// only; the server has no notion of senders.
class RoundLedger {
 public:
  enum class Admission { kAccepted, kWrongRound, kMalformed, kNotData };

  RoundLedger(std::uint32_t round, std::size_t dim, int bits, int seed_bits,
              std::size_t expected_masked, std::size_t expected_seeds)
      : round_(round),
        dim_(dim),
        bits_(bits),
        seed_bits_(seed_bits),
        expected_masked_(expected_masked),
        expected_seeds_(expected_seeds) {}

  static RoundLedger ForConfig(const RoundConfig& c) {
    return RoundLedger(c.round, c.dim(), c.group_bits(), c.seed_bits,
                       static_cast<std::size_t>(c.num_clients()),
                       static_cast<std::size_t>(c.num_clients()) * c.num_masks);
  }

  RoundLedger(const RoundLedger& other) { CopyFrom(other); }
  RoundLedger& operator=(const RoundLedger& other) {
    if (this != &other) CopyFrom(other);
    return *this;
  }

  // Safe to call concurrently.
  Admission Append(const RoundMessage& msg) {
    if (msg.round != round_) return Admission::kWrongRound;
    std::lock_guard<std::mutex> lock(mu_);
    if (closed_) return Admission::kWrongRound;
    try {
      switch (msg.type) {
        case MessageType::kMaskedGradient:
          masked_.push_back(Deserialize(msg.payload, dim_, bits_));
          return Admission::kAccepted;
        case MessageType::kNoiseSeed:
          seeds_.push_back(DecodeSeed(msg.payload, seed_bits_));
          return Admission::kAccepted;
        default:
          return Admission::kNotData;
      }
    } catch (const FormatError&) {
      ++malformed_;
      return Admission::kMalformed;
    }
  }

  // Called once the deadline has passed; no further messages are admitted.
  void Close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
  }

  bool closed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return closed_;
  }
  bool complete() const {
    std::lock_guard<std::mutex> lock(mu_);
    return masked_.size() == expected_masked_ &&
           seeds_.size() == expected_seeds_;
  }
  RoundVoid counts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return {masked_.size(), expected_masked_, seeds_.size(), expected_seeds_};
  }

  std::uint32_t round() const { return round_; }
  std::size_t dim() const { return dim_; }
  int bits() const { return bits_; }
  int seed_bits() const { return seed_bits_; }
  std::size_t malformed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return malformed_;
  }
  // Only meaningful after Close().
  const std::vector<GroupVector>& masked() const { return masked_; }
  const std::vector<Seed>& seeds() const { return seeds_; }

 private:
  void CopyFrom(const RoundLedger& other) {
    std::scoped_lock lock(mu_, other.mu_);
    round_ = other.round_;
    dim_ = other.dim_;
    bits_ = other.bits_;
    seed_bits_ = other.seed_bits_;
    expected_masked_ = other.expected_masked_;
    expected_seeds_ = other.expected_seeds_;
    masked_ = other.masked_;
    seeds_ = other.seeds_;
    malformed_ = other.malformed_;
    closed_ = other.closed_;
  }

  std::uint32_t round_;
  std::size_t dim_;
  int bits_;
  int seed_bits_;
  std::size_t expected_masked_;
  std::size_t expected_seeds_;
  mutable std::mutex mu_;
  std::vector<GroupVector> masked_;
  std::vector<Seed> seeds_;
  std::size_t malformed_ = 0;
  bool closed_ = false;
};

// Sum of every masked gradient and every expanded seed in Z_{2^m}^d, or the
// counts if the round is incomplete. The partial sum is never formed for an
// incomplete round.
inline std::variant<GroupVector, RoundVoid> AggregateExact(
    const RoundLedger& ledger) {
  if (!ledger.closed()) {
    throw PreconditionError("aggregate called before the round deadline");
  }
  if (!ledger.complete()) return ledger.counts();
  const std::size_t dim = ledger.dim();
  const int bits = ledger.bits();
  std::vector<std::uint64_t> acc(dim, 0);
  for (const GroupVector& v : ledger.masked()) {
    for (std::size_t j = 0; j < dim; ++j) acc[j] += v[j];
  }
  for (const Seed& s : ledger.seeds()) {
    const GroupVector v = Expand(s, dim, bits);
    for (std::size_t j = 0; j < dim; ++j) acc[j] += v[j];
  }
  const std::uint64_t mask = ModulusMask(bits);
  for (auto& e : acc) e &= mask;
  return GroupVector(bits, std::move(acc));
}

inline std::variant<RealVector, RoundVoid> Aggregate(
    const RoundLedger& ledger, const QuantizationParams& quant) {
  auto exact = AggregateExact(ledger);
  if (auto* v = std::get_if<RoundVoid>(&exact)) return *v;
  return DequantizeSum(std::get<GroupVector>(exact), quant);
}

// Static protocol parameters the server stamps into every round config.
struct ServerSettings {
  std::uint32_t num_masks = 1;
  int seed_bits = 64;
  QuantizationParams quant;
  double round_length_s = 10.0;
};

struct PublishedRound {
  RoundConfig config;
  Digest digest;
};

// Opaque per-connection token supplied by the transport. 0 means an
// anonymous channel through the mixnet.
using ConnectionTag = std::uint64_t;
inline constexpr ConnectionTag kAnonymousConnection = 0;

struct RoundOutcome {
  std::uint32_t wire_round;
  std::optional<RealVector> global_gradient;  // set iff the round completed
  std::optional<GroupVector> exact_sum;
  std::optional<RoundVoid> void_counts;

  bool completed() const { return global_gradient.has_value(); }
};

class Server {
 public:
  Server(ModelState initial, ServerSettings settings)
      : state_(std::move(initial)), settings_(std::move(settings)) {
    settings_.quant.Validate();
  }

  // Starts a new wire round (a fresh attempt for the current model step).
  PublishedRound PublishRound() {
    if (ledger_ && !ledger_->closed()) {
      throw PreconditionError("previous round still open");
    }
    RoundConfig c;
    c.round = next_wire_round_++;
    c.params = state_.w;
    c.round_length_s = settings_.round_length_s;
    c.num_masks = settings_.num_masks;
    c.seed_bits = settings_.seed_bits;
    c.quant = settings_.quant;
    c.eta = state_.eta.At(state_.t);
    c.lambda = state_.lambda;
    c.regularizer = state_.regularizer;
    c.Validate();
    config_ = c;
    digest_ = ConfigDigest(c);
    victim_config_.reset();
    if (!victims_.empty()) {
      RoundConfig alt = c;
      alt.params = victim_params_;
      victim_config_ = alt;
    }
    ledger_.emplace(RoundLedger::ForConfig(c));
    return {c, digest_};
  }

  // Simulator switch: parameter requests from `victims` receive a config
  // with `params` replaced; everything else, including every hash request,
  // sees the honest config.
  void Equivocate(std::set<ConnectionTag> victims, RealVector params) {
    victims_ = std::move(victims);
    victim_params_ = std::move(params);
  }
  void StopEquivocating() { victims_.clear(); }

  RoundConfig ServeParams(ConnectionTag tag) const {
    RequireOpen();
    if (victim_config_ && victims_.count(tag)) return *victim_config_;
    return *config_;
  }

  Digest ServeHash(ConnectionTag /*tag*/) const {
    RequireOpen();
    return digest_;
  }

  // ParamRequest -> canonical config bytes; HashRequest -> 32-byte digest.
  std::vector<std::uint8_t> HandleRequest(const RoundMessage& request,
                                          ConnectionTag tag) const {
    RequireOpen();
    if (request.round != config_->round) {
      throw ParameterError("request for round " + std::to_string(request.round) +
                           ", current is " + std::to_string(config_->round));
    }
    switch (request.type) {
      case MessageType::kParamRequest:
        return EncodeConfig(ServeParams(tag));
      case MessageType::kHashRequest: {
        const Digest d = ServeHash(tag);
        return {d.begin(), d.end()};
      }
      default:
        throw ParameterError("not a request message");
    }
  }

  RoundLedger& ledger() {
    RequireOpen();
    return *ledger_;
  }

  // Closes the current round after its deadline. On full participation the
  // model is updated; otherwise the round is void and only counts escape.
  RoundOutcome CloseRound() {
    RequireOpen();
    ledger_->Close();
    RoundOutcome out{config_->round, std::nullopt, std::nullopt, std::nullopt};
    auto exact = AggregateExact(*ledger_);
    if (auto* v = std::get_if<RoundVoid>(&exact)) {
      out.void_counts = *v;
      return out;
    }
    out.exact_sum = std::get<GroupVector>(exact);
    out.global_gradient = DequantizeSum(*out.exact_sum, settings_.quant);
    state_ = UpdateModel(state_, *out.global_gradient,
                         settings_.quant.num_clients);
    return out;
  }

  const ModelState& state() const { return state_; }
  const ServerSettings& settings() const { return settings_; }
  const std::optional<RoundConfig>& current_config() const { return config_; }

 private:
  void RequireOpen() const {
    if (!config_ || !ledger_) throw PreconditionError("no round published");
  }

  ModelState state_;
  ServerSettings settings_;
  std::uint32_t next_wire_round_ = 0;
  std::optional<RoundConfig> config_;
  std::optional<RoundConfig> victim_config_;
  Digest digest_{};
  std::optional<RoundLedger> ledger_;
  std::set<ConnectionTag> victims_;
  RealVector victim_params_;
};

}  // namespace secgd

#endif  // SECGD_SERVER_H_
