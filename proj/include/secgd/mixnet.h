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

// Anonymization-network model. Messages enter with a send time and nothing
// else; they leave in arrival-time order with latency jitter, stripped of any
// origin. The mixnet also records exactly what the server observes per round.
//
// Everything runs on a virtual clock: a round of n seconds is simulated
// instantly. Byte transport is pluggable (in-process, or TCP loopback via
// tcp_transport.h); the schedule is computed the same way for both.

#ifndef SECGD_MIXNET_H_
#define SECGD_MIXNET_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "secgd/errors.h"
#include "secgd/protocol.h"
#include "secgd/random.h"
#include "secgd/server.h"

namespace secgd {

// Moves one relay frame from a submitter to the server side and returns the
// RoundMessage bytes as they arrive there.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::vector<std::uint8_t> Carry(
      std::span<const std::uint8_t> frame) = 0;
};

class InProcessTransport : public Transport {
 public:
  std::vector<std::uint8_t> Carry(
      std::span<const std::uint8_t> frame) override {
    if (frame.size() < kFrameLengthBytes) throw FormatError("short frame");
    return {frame.begin() + kFrameLengthBytes, frame.end()};
  }
};

enum class LatencyModel { kUniform, kExponential };

struct MixnetOptions {
  LatencyModel latency = LatencyModel::kUniform;
  // Upper bound L for uniform jitter on [0, L]; mean for exponential.
  double latency_s = 0.5;
  // Messages arriving later than window + budget miss the round.
  double latency_budget_s = 0.5;
  double drop_probability = 0.0;
};

struct Receipt {
  std::uint64_t sequence;
};

struct ObservedMessage {
  MessageType type;
  std::vector<std::uint8_t> payload;
  double arrival_time;

  friend bool operator==(const ObservedMessage&,
                         const ObservedMessage&) = default;
};

// What the server legitimately holds after a round: payloads and arrival
// times. No origins, no linkage tokens.
struct AdversaryView {
  std::uint32_t round = 0;
  std::vector<std::vector<std::uint8_t>> masked_multiset;  // sorted
  std::vector<std::vector<std::uint8_t>> seed_multiset;    // sorted
  std::vector<ObservedMessage> arrivals;                   // arrival order

  std::vector<double> arrival_times() const {
    std::vector<double> t;
    t.reserve(arrivals.size());
    for (const auto& m : arrivals) t.push_back(m.arrival_time);
    return t;
  }

  friend bool operator==(const AdversaryView&, const AdversaryView&) = default;
};

class Mixnet {
 public:
  using Sink = std::function<void(const RoundMessage&, double arrival_time)>;

  Mixnet(MixnetOptions options, ChaChaRng rng,
         std::shared_ptr<Transport> transport = nullptr)
      : options_(options),
        rng_(std::move(rng)),
        transport_(transport ? std::move(transport)
                             : std::make_shared<InProcessTransport>()) {
    if (!(options_.drop_probability >= 0 && options_.drop_probability <= 1)) {
      throw ParameterError("drop probability must be in [0, 1]");
    }
    if (!(options_.latency_s >= 0) || !(options_.latency_budget_s >= 0)) {
      throw ParameterError("latency must be non-negative");
    }
  }

  void OpenRound(std::uint32_t round, double window_s) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!(window_s > 0)) throw ParameterError("round window must be positive");
    open_[round] = RoundState{window_s, {}};
  }

  // Safe for concurrent callers. The message keeps nothing but its bytes and
  // send time.
  Receipt Submit(const RoundMessage& message, double send_time) {
    const auto frame = EncodeFrame(message);
    std::vector<std::uint8_t> carried = transport_->Carry(frame);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = open_.find(message.round);
    if (it == open_.end()) {
      throw ParameterError("round " + std::to_string(message.round) +
                           " is not open");
    }
    if (!(send_time >= 0 && send_time < it->second.window_s)) {
      throw ParameterError("send time outside the round window");
    }
    it->second.pending.push_back({std::move(carried), send_time});
    return {next_sequence_++};
  }

  // Anonymous request/response through the network (hash and parameter
  // requests). The handler sees only the request bytes.
  std::vector<std::uint8_t> Request(
      const RoundMessage& request,
      const std::function<std::vector<std::uint8_t>(const RoundMessage&,
                                                    ConnectionTag)>& handler) {
    const auto carried = transport_->Carry(EncodeFrame(request));
    return handler(DecodeMessage(carried), kAnonymousConnection);
  }

  // Schedules, drops and delivers every message of `round` in arrival order,
  // then freezes the adversary view for Tap().
  void CloseRound(std::uint32_t round, const Sink& sink) {
    std::vector<Pending> pending;
    double window = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = open_.find(round);
      if (it == open_.end()) {
        throw ParameterError("round " + std::to_string(round) + " is not open");
      }
      pending = std::move(it->second.pending);
      window = it->second.window_s;
      open_.erase(it);
    }
    // Canonical order first so the schedule does not depend on which
    // submitter won a race.
    std::sort(pending.begin(), pending.end(),
              [](const Pending& a, const Pending& b) {
                return std::tie(a.send_time, a.bytes) <
                       std::tie(b.send_time, b.bytes);
              });
    struct Scheduled {
      double arrival;
      std::uint64_t tiebreak;
      std::size_t index;
    };
    std::vector<Scheduled> schedule;
    const double deadline = window + options_.latency_budget_s;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const bool dropped = options_.drop_probability > 0 &&
                           UniformUnit(rng_) < options_.drop_probability;
      const double arrival = pending[i].send_time + Jitter();
      const std::uint64_t tiebreak = rng_();
      if (dropped || arrival > deadline) continue;
      schedule.push_back({arrival, tiebreak, i});
    }
    std::sort(schedule.begin(), schedule.end(),
              [](const Scheduled& a, const Scheduled& b) {
                return std::tie(a.arrival, a.tiebreak) <
                       std::tie(b.arrival, b.tiebreak);
              });

    AdversaryView view;
    view.round = round;
    for (const Scheduled& s : schedule) {
      RoundMessage msg = DecodeMessage(pending[s.index].bytes);
      if (msg.type == MessageType::kMaskedGradient) {
        view.masked_multiset.push_back(msg.payload);
      } else if (msg.type == MessageType::kNoiseSeed) {
        view.seed_multiset.push_back(msg.payload);
      }
      view.arrivals.push_back({msg.type, msg.payload, s.arrival});
      if (sink) sink(msg, s.arrival);
    }
    std::sort(view.masked_multiset.begin(), view.masked_multiset.end());
    std::sort(view.seed_multiset.begin(), view.seed_multiset.end());
    std::lock_guard<std::mutex> lock(mu_);
    views_[round] = std::move(view);
  }

  AdversaryView Tap(std::uint32_t round) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = views_.find(round);
    if (it == views_.end()) {
      throw ParameterError("no closed round " + std::to_string(round));
    }
    return it->second;
  }

  const MixnetOptions& options() const { return options_; }

 private:
  struct Pending {
    std::vector<std::uint8_t> bytes;
    double send_time;
  };
  struct RoundState {
    double window_s;
    std::vector<Pending> pending;
  };

  double Jitter() {
    switch (options_.latency) {
      case LatencyModel::kUniform:
        return UniformUnit(rng_) * options_.latency_s;
      case LatencyModel::kExponential:
        return -std::log1p(-UniformUnit(rng_)) * options_.latency_s;
    }
    return 0;
  }

  MixnetOptions options_;
  ChaChaRng rng_;
  std::shared_ptr<Transport> transport_;
  mutable std::mutex mu_;
  std::map<std::uint32_t, RoundState> open_;
  std::map<std::uint32_t, AdversaryView> views_;
  std::uint64_t next_sequence_ = 0;
};

}  // namespace secgd

#endif  // SECGD_MIXNET_H_
