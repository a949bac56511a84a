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

// Client side of one training round: verify the published config, compute and
// quantize the local gradient, mask it with K seed-expanded vectors and emit
// K+1 unlinkable messages at independent uniform send times.

#ifndef SECGD_CLIENT_H_
#define SECGD_CLIENT_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "secgd/dp.h"
#include "secgd/errors.h"
#include "secgd/group_math.h"
#include "secgd/mask.h"
#include "secgd/protocol.h"
#include "secgd/quantizer.h"
#include "secgd/random.h"

namespace secgd {

inline constexpr int kDefaultHashChecks = 3;
inline constexpr int kDefaultMinMTilde = 48;

struct ClientPolicy {
  int hash_checks = kDefaultHashChecks;  // r
  // Refuse rounds whose m_tilde is below this. Guards against a server that
  // shrinks the instance (e.g. by lying about N) until subset sum is easy.
  int min_m_tilde = kDefaultMinMTilde;
};

// K = ceil(d*m/2), the hardest subset-sum ratio.
inline std::uint32_t RecommendedNumMasks(std::size_t dim, int bits) {
  return static_cast<std::uint32_t>((dim * static_cast<std::size_t>(bits) + 1) /
                                    2);
}

enum class Verdict {
  kAccept,
  kAcceptUnverified,  // r == 0: nothing was checked
  kEquivocation,
  kTimeout,
};

struct Verification {
  Verdict verdict;
  int checks_issued;

  bool accepted() const {
    return verdict == Verdict::kAccept || verdict == Verdict::kAcceptUnverified;
  }
};

// Answers one HashRequest over a fresh anonymous channel; nullopt on timeout.
using HashOracle = std::function<std::optional<Digest>()>;

// Issues `checks` independent hash requests and accepts iff every answer
// matches the digest of the locally held config.
inline Verification VerifyRoundConfig(const RoundConfig& config,
                                      const HashOracle& oracle, int checks) {
  if (checks < 0) throw ParameterError("hash check count must be >= 0");
  if (checks == 0) return {Verdict::kAcceptUnverified, 0};
  const Digest local = ConfigDigest(config);
  for (int i = 0; i < checks; ++i) {
    const std::optional<Digest> remote = oracle();
    if (!remote) return {Verdict::kTimeout, i + 1};
    if (*remote != local) return {Verdict::kEquivocation, i + 1};
  }
  return {Verdict::kAccept, checks};
}

inline void CheckPolicy(const RoundConfig& config, const ClientPolicy& policy) {
  config.Validate();
  if (config.generator_version != kMaskGeneratorVersion) {
    throw ProtocolAbort(ProtocolAbort::Reason::kPolicy,
                        "mask generator version " +
                            std::to_string(config.generator_version) +
                            " is not supported");
  }
  if (config.quant.m_tilde < policy.min_m_tilde) {
    throw ProtocolAbort(ProtocolAbort::Reason::kPolicy,
                        "m_tilde " + std::to_string(config.quant.m_tilde) +
                            " below client minimum " +
                            std::to_string(policy.min_m_tilde));
  }
}

struct ScheduledMessage {
  RoundMessage message;
  double send_time;  // seconds into the round, in [0, n)
};

struct PreparedRound {
  std::vector<ScheduledMessage> messages;  // K+1, in random order
  // Client-private plaintext, kept for tests and the simulator's baseline.
  // Never transmitted.
  GroupVector local_quantized;
};

// Masks an already quantized gradient and schedules the K+1 messages.
template <typename Rng>
PreparedRound MaskAndSchedule(const RoundConfig& config,
                              const GroupVector& quantized, Rng& rng) {
  const std::size_t dim = config.dim();
  const int bits = config.group_bits();
  if (quantized.dim() != dim || quantized.bits() != bits) {
    throw ParameterError("quantized gradient does not match the round shape");
  }
  std::vector<Seed> seeds = SampleSeeds(config.num_masks, config.seed_bits, rng);
  std::vector<std::uint64_t> total(dim, 0);
  for (const Seed& s : seeds) {
    const GroupVector v = Expand(s, dim, bits);
    for (std::size_t j = 0; j < dim; ++j) total[j] += v[j];
  }
  const std::uint64_t mask = ModulusMask(bits);
  for (auto& e : total) e &= mask;
  const GroupVector masked = Sub(quantized, GroupVector(bits, std::move(total)));

  PreparedRound out{{}, quantized};
  out.messages.reserve(seeds.size() + 1);
  out.messages.push_back({MaskedGradientMessage(config.round, masked), 0.0});
  for (const Seed& s : seeds) {
    out.messages.push_back({NoiseSeedMessage(config.round, s), 0.0});
  }
  Shuffle(out.messages, rng);
  for (auto& m : out.messages) {
    m.send_time = UniformUnit(rng) * config.round_length_s;
  }
  return out;
}

// Clip, quantize, mask and schedule a real-valued gradient. When `dp` is set
// the gradient is L2-clipped and noised first.
template <typename Rng>
PreparedRound PrepareRound(const RoundConfig& config, const RealVector& gradient,
                           Rng& rng, const DpClientStage* dp = nullptr) {
  if (gradient.size() != config.dim()) {
    throw ParameterError("gradient dimension does not match the model");
  }
  if (!AllFinite(gradient)) throw DataError("gradient has non-finite entries");
  const RealVector noised = dp ? dp->Apply(gradient, rng) : gradient;
  const GroupVector quantized = Preprocess(noised, config.quant, rng);
  return MaskAndSchedule(config, quantized, rng);
}

// Gradient of the client's local loss at w. Injected by the caller; the
// protocol does not care what it computes.
using GradientFn = std::function<RealVector(const RealVector& w)>;

class Client {
 public:
  Client(GradientFn gradient, ClientPolicy policy, ChaChaRng rng,
         std::optional<DpClientStage> dp = std::nullopt)
      : gradient_(std::move(gradient)),
        policy_(policy),
        rng_(std::move(rng)),
        dp_(std::move(dp)) {}

  // Verifies `fetched` and prepares this client's messages. Throws
  // ProtocolAbort when the round must not be joined.
  PreparedRound RunRound(const RoundConfig& fetched, const HashOracle& oracle) {
    CheckPolicy(fetched, policy_);
    last_verification_ =
        VerifyRoundConfig(fetched, oracle, policy_.hash_checks);
    switch (last_verification_->verdict) {
      case Verdict::kEquivocation:
        throw ProtocolAbort(ProtocolAbort::Reason::kEquivocation,
                            "server equivocation detected");
      case Verdict::kTimeout:
        throw ProtocolAbort(ProtocolAbort::Reason::kTimeout,
                            "hash request timed out");
      default:
        break;
    }
    const RealVector g = gradient_(fetched.params);
    return PrepareRound(fetched, g, rng_, dp_ ? &*dp_ : nullptr);
  }

  const std::optional<Verification>& last_verification() const {
    return last_verification_;
  }
  const ClientPolicy& policy() const { return policy_; }

 private:
  GradientFn gradient_;
  ClientPolicy policy_;
  ChaChaRng rng_;
  std::optional<DpClientStage> dp_;
  std::optional<Verification> last_verification_;
};

}  // namespace secgd

#endif  // SECGD_CLIENT_H_
