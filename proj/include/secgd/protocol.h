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

// Wire formats: the RoundMessage envelope, relay framing, and the canonical
// round-config encoding whose SHA-256 digest clients compare against.
//
// RoundMessage (all integers big-endian):
//   version  u8   0x01
//   type     u8   0x01 MaskedGradient | 0x02 NoiseSeed | 0x03 ParamRequest
//                 | 0x04 HashRequest
//   round    u32
//   payload  MaskedGradient: serialized GroupVector; NoiseSeed: one seed;
//            requests: empty
// There is no sender field.
//
// Relay frame: u32 length of the encoded RoundMessage, then the message.

#ifndef SECGD_PROTOCOL_H_
#define SECGD_PROTOCOL_H_

#include <sodium.h>

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "secgd/errors.h"
#include "secgd/group_math.h"
#include "secgd/mask.h"
#include "secgd/quantizer.h"
#include "secgd/random.h"

namespace secgd {

inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kMessageHeaderBytes = 6;
inline constexpr std::size_t kFrameLengthBytes = 4;
inline constexpr std::size_t kDigestBytes = crypto_hash_sha256_BYTES;

enum class MessageType : std::uint8_t {
  kMaskedGradient = 0x01,
  kNoiseSeed = 0x02,
  kParamRequest = 0x03,
  kHashRequest = 0x04,
};

struct RoundMessage {
  MessageType type = MessageType::kMaskedGradient;
  std::uint32_t round = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const RoundMessage&, const RoundMessage&) = default;
};

namespace internal {

class ByteWriter {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U16(std::uint16_t v) { Be(v, 2); }
  void U32(std::uint32_t v) { Be(v, 4); }
  void U64(std::uint64_t v) { Be(v, 8); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Bytes(std::span<const std::uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  void Be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(Be(1)); }
  std::uint16_t U16() { return static_cast<std::uint16_t>(Be(2)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Be(4)); }
  std::uint64_t U64() { return Be(8); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::span<const std::uint8_t> Rest() {
    auto rest = in_.subspan(pos_);
    pos_ = in_.size();
    return rest;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::uint64_t Be(std::size_t n) {
    if (in_.size() - pos_ < n) throw FormatError("truncated input");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace internal

inline std::vector<std::uint8_t> EncodeMessage(const RoundMessage& msg) {
  internal::ByteWriter w;
  w.U8(kWireVersion);
  w.U8(static_cast<std::uint8_t>(msg.type));
  w.U32(msg.round);
  w.Bytes(msg.payload);
  return w.Take();
}

inline RoundMessage DecodeMessage(std::span<const std::uint8_t> bytes) {
  internal::ByteReader r(bytes);
  if (bytes.size() < kMessageHeaderBytes) {
    throw FormatError("message shorter than its header");
  }
  const std::uint8_t version = r.U8();
  if (version != kWireVersion) {
    throw FormatError("unsupported wire version " + std::to_string(version));
  }
  const std::uint8_t type = r.U8();
  if (type < 0x01 || type > 0x04) {
    throw FormatError("unknown message type " + std::to_string(type));
  }
  RoundMessage msg;
  msg.type = static_cast<MessageType>(type);
  msg.round = r.U32();
  auto rest = r.Rest();
  msg.payload.assign(rest.begin(), rest.end());
  if ((msg.type == MessageType::kParamRequest ||
       msg.type == MessageType::kHashRequest) &&
      !msg.payload.empty()) {
    throw FormatError("request messages carry no payload");
  }
  return msg;
}

inline std::vector<std::uint8_t> EncodeFrame(const RoundMessage& msg) {
  const auto body = EncodeMessage(msg);
  internal::ByteWriter w;
  w.U32(static_cast<std::uint32_t>(body.size()));
  w.Bytes(body);
  return w.Take();
}

inline RoundMessage MaskedGradientMessage(std::uint32_t round,
                                          const GroupVector& masked) {
  return {MessageType::kMaskedGradient, round, Serialize(masked)};
}

inline RoundMessage NoiseSeedMessage(std::uint32_t round, const Seed& seed) {
  return {MessageType::kNoiseSeed, round, EncodeSeed(seed)};
}

enum class Regularizer : std::uint8_t { kNone = 0, kL2 = 1 };

// Everything a client needs for one round. Honest clients hold identical
// copies; the digest of the canonical encoding is what they compare.
struct RoundConfig {
  std::uint32_t round = 0;
  RealVector params;  // w^t
  double round_length_s = 10.0;
  std::uint32_t num_masks = 1;  // K
  int seed_bits = 64;           // q
  QuantizationParams quant;
  double eta = 0.1;
  double lambda = 0.0;
  Regularizer regularizer = Regularizer::kNone;
  std::uint8_t generator_version = kMaskGeneratorVersion;

  std::size_t dim() const { return params.size(); }
  int group_bits() const { return quant.total_bits(); }
  int num_clients() const { return quant.num_clients; }

  void Validate() const {
    quant.Validate();
    if (params.empty()) throw ParameterError("config has no parameters");
    if (num_masks < 1) throw ParameterError("K must be >= 1");
    if (seed_bits < 1 || seed_bits > kMaxSeedBits) {
      throw ParameterError("q must be in [1, 256]");
    }
    if (!(round_length_s > 0)) {
      throw ParameterError("round length must be positive");
    }
  }

  friend bool operator==(const RoundConfig&, const RoundConfig&) = default;
};

// Canonical byte encoding of every RoundConfig field, in declaration order:
//   u8 format(0x01) u8 generator_version u32 round u32 d f64[d] w
//   f64 round_length_s u32 N u32 K u16 q u8 m_tilde u8 f f64 eta f64 lambda
//   u8 regularizer
inline std::vector<std::uint8_t> EncodeConfig(const RoundConfig& c) {
  internal::ByteWriter w;
  w.U8(0x01);
  w.U8(c.generator_version);
  w.U32(c.round);
  w.U32(static_cast<std::uint32_t>(c.params.size()));
  for (double x : c.params) w.F64(x);
  w.F64(c.round_length_s);
  w.U32(static_cast<std::uint32_t>(c.quant.num_clients));
  w.U32(c.num_masks);
  w.U16(static_cast<std::uint16_t>(c.seed_bits));
  w.U8(static_cast<std::uint8_t>(c.quant.m_tilde));
  w.U8(static_cast<std::uint8_t>(c.quant.fraction_bits));
  w.F64(c.eta);
  w.F64(c.lambda);
  w.U8(static_cast<std::uint8_t>(c.regularizer));
  return w.Take();
}

inline RoundConfig DecodeConfig(std::span<const std::uint8_t> bytes) {
  internal::ByteReader r(bytes);
  if (r.U8() != 0x01) throw FormatError("unknown config format");
  RoundConfig c;
  c.generator_version = r.U8();
  c.round = r.U32();
  const std::uint32_t d = r.U32();
  if (d > (bytes.size() / 8)) throw FormatError("config dimension too large");
  c.params.resize(d);
  for (auto& x : c.params) x = r.F64();
  c.round_length_s = r.F64();
  c.quant.num_clients = static_cast<int>(r.U32());
  c.num_masks = r.U32();
  c.seed_bits = r.U16();
  c.quant.m_tilde = r.U8();
  c.quant.fraction_bits = r.U8();
  c.eta = r.F64();
  c.lambda = r.F64();
  const std::uint8_t reg = r.U8();
  if (reg > 1) throw FormatError("unknown regularizer");
  c.regularizer = static_cast<Regularizer>(reg);
  if (!r.done()) throw FormatError("trailing bytes after config");
  return c;
}

using Digest = std::array<std::uint8_t, kDigestBytes>;

inline Digest Sha256(std::span<const std::uint8_t> bytes) {
  EnsureSodium();
  Digest out;
  crypto_hash_sha256(out.data(), bytes.data(), bytes.size());
  return out;
}

inline Digest ConfigDigest(const RoundConfig& c) {
  return Sha256(EncodeConfig(c));
}

}  // namespace secgd

#endif  // SECGD_PROTOCOL_H_
