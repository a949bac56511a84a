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

// Noise seeds and their expansion into uniform mask vectors.
//
// Client and server must expand seeds with the same generator. The generator
// is pinned by kMaskGeneratorVersion, which travels in every round config.
//
// Version 1: ChaCha20 (IETF variant, 96-bit nonce) keyed by the big-endian
// seed bytes followed by kSeedKeyPad up to 32 bytes, fixed nonce
// kMaskNonce, block counter starting at 0. The keystream is read as a
// big-endian bit string; entry j takes bits [j*m, (j+1)*m).

#ifndef SECGD_MASK_H_
#define SECGD_MASK_H_

#include <sodium.h>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "secgd/errors.h"
#include "secgd/group_math.h"
#include "secgd/random.h"

namespace secgd {

inline constexpr std::uint8_t kMaskGeneratorVersion = 0x01;
inline constexpr int kMaxSeedBits = 256;
inline constexpr std::uint8_t kSeedKeyPad = 0xa5;
inline constexpr std::array<unsigned char, 12> kMaskNonce = {
    'S', 'e', 'c', 'G', 'D', '-', 'm', 'a', 's', 'k', '-', '1'};

constexpr std::size_t SeedBytes(int q) {
  return static_cast<std::size_t>((q + 7) / 8);
}

// A q-bit opaque seed held as ceil(q/8) big-endian bytes, unused high bits 0.
class Seed {
 public:
  Seed(int q, std::vector<std::uint8_t> bytes)
      : q_(q), bytes_(std::move(bytes)) {
    if (q_ < 1 || q_ > kMaxSeedBits) {
      throw ParameterError("seed length must be in [1, 256] bits");
    }
    if (bytes_.size() != SeedBytes(q_)) {
      throw FormatError("seed needs " + std::to_string(SeedBytes(q_)) +
                        " bytes, got " + std::to_string(bytes_.size()));
    }
    if ((bytes_[0] & ~HighByteMask(q_)) != 0) {
      throw FormatError("seed has bits set above bit " + std::to_string(q_));
    }
  }

  int bits() const { return q_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  friend bool operator==(const Seed&, const Seed&) = default;
  friend auto operator<=>(const Seed&, const Seed&) = default;

  static std::uint8_t HighByteMask(int q) {
    const int used = q % 8;
    return used == 0 ? 0xff : static_cast<std::uint8_t>((1u << used) - 1);
  }

 private:
  int q_;
  std::vector<std::uint8_t> bytes_;
};

inline std::vector<std::uint8_t> EncodeSeed(const Seed& seed) {
  return seed.bytes();
}

inline Seed DecodeSeed(std::span<const std::uint8_t> bytes, int q) {
  return Seed(q, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

// Smallest q with 2K(2K-1)/2 * 2^-q <= p, i.e. ceil(log2(2K(2K-1)/(2p))),
// clamped to [1, 256].
inline int SeedBits(std::uint64_t num_masks, double collision_probability) {
  if (num_masks < 1) throw ParameterError("K must be >= 1");
  if (!(collision_probability > 0 && collision_probability < 1)) {
    throw ParameterError("collision probability must be in (0, 1)");
  }
  const long double k = static_cast<long double>(num_masks);
  const long double target = k * (2 * k - 1) / collision_probability;
  int q = 1;
  while (q < kMaxSeedBits && std::ldexp(1.0L, q) < target) ++q;
  return q;
}

template <typename Rng>
Seed SampleSeed(int q, Rng& rng) {
  if (q < 1 || q > kMaxSeedBits) {
    throw ParameterError("seed length must be in [1, 256] bits");
  }
  std::vector<std::uint8_t> bytes(SeedBytes(q));
  std::uint64_t word = 0;
  int left = 0;
  for (auto& b : bytes) {
    if (left == 0) {
      word = rng();
      left = 8;
    }
    b = static_cast<std::uint8_t>(word >> 56);
    word <<= 8;
    --left;
  }
  bytes[0] &= Seed::HighByteMask(q);
  return Seed(q, std::move(bytes));
}

// K seeds drawn independently and uniformly from {0,1}^q.
template <typename Rng>
std::vector<Seed> SampleSeeds(std::size_t count, int q, Rng& rng) {
  std::vector<Seed> seeds;
  seeds.reserve(count);
  for (std::size_t k = 0; k < count; ++k) seeds.push_back(SampleSeed(q, rng));
  return seeds;
}

// Deterministic expansion of a seed into a vector in Z_{2^m}^d.
inline GroupVector Expand(const Seed& seed, std::size_t dim, int bits) {
  if (dim == 0 || bits < 1 || bits > kMaxGroupBits) {
    throw ParameterError("invalid expansion shape");
  }
  EnsureSodium();
  std::array<unsigned char, crypto_stream_chacha20_ietf_KEYBYTES> key;
  key.fill(kSeedKeyPad);
  std::copy(seed.bytes().begin(), seed.bytes().end(), key.begin());

  const std::size_t total_bits = dim * static_cast<std::size_t>(bits);
  std::vector<unsigned char> stream((total_bits + 7) / 8);
  crypto_stream_chacha20_ietf(stream.data(), stream.size(), kMaskNonce.data(),
                              key.data());
  sodium_memzero(key.data(), key.size());

  std::vector<std::uint64_t> entries(dim);
  std::size_t bit = 0;
  for (std::size_t j = 0; j < dim; ++j) {
    std::uint64_t e = 0;
    for (int b = 0; b < bits; ++b, ++bit) {
      e = (e << 1) | ((stream[bit >> 3] >> (7 - (bit & 7))) & 1u);
    }
    entries[j] = e;
  }
  return GroupVector(bits, std::move(entries));
}

struct MaskSet {
  std::vector<Seed> seeds;
  std::vector<GroupVector> vectors;  // vectors[k] == Expand(seeds[k], d, m)

  std::size_t size() const { return seeds.size(); }
};

template <typename Rng>
MaskSet MakeMaskSet(std::size_t count, int q, std::size_t dim, int bits,
                    Rng& rng) {
  MaskSet set;
  set.seeds = SampleSeeds(count, q, rng);
  set.vectors.reserve(count);
  for (const Seed& s : set.seeds) set.vectors.push_back(Expand(s, dim, bits));
  return set;
}

}  // namespace secgd

#endif  // SECGD_MASK_H_
