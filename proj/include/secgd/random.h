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

#ifndef SECGD_RANDOM_H_
#define SECGD_RANDOM_H_

#include <sodium.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace secgd {

inline void EnsureSodium() {
  static const bool initialized = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
    return true;
  }();
  (void)initialized;
}

// Seedable ChaCha20 keystream exposed as a UniformRandomBitGenerator.
//
// Every stochastic component (clients, mixnet jitter, experiments) draws from
// its own instance so that runs are reproducible and independent streams never
// overlap. Instances with the same (seed, stream) produce identical output.
class ChaChaRng {
 public:
  using result_type = std::uint64_t;

  explicit ChaChaRng(std::uint64_t seed, std::uint64_t stream = 0) {
    EnsureSodium();
    key_.fill(0x3c);
    for (int i = 0; i < 8; ++i) {
      key_[i] = static_cast<unsigned char>(seed >> (56 - 8 * i));
      key_[8 + i] = static_cast<unsigned char>(stream >> (56 - 8 * i));
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (pos_ == buffer_.size()) Refill();
    result_type out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | buffer_[pos_ + i];
    pos_ += 8;
    return out;
  }

  // Child generator whose stream is a pure function of this one's next output.
  ChaChaRng Fork(std::uint64_t stream) { return ChaChaRng((*this)(), stream); }

 private:
  static constexpr std::size_t kBlocksPerRefill = 8;

  void Refill() {
    std::array<unsigned char, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
    for (int i = 0; i < 8; ++i) {
      nonce[4 + i] = static_cast<unsigned char>(epoch_ >> (56 - 8 * i));
    }
    buffer_.fill(0);
    crypto_stream_chacha20_ietf_xor_ic(buffer_.data(), buffer_.data(),
                                       buffer_.size(), nonce.data(), counter_,
                                       key_.data());
    counter_ += kBlocksPerRefill;
    if (counter_ == 0) ++epoch_;
    pos_ = 0;
  }

  std::array<unsigned char, crypto_stream_chacha20_ietf_KEYBYTES> key_{};
  std::array<unsigned char, 64 * kBlocksPerRefill> buffer_{};
  std::size_t pos_ = 64 * kBlocksPerRefill;
  std::uint32_t counter_ = 0;
  std::uint64_t epoch_ = 0;
};

// Uniform double in [0, 1) from the top 53 bits of one draw. Used instead of
// std::uniform_real_distribution so results do not depend on the standard
// library implementation.
template <typename Rng>
double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound) by rejection; bound must be positive.
template <typename Rng>
std::uint64_t UniformBelow(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// Fisher-Yates over any random-access range.
template <typename Range, typename Rng>
void Shuffle(Range& range, Rng& rng) {
  using std::swap;
  for (std::size_t i = range.size(); i > 1; --i) {
    swap(range[i - 1], range[UniformBelow(rng, i)]);
  }
}

}  // namespace secgd

#endif  // SECGD_RANDOM_H_
