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

// Exact arithmetic on d-dimensional vectors over Z_{2^m}.

#ifndef SECGD_GROUP_MATH_H_
#define SECGD_GROUP_MATH_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "secgd/errors.h"

namespace secgd {

inline constexpr int kMaxGroupBits = 64;

// All-ones mask of the low `bits` bits; reduction mod 2^bits is `x & mask`.
constexpr std::uint64_t ModulusMask(int bits) {
  return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

constexpr std::size_t BytesPerEntry(int bits) {
  return static_cast<std::size_t>((bits + 7) / 8);
}

// A vector in Z_{2^m}^d. Immutable after construction.
class GroupVector {
 public:
  GroupVector(int bits, std::vector<std::uint64_t> entries)
      : bits_(bits), entries_(std::move(entries)) {
    if (bits_ < 1 || bits_ > kMaxGroupBits) {
      throw ParameterError("group bits must be in [1, 64], got " +
                           std::to_string(bits_));
    }
    if (entries_.empty()) throw ParameterError("group vector dimension is 0");
    const std::uint64_t mask = ModulusMask(bits_);
    for (std::uint64_t e : entries_) {
      if ((e & ~mask) != 0) {
        throw ParameterError("entry " + std::to_string(e) +
                             " does not fit in " + std::to_string(bits_) +
                             " bits");
      }
    }
  }

  static GroupVector Zero(std::size_t dim, int bits) {
    if (dim == 0) throw ParameterError("group vector dimension is 0");
    return GroupVector(bits, std::vector<std::uint64_t>(dim, 0));
  }

  int bits() const { return bits_; }
  std::size_t dim() const { return entries_.size(); }
  std::uint64_t modulus_mask() const { return ModulusMask(bits_); }
  const std::vector<std::uint64_t>& entries() const { return entries_; }
  std::uint64_t operator[](std::size_t i) const { return entries_[i]; }

  bool SameShape(const GroupVector& other) const {
    return bits_ == other.bits_ && dim() == other.dim();
  }

  friend bool operator==(const GroupVector&, const GroupVector&) = default;

 private:
  int bits_;
  std::vector<std::uint64_t> entries_;
};

namespace internal {

inline void CheckShape(const GroupVector& a, const GroupVector& b) {
  if (!a.SameShape(b)) {
    throw ParameterError("group vector shape mismatch: (d=" +
                         std::to_string(a.dim()) + ", m=" +
                         std::to_string(a.bits()) + ") vs (d=" +
                         std::to_string(b.dim()) + ", m=" +
                         std::to_string(b.bits()) + ")");
  }
}

}  // namespace internal

inline GroupVector Add(const GroupVector& a, const GroupVector& b) {
  internal::CheckShape(a, b);
  const std::uint64_t mask = a.modulus_mask();
  std::vector<std::uint64_t> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] + b[i]) & mask;
  return GroupVector(a.bits(), std::move(out));
}

inline GroupVector Sub(const GroupVector& a, const GroupVector& b) {
  internal::CheckShape(a, b);
  const std::uint64_t mask = a.modulus_mask();
  std::vector<std::uint64_t> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] - b[i]) & mask;
  return GroupVector(a.bits(), std::move(out));
}

inline GroupVector operator+(const GroupVector& a, const GroupVector& b) {
  return Add(a, b);
}
inline GroupVector operator-(const GroupVector& a, const GroupVector& b) {
  return Sub(a, b);
}

// Sum of a multiset; every element must have shape (dim, bits). An empty
// multiset sums to zero.
inline GroupVector Sum(std::span<const GroupVector> vectors, std::size_t dim,
                       int bits) {
  GroupVector acc = GroupVector::Zero(dim, bits);
  std::vector<std::uint64_t> out(dim, 0);
  for (const GroupVector& v : vectors) {
    internal::CheckShape(acc, v);
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  const std::uint64_t mask = ModulusMask(bits);
  for (auto& e : out) e &= mask;
  return GroupVector(bits, std::move(out));
}

// Each entry as BytesPerEntry(m) big-endian bytes; no packing across entries.
inline std::vector<std::uint8_t> Serialize(const GroupVector& v) {
  const std::size_t width = BytesPerEntry(v.bits());
  std::vector<std::uint8_t> out(v.dim() * width);
  for (std::size_t i = 0; i < v.dim(); ++i) {
    std::uint64_t e = v[i];
    for (std::size_t b = width; b-- > 0;) {
      out[i * width + b] = static_cast<std::uint8_t>(e & 0xff);
      e >>= 8;
    }
  }
  return out;
}

inline GroupVector Deserialize(std::span<const std::uint8_t> bytes,
                               std::size_t dim, int bits) {
  if (bits < 1 || bits > kMaxGroupBits || dim == 0) {
    throw ParameterError("invalid group vector shape for decode");
  }
  const std::size_t width = BytesPerEntry(bits);
  if (bytes.size() != dim * width) {
    throw FormatError("group vector payload has " +
                      std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(dim * width));
  }
  const std::uint64_t mask = ModulusMask(bits);
  std::vector<std::uint64_t> entries(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    std::uint64_t e = 0;
    for (std::size_t b = 0; b < width; ++b) e = (e << 8) | bytes[i * width + b];
    if ((e & ~mask) != 0) {
      throw FormatError("decoded entry exceeds 2^" + std::to_string(bits));
    }
    entries[i] = e;
  }
  return GroupVector(bits, std::move(entries));
}

}  // namespace secgd

#endif  // SECGD_GROUP_MATH_H_
