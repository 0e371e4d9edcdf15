#pragma once

// IDEA block cipher: 64-bit block, 128-bit key, 8 rounds plus an output
// transformation. Operations mix XOR, addition mod 2^16 and multiplication
// in the group of units mod 65537 (the 16-bit encoding 0 stands for 65536).

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "mecard/common.hpp"

namespace mecard::idea {

inline constexpr std::size_t kRounds = 8;
inline constexpr std::size_t kSubKeyCount = 52;
inline constexpr std::size_t kBlockBytes = 8;
inline constexpr std::size_t kKeyBytes = 16;

/// A 64-bit block as four big-endian 16-bit lanes, most significant first.
struct Block64 {
  std::array<std::uint16_t, 4> x{};

  static Block64 from_bytes(std::span<const std::uint8_t, kBlockBytes> in) {
    Block64 b;
    for (std::size_t i = 0; i < 4; ++i) b.x[i] = load_be16(&in[2 * i]);
    return b;
  }

  static Block64 from_u64(std::uint64_t v) {
    std::array<std::uint8_t, kBlockBytes> buf{};
    store_be64(buf.data(), v);
    return from_bytes(buf);
  }

  std::array<std::uint8_t, kBlockBytes> to_bytes() const {
    std::array<std::uint8_t, kBlockBytes> out{};
    for (std::size_t i = 0; i < 4; ++i) store_be16(&out[2 * i], x[i]);
    return out;
  }

  std::uint64_t to_u64() const {
    const auto bytes = to_bytes();
    return load_be64(bytes.data());
  }

  friend bool operator==(const Block64&, const Block64&) = default;
};

/// 128-bit user key. Bit 0 is the most significant bit of byte 0.
struct Key128 {
  std::array<std::uint8_t, kKeyBytes> bytes{};

  /// Throws CryptoError unless given exactly 16 bytes.
  static Key128 from_span(std::span<const std::uint8_t> in) {
    if (in.size() != kKeyBytes) {
      throw CryptoError("key must be 16 bytes, got " + std::to_string(in.size()));
    }
    Key128 k;
    std::copy(in.begin(), in.end(), k.bytes.begin());
    return k;
  }

  /// Exactly 32 hex digits.
  static Key128 from_hex(std::string_view hex) {
    if (hex.size() != 2 * kKeyBytes) {
      throw UsageError("key must be 32 hex digits, got " +
                       std::to_string(hex.size()));
    }
    return from_span(mecard::from_hex(hex));
  }

  std::string hex() const { return to_hex(bytes); }

  friend bool operator==(const Key128&, const Key128&) = default;
};

enum class Direction { encrypt, decrypt };

/// The 52-entry subkey table. The direction is part of the type so a
/// decryption table cannot be handed to encrypt_block or invert_key.
template <Direction D>
struct SubKeys {
  static constexpr Direction direction = D;
  std::array<std::uint16_t, kSubKeyCount> k{};

  friend bool operator==(const SubKeys&, const SubKeys&) = default;
};

using EncryptionKeys = SubKeys<Direction::encrypt>;
using DecryptionKeys = SubKeys<Direction::decrypt>;

/// Multiplication mod 65537 with 0 encoding 65536.
constexpr std::uint16_t mul(std::uint16_t a, std::uint16_t b) {
  if (a == 0) return static_cast<std::uint16_t>(1 - b);  // -b mod 65537
  if (b == 0) return static_cast<std::uint16_t>(1 - a);
  const std::uint32_t p = static_cast<std::uint32_t>(a) * b;
  const std::uint16_t lo = static_cast<std::uint16_t>(p);
  const std::uint16_t hi = static_cast<std::uint16_t>(p >> 16);
  // p = hi*65536 + lo = lo - hi (mod 65537)
  return static_cast<std::uint16_t>(lo - hi + (lo < hi ? 1 : 0));
}

/// Multiplicative inverse mod 65537 by the extended Euclidean algorithm.
/// 0 (i.e. 65536 = -1) and 1 are their own inverses.
constexpr std::uint16_t mul_inv(std::uint16_t x) {
  if (x <= 1) return x;
  std::int64_t r0 = 65537, r1 = x;
  std::int64_t t0 = 0, t1 = 1;
  while (r1 != 0) {
    const std::int64_t q = r0 / r1;
    std::int64_t tmp = r0 - q * r1;
    r0 = r1;
    r1 = tmp;
    tmp = t0 - q * t1;
    t0 = t1;
    t1 = tmp;
  }
  if (t0 < 0) t0 += 65537;
  return static_cast<std::uint16_t>(t0);
}

/// Subkey schedule: slice the key into eight 16-bit words, rotate the whole
/// key left 25 bits, repeat until 52 words exist.
inline EncryptionKeys expand_key(const Key128& key) {
  EncryptionKeys out;
  std::uint64_t hi = load_be64(key.bytes.data());
  std::uint64_t lo = load_be64(key.bytes.data() + 8);
  std::size_t n = 0;
  while (true) {
    for (int w = 0; w < 8 && n < kSubKeyCount; ++w, ++n) {
      const std::uint64_t half = w < 4 ? hi : lo;
      out.k[n] = static_cast<std::uint16_t>(half >> (48 - 16 * (w % 4)));
    }
    if (n == kSubKeyCount) break;
    const std::uint64_t new_hi = (hi << 25) | (lo >> 39);
    const std::uint64_t new_lo = (lo << 25) | (hi >> 39);
    hi = new_hi;
    lo = new_lo;
  }
  return out;
}

/// Builds the decryption table from an encryption table.
inline DecryptionKeys invert_key(const EncryptionKeys& enc) {
  const auto& ek = enc.k;
  DecryptionKeys dec;
  auto& dk = dec.k;
  auto neg = [](std::uint16_t v) { return static_cast<std::uint16_t>(-v); };

  // Output transformation of encryption becomes the first half-round.
  dk[0] = mul_inv(ek[48]);
  dk[1] = neg(ek[49]);
  dk[2] = neg(ek[50]);
  dk[3] = mul_inv(ek[51]);

  for (std::size_t r = 1; r < kRounds; ++r) {
    const std::size_t src = 6 * (kRounds - r);  // first subkey of enc round 8-r
    dk[6 * r - 2] = ek[src + 4];
    dk[6 * r - 1] = ek[src + 5];
    dk[6 * r + 0] = mul_inv(ek[src + 0]);
    dk[6 * r + 1] = neg(ek[src + 2]);  // inner additions swap
    dk[6 * r + 2] = neg(ek[src + 1]);
    dk[6 * r + 3] = mul_inv(ek[src + 3]);
  }

  dk[46] = ek[4];
  dk[47] = ek[5];
  dk[48] = mul_inv(ek[0]);
  dk[49] = neg(ek[1]);
  dk[50] = neg(ek[2]);
  dk[51] = mul_inv(ek[3]);
  return dec;
}

/// One full round on lanes x1..x4 with subkeys z1..z6. The result has the
/// inner lanes already interchanged, ready for the next round.
inline std::array<std::uint16_t, 4> round(
    const std::array<std::uint16_t, 4>& x,
    std::span<const std::uint16_t, 6> z) {
  const std::uint16_t a = mul(x[0], z[0]);
  const std::uint16_t b = static_cast<std::uint16_t>(x[1] + z[1]);
  const std::uint16_t c = static_cast<std::uint16_t>(x[2] + z[2]);
  const std::uint16_t d = mul(x[3], z[3]);

  // Multiply-add structure.
  const std::uint16_t t1 = mul(static_cast<std::uint16_t>(a ^ c), z[4]);
  const std::uint16_t t2 = mul(static_cast<std::uint16_t>((b ^ d) + t1), z[5]);
  const std::uint16_t t3 = static_cast<std::uint16_t>(t1 + t2);

  return {static_cast<std::uint16_t>(a ^ t2), static_cast<std::uint16_t>(c ^ t2),
          static_cast<std::uint16_t>(b ^ t3), static_cast<std::uint16_t>(d ^ t3)};
}

namespace detail {

inline Block64 cipher(const Block64& in,
                      const std::array<std::uint16_t, kSubKeyCount>& k) {
  std::array<std::uint16_t, 4> x = in.x;
  for (std::size_t r = 0; r < kRounds; ++r) {
    x = round(x, std::span<const std::uint16_t, 6>(&k[6 * r], 6));
  }
  // The last round keeps its lanes in place, so undo its interchange here.
  Block64 out;
  out.x[0] = mul(x[0], k[48]);
  out.x[1] = static_cast<std::uint16_t>(x[2] + k[49]);
  out.x[2] = static_cast<std::uint16_t>(x[1] + k[50]);
  out.x[3] = mul(x[3], k[51]);
  return out;
}

}  // namespace detail

inline Block64 encrypt_block(const Block64& b, const EncryptionKeys& k) {
  return detail::cipher(b, k.k);
}

/// Same round function as encryption, driven by the inverted table.
inline Block64 decrypt_block(const Block64& b, const DecryptionKeys& k) {
  return detail::cipher(b, k.k);
}

}  // namespace mecard::idea
