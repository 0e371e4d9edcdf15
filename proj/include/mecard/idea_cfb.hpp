#pragma once

// Byte-granular CFB-64 over IDEA and an IDEA-driven deterministic byte
// generator. Contexts are single-owner mutable state.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>

#include "mecard/common.hpp"
#include "mecard/idea.hpp"

namespace mecard::idea {

using Iv = std::array<std::uint8_t, kBlockBytes>;

namespace detail {

template <typename T>
void secure_zero(T& value) {
  volatile auto* p = reinterpret_cast<volatile std::uint8_t*>(&value);
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = 0;
}

}  // namespace detail

class CfbContext {
 public:
  CfbContext(const Key128& key, const Iv& iv) : subkeys_(expand_key(key)) {
    reinit(iv);
  }

  CfbContext(const CfbContext&) = default;
  CfbContext& operator=(const CfbContext&) = default;
  ~CfbContext() { destroy(); }

  /// Restarts the stream with a new IV, keeping the key.
  void reinit(const Iv& iv) {
    shift_register_ = iv;
    used_ = kBlockBytes;
  }

  void encrypt(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
    transform(in, out, /*decrypting=*/false);
  }

  void decrypt(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
    transform(in, out, /*decrypting=*/true);
  }

  Bytes encrypt(std::span<const std::uint8_t> in) {
    Bytes out(in.size());
    encrypt(in, out);
    return out;
  }

  Bytes decrypt(std::span<const std::uint8_t> in) {
    Bytes out(in.size());
    decrypt(in, out);
    return out;
  }

  /// Wipes key material and buffers. Assign a fresh context before reuse.
  void destroy() noexcept {
    detail::secure_zero(subkeys_);
    detail::secure_zero(shift_register_);
    detail::secure_zero(keystream_);
    used_ = kBlockBytes;
  }

  const Iv& shift_register() const { return shift_register_; }
  std::size_t used() const { return used_; }
  const EncryptionKeys& subkeys() const { return subkeys_; }

  /// Number of block encryptions performed so far.
  std::size_t blocks_generated() const { return blocks_; }

 private:
  void transform(std::span<const std::uint8_t> in, std::span<std::uint8_t> out,
                 bool decrypting) {
    if (out.size() < in.size()) {
      throw CryptoError("CFB output buffer too small");
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (used_ == kBlockBytes) {
        keystream_ =
            encrypt_block(Block64::from_bytes(shift_register_), subkeys_)
                .to_bytes();
        ++blocks_;
        used_ = 0;
      }
      const std::uint8_t input = in[i];
      const std::uint8_t output = input ^ keystream_[used_];
      const std::uint8_t cipher_byte = decrypting ? input : output;
      std::shift_left(shift_register_.begin(), shift_register_.end(), 1);
      shift_register_.back() = cipher_byte;
      out[i] = output;
      ++used_;
    }
  }

  EncryptionKeys subkeys_;
  Iv shift_register_{};
  std::array<std::uint8_t, kBlockBytes> keystream_{};
  std::size_t used_ = kBlockBytes;
  std::size_t blocks_ = 0;
};

/// Deterministic byte stream: each refill XORs a big-endian block counter
/// into the state, encrypts it, and keeps the ciphertext as the new state.
class RandContext {
 public:
  RandContext(const Key128& key, const Iv& seed)
      : subkeys_(expand_key(key)), state_(seed) {}

  RandContext(const RandContext&) = default;
  RandContext& operator=(const RandContext&) = default;
  ~RandContext() {
    detail::secure_zero(subkeys_);
    detail::secure_zero(state_);
    detail::secure_zero(buffer_);
  }

  std::uint8_t next_byte() {
    if (used_ == kBlockBytes) {
      std::array<std::uint8_t, kBlockBytes> ctr{};
      store_be64(ctr.data(), counter_);
      for (std::size_t i = 0; i < kBlockBytes; ++i) state_[i] ^= ctr[i];
      buffer_ = encrypt_block(Block64::from_bytes(state_), subkeys_).to_bytes();
      state_ = buffer_;
      ++counter_;
      used_ = 0;
    }
    return buffer_[used_++];
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> next_bytes() {
    std::array<std::uint8_t, N> out{};
    for (auto& b : out) b = next_byte();
    return out;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  EncryptionKeys subkeys_;
  Iv state_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint8_t, kBlockBytes> buffer_{};
  std::size_t used_ = kBlockBytes;
};

}  // namespace mecard::idea
