#include <gtest/gtest.h>

#include <random>

#include "mecard/idea_cfb.hpp"

namespace mecard::idea {
namespace {

Key128 random_key(std::mt19937_64& rng) {
  Key128 k;
  for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
  return k;
}

Iv random_iv(std::mt19937_64& rng) {
  Iv iv;
  for (auto& b : iv) b = static_cast<std::uint8_t>(rng());
  return iv;
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng());
  return b;
}

TEST(Cfb, InitState) {
  const Iv iv{1, 2, 3, 4, 5, 6, 7, 8};
  CfbContext ctx(Key128{}, iv);
  EXPECT_EQ(ctx.shift_register(), iv);
  EXPECT_EQ(ctx.used(), 8u);
}

TEST(Cfb, EmptyMessageDrawsNoKeystream) {
  const Iv iv{9, 9, 9, 9, 9, 9, 9, 9};
  CfbContext ctx(Key128{}, iv);
  EXPECT_TRUE(ctx.encrypt(Bytes{}).empty());
  EXPECT_EQ(ctx.blocks_generated(), 0u);
  EXPECT_EQ(ctx.shift_register(), iv);
  EXPECT_EQ(ctx.used(), 8u);
}

TEST(Cfb, OneByteUsesOneBlock) {
  CfbContext ctx(Key128{}, Iv{});
  ctx.encrypt(Bytes{0x42});
  EXPECT_EQ(ctx.blocks_generated(), 1u);
  EXPECT_EQ(ctx.used(), 1u);
}

TEST(Cfb, TwoBlockOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Key128 key = random_key(rng);
    const Iv iv = random_iv(rng);
    CfbContext ctx(key, iv);
    const Bytes c = ctx.encrypt(Bytes(16, 0));

    // Keystream of zero plaintext: E(iv), then E(first 8 ciphertext bytes).
    const EncryptionKeys enc = expand_key(key);
    const auto ks1 = encrypt_block(Block64::from_bytes(iv), enc).to_bytes();
    std::array<std::uint8_t, 8> c1{};
    std::copy(c.begin(), c.begin() + 8, c1.begin());
    const auto ks2 = encrypt_block(Block64::from_bytes(c1), enc).to_bytes();
    for (int i = 0; i < 8; ++i) {
      ASSERT_EQ(c[i], ks1[i]);
      ASSERT_EQ(c[8 + i], ks2[i]);
    }
  }
}

// Full-block CFB from an independent implementation (OpenSSL via the Python
// cryptography package) coincides with byte-shifted CFB-64.
TEST(Cfb, KnownAnswer) {
  const Key128 key = Key128::from_hex("000102030405060708090a0b0c0d0e0f");
  const Iv iv{0, 1, 2, 3, 4, 5, 6, 7};
  Bytes m(20);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint8_t>(i);
  CfbContext ctx(key, iv);
  EXPECT_EQ(to_hex(ctx.encrypt(m)), "864d9f7e248f0862982ac8b9c04835c8c9dd9d5c");
}

TEST(Cfb, RoundTripAllLengths) {
  std::mt19937_64 rng(22);
  const Key128 key = random_key(rng);
  const Iv iv = random_iv(rng);
  for (std::size_t n = 0; n <= 1000; ++n) {
    const Bytes m = random_bytes(rng, n);
    CfbContext enc(key, iv);
    CfbContext dec(key, iv);
    const Bytes c = enc.encrypt(m);
    ASSERT_EQ(c.size(), n);
    ASSERT_EQ(dec.decrypt(c), m) << "length " << n;
  }
}

TEST(Cfb, ChunkedEqualsOneShot) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Key128 key = random_key(rng);
    const Iv iv = random_iv(rng);
    const Bytes m = random_bytes(rng, rng() % 300);
    CfbContext enc(key, iv);
    const Bytes c = enc.encrypt(m);

    CfbContext chunked(key, iv);
    Bytes out;
    std::size_t pos = 0;
    while (pos < c.size()) {
      const std::size_t len = std::min<std::size_t>(c.size() - pos, rng() % 20);
      const Bytes part = chunked.decrypt(std::span(c).subspan(pos, len));
      out.insert(out.end(), part.begin(), part.end());
      pos += len;
    }
    ASSERT_EQ(out, m);
  }
}

TEST(Cfb, ReinitRestartsStream) {
  const Key128 key = Key128::from_hex("0f0e0d0c0b0a09080706050403020100");
  const Iv iv{1, 1, 2, 3, 5, 8, 13, 21};
  CfbContext ctx(key, iv);
  const Bytes first = ctx.encrypt(Bytes(13, 0xAA));
  ctx.reinit(iv);
  EXPECT_EQ(ctx.used(), 8u);
  EXPECT_EQ(ctx.encrypt(Bytes(13, 0xAA)), first);
}

TEST(Cfb, DistinctIvsGiveDistinctKeystreams) {
  std::mt19937_64 rng(24);
  const Key128 key = random_key(rng);
  int differ = 0;
  for (int i = 0; i < 1000; ++i) {
    const Iv a = random_iv(rng);
    const Iv b = random_iv(rng);
    CfbContext ca(key, a), cb(key, b);
    if (ca.encrypt(Bytes(8, 0)) != cb.encrypt(Bytes(8, 0))) ++differ;
  }
  EXPECT_GE(differ, 990);
}

TEST(Cfb, DestroyZeroesKeyMaterial) {
  CfbContext ctx(Key128::from_hex("ffffffffffffffffffffffffffffffff"),
                 Iv{1, 2, 3, 4, 5, 6, 7, 8});
  ctx.encrypt(Bytes(5, 1));
  ctx.destroy();
  for (auto v : ctx.subkeys().k) EXPECT_EQ(v, 0);
  for (auto v : ctx.shift_register()) EXPECT_EQ(v, 0);
}

TEST(Rand, FirstBlockIsEncryptedSeed) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const Key128 key = random_key(rng);
    const Iv seed = random_iv(rng);
    RandContext r(key, seed);
    const auto expect = encrypt_block(Block64::from_bytes(seed), expand_key(key)).to_bytes();
    for (int i = 0; i < 8; ++i) ASSERT_EQ(r.next_byte(), expect[i]);
    EXPECT_EQ(r.counter(), 1u);
  }
}

TEST(Rand, SecondBlockFollowsCounterConstruction) {
  const Key128 key = Key128::from_hex("00112233445566778899aabbccddeeff");
  const Iv seed{7, 7, 7, 7, 7, 7, 7, 7};
  RandContext r(key, seed);
  const auto first = r.next_bytes<8>();
  const auto second = r.next_bytes<8>();
  Iv state = first;
  state[7] ^= 1;  // counter 1, big-endian
  EXPECT_EQ(second, encrypt_block(Block64::from_bytes(state), expand_key(key)).to_bytes());
}

TEST(Rand, DeterministicAndSeedSensitive) {
  const Key128 key = Key128::from_hex("0123456789abcdef0123456789abcdef");
  RandContext a(key, Iv{1}), b(key, Iv{1}), c(key, Iv{2});
  Bytes sa, sb, sc;
  for (int i = 0; i < 64; ++i) {
    sa.push_back(a.next_byte());
    sb.push_back(b.next_byte());
    sc.push_back(c.next_byte());
  }
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa, sc);
}

TEST(Rand, ByteFrequenciesAreFlat) {
  RandContext r(Key128::from_hex("5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a"), Iv{3, 1, 4, 1, 5, 9, 2, 6});
  constexpr int kSamples = 1000000;
  std::array<int, 256> counts{};
  for (int i = 0; i < kSamples; ++i) ++counts[r.next_byte()];
  for (int v = 0; v < 256; ++v) {
    const double freq = static_cast<double>(counts[v]) / kSamples;
    EXPECT_NEAR(freq, 1.0 / 256, 0.01) << "byte " << v;
  }
}

}  // namespace
}  // namespace mecard::idea
