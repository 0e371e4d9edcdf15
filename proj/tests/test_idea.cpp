#include <gtest/gtest.h>

#include <random>

#include "mecard/idea.hpp"
#include "oracles.hpp"

namespace mecard::idea {
namespace {

Key128 random_key(std::mt19937_64& rng) {
  Key128 k;
  for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
  return k;
}

Block64 random_block(std::mt19937_64& rng) { return Block64::from_u64(rng()); }

TEST(IdeaMul, FixedValues) {
  EXPECT_EQ(mul(1, 0x1234), 0x1234);
  EXPECT_EQ(mul(0, 0), 1);
  EXPECT_EQ(mul(2, 32768), 0);
}

TEST(IdeaMul, AgreesWithPlainModularArithmetic) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200000; ++i) {
    const auto a = static_cast<std::uint16_t>(rng());
    const auto b = static_cast<std::uint16_t>(rng());
    ASSERT_EQ(mul(a, b), oracle::mul_mod(a, b)) << a << " * " << b;
  }
  for (std::uint32_t a = 0; a < 65536; ++a) {
    ASSERT_EQ(mul(static_cast<std::uint16_t>(a), 0),
              oracle::mul_mod(static_cast<std::uint16_t>(a), 0));
  }
}

TEST(IdeaMul, CommutativeWithIdentity) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100000; ++i) {
    const auto a = static_cast<std::uint16_t>(rng());
    const auto b = static_cast<std::uint16_t>(rng());
    ASSERT_EQ(mul(a, b), mul(b, a));
    ASSERT_EQ(mul(a, 1), a);
  }
}

TEST(IdeaMulInv, Conventions) {
  EXPECT_EQ(mul_inv(1), 1);
  EXPECT_EQ(mul_inv(0), 0);
  EXPECT_EQ(oracle::mul_inv_search(2), 32769);
  EXPECT_EQ(mul_inv(2), 32769);
}

TEST(IdeaMulInv, ExhaustiveInverse) {
  for (std::uint32_t x = 0; x < 65536; ++x) {
    const auto v = static_cast<std::uint16_t>(x);
    ASSERT_EQ(mul(v, mul_inv(v)), 1) << x;
  }
}

TEST(IdeaMulInv, MatchesSearchOnSample) {
  for (std::uint16_t x : {3, 4, 255, 256, 4097, 32768, 65535}) {
    EXPECT_EQ(mul_inv(x), oracle::mul_inv_search(x)) << x;
  }
}

TEST(IdeaKeySchedule, ZeroKey) {
  const EncryptionKeys k = expand_key(Key128{});
  for (auto v : k.k) EXPECT_EQ(v, 0);
}

TEST(IdeaKeySchedule, FirstGroupIsDirectSlicing) {
  const Key128 key = Key128::from_hex("00010002000300040005000600070008");
  const EncryptionKeys k = expand_key(key);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(k.k[i], i + 1);
}

TEST(IdeaKeySchedule, GroupsMatchRotatedBitSlices) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const Key128 key = random_key(rng);
    const EncryptionKeys k = expand_key(key);
    ASSERT_EQ(k.k.size(), 52u);
    for (unsigned g = 0; g < 7; ++g) {
      const auto slices = oracle::rotated_slices(key.bytes, 25 * g);
      for (unsigned w = 0; w < 8 && 8 * g + w < 52; ++w) {
        ASSERT_EQ(k.k[8 * g + w], slices[w]) << "group " << g << " word " << w;
      }
    }
  }
}

TEST(IdeaInvertKey, ZeroTableStaysZero) {
  const DecryptionKeys d = invert_key(EncryptionKeys{});
  for (auto v : d.k) EXPECT_EQ(v, 0);
}

TEST(IdeaInvertKey, IsAnInvolution) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const EncryptionKeys enc = expand_key(random_key(rng));
    const DecryptionKeys dec = invert_key(enc);
    const DecryptionKeys again = invert_key(EncryptionKeys{dec.k});
    ASSERT_EQ(again.k, enc.k);
  }
}

TEST(IdeaRound, HandEvaluatedIdentityLikeSubkeys) {
  // z1=z4=1, z2=z3=0, z5=1, z6=0 on (1,2,3,4):
  //   a=1 b=2 c=3 d=4; t1 = (1^3)*1 = 2
  //   t2 = ((2^4)+2) * 65536 = 8 * -1 = 65529 (mod 65537); t3 = 2 + 65529
  //   -> (1^65529, 3^65529, 2^65531, 4^65531)
  const std::array<std::uint16_t, 6> z{1, 0, 0, 1, 1, 0};
  const auto out = round({1, 2, 3, 4}, z);
  EXPECT_EQ(out[0], 0xFFF8);
  EXPECT_EQ(out[1], 0xFFFA);
  EXPECT_EQ(out[2], 0xFFF9);
  EXPECT_EQ(out[3], 0xFFFF);
}

// Reference vectors produced with an independent IDEA implementation
// (OpenSSL via the Python cryptography package).
TEST(IdeaCipher, KnownAnswers) {
  struct Vector {
    const char* key;
    const char* plain;
    const char* cipher;
  };
  const Vector vectors[] = {
      {"00010002000300040005000600070008", "0000000100020003", "11fbed2b01986de5"},
      {"00000000000000000000000000000000", "0000000000000000", "0001000100000000"},
      {"f05d9b66d1877dffb5d46f9ea92669ef", "4b6cd21db2d5ee3f", "48a467c846e6020f"},
      {"47a7c7a9b066a6dad4a26dd075681473", "0984a3d739a97678", "0812d29d6b5b8814"},
      {"edbb4567bcfc4886c6acabee5643a969", "213258024de078b3", "7fe41659ebd9edf1"},
      {"752964917aec86f6dfd466249a9a8e45", "8033fd6f64c65a72", "e43be17e4c28bf75"},
  };
  for (const auto& v : vectors) {
    const EncryptionKeys enc = expand_key(Key128::from_hex(v.key));
    const Bytes p = from_hex(v.plain);
    const Block64 c = encrypt_block(Block64::from_bytes(std::span<const std::uint8_t, 8>(p.data(), 8)), enc);
    EXPECT_EQ(to_hex(c.to_bytes()), v.cipher) << v.key;
    EXPECT_EQ(to_hex(decrypt_block(c, invert_key(enc)).to_bytes()), v.plain);
  }
}

TEST(IdeaCipher, MatchesLiteralStepOracle) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 2000; ++i) {
    const EncryptionKeys enc = expand_key(random_key(rng));
    const Block64 m = random_block(rng);
    ASSERT_EQ(encrypt_block(m, enc).x, oracle::encrypt_literal(m.x, enc.k));
  }
}

TEST(IdeaCipher, ZeroTablesShareOneCodePath) {
  EXPECT_EQ(decrypt_block(Block64{}, DecryptionKeys{}),
            encrypt_block(Block64{}, EncryptionKeys{}));
}

TEST(IdeaCipher, RoundTripSampleMessage) {
  const std::array<std::uint8_t, 8> msg{12, 34, 56, 77, 86, 34, 55, 66};
  std::mt19937_64 rng(16);
  for (int i = 0; i < 100; ++i) {
    const EncryptionKeys enc = expand_key(random_key(rng));
    const Block64 c = encrypt_block(Block64::from_bytes(msg), enc);
    EXPECT_EQ(decrypt_block(c, invert_key(enc)).to_bytes(), msg);
  }
}

TEST(IdeaCipher, RandomRoundTrips) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20000; ++i) {
    const EncryptionKeys enc = expand_key(random_key(rng));
    const Block64 m = random_block(rng);
    ASSERT_EQ(decrypt_block(encrypt_block(m, enc), invert_key(enc)), m);
  }
}

TEST(IdeaBlock, BigEndianSerialization) {
  const Block64 b = Block64::from_u64(0x0102030405060708ULL);
  EXPECT_EQ(b.x[0], 0x0102);
  EXPECT_EQ(b.x[3], 0x0708);
  EXPECT_EQ(b.to_u64(), 0x0102030405060708ULL);
  const std::array<std::uint8_t, 8> bytes{1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(b.to_bytes(), bytes);
}

TEST(IdeaKey, RejectsBadHex) {
  EXPECT_THROW(Key128::from_hex("0011"), UsageError);
  EXPECT_THROW(Key128::from_hex(std::string(32, 'g')), UsageError);
  EXPECT_EQ(Key128::from_hex("000102030405060708090A0B0C0D0E0F").hex(),
            "000102030405060708090a0b0c0d0e0f");
}

}  // namespace
}  // namespace mecard::idea
