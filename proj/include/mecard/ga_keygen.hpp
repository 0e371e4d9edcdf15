#pragma once

// Genetic-algorithm session-key pipeline:
//
//   LCG-seeded population -> crossover + mutation per generation
//   -> GENETIC_ARRAY (every generation, in order)
//   -> CODED_ARRAY (digital root of each entry)
//   -> password bytes + coded digits
//   -> first 8 mixed bytes expanded nibble-by-nibble to a 128-bit IDEA key.
//
// Everything here is a pure function of its inputs.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mecard/common.hpp"
#include "mecard/idea.hpp"

namespace mecard::ga {

using u128 = unsigned __int128;

inline constexpr unsigned kMaxWidth = 128;
inline constexpr unsigned kLcgChunkBits = 16;
inline constexpr std::size_t kMinPasswordLength = 8;

class KeygenError : public Error {
 public:
  explicit KeygenError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// Decimal rendering of a 128-bit value.
inline std::string to_string(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v != 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

// ---------------------------------------------------------------------------
// Linear congruential generator

struct LcgParams {
  std::uint64_t a = 1103515245;
  std::uint64_t c = 12345;
  std::uint64_t m = 2147483648ULL;
  std::uint64_t seed = 1;

  void validate() const {
    if (m == 0) throw KeygenError("LCG modulus must be > 0");
    if (a >= m) throw KeygenError("LCG multiplier must satisfy 0 <= a < m");
    if (c >= m) throw KeygenError("LCG increment must satisfy 0 <= c < m");
  }

  friend bool operator==(const LcgParams&, const LcgParams&) = default;
};

/// X_{n+1} = (a * X_n + c) mod m, computed without overflow.
inline std::uint64_t lcg_next(std::uint64_t x, const LcgParams& p) {
  return static_cast<std::uint64_t>(
      (static_cast<u128>(p.a) * x + p.c) % p.m);
}

class Lcg {
 public:
  explicit Lcg(const LcgParams& p) : params_(p), state_(p.seed) { p.validate(); }

  std::uint64_t next() {
    state_ = lcg_next(state_, params_);
    return state_;
  }

  std::uint64_t state() const { return state_; }

 private:
  LcgParams params_;
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Chromosomes

/// Fixed-width bit string, loci numbered from 1 at the most significant bit.
class Chromosome {
 public:
  Chromosome() = default;

  Chromosome(u128 value, unsigned width) : width_(width) {
    if (width == 0 || width > kMaxWidth) {
      throw KeygenError("chromosome width must be in 1..128, got " +
                        std::to_string(width));
    }
    if (width < kMaxWidth && (value >> width) != 0) {
      throw KeygenError("value " + mecard::ga::to_string(value) +
                        " does not fit in " + std::to_string(width) + " bits");
    }
    bits_ = value;
  }

  u128 value() const { return bits_; }
  unsigned width() const { return width_; }

  bool bit(unsigned locus) const {
    check_locus(locus, width_);
    return ((bits_ >> (width_ - locus)) & 1) != 0;
  }

  unsigned ones() const {
    return static_cast<unsigned>(
        std::popcount(static_cast<std::uint64_t>(bits_)) +
        std::popcount(static_cast<std::uint64_t>(bits_ >> 64)));
  }

  /// MSB-first '0'/'1' text.
  std::string str() const {
    std::string s;
    for (unsigned l = 1; l <= width_; ++l) s.push_back(bit(l) ? '1' : '0');
    return s;
  }

  friend bool operator==(const Chromosome&, const Chromosome&) = default;

  static void check_locus(unsigned locus, unsigned max) {
    if (locus < 1 || locus > max) {
      throw KeygenError("locus " + std::to_string(locus) + " outside 1.." +
                        std::to_string(max));
    }
  }

 private:
  u128 bits_ = 0;
  unsigned width_ = kMaxWidth;
};

/// Mask selecting the low `count` bits.
inline u128 low_mask(unsigned count) {
  return count >= 128 ? ~u128{0} : ((u128{1} << count) - 1);
}

/// Single-point crossover: the children swap everything after `locus`.
inline std::pair<Chromosome, Chromosome> crossover(const Chromosome& p1,
                                                   const Chromosome& p2,
                                                   unsigned locus) {
  if (p1.width() != p2.width()) {
    throw KeygenError("crossover parents differ in width");
  }
  const unsigned w = p1.width();
  if (w < 2) throw KeygenError("crossover needs width >= 2");
  Chromosome::check_locus(locus, w - 1);
  const u128 tail = low_mask(w - locus);
  return {Chromosome((p1.value() & ~tail) | (p2.value() & tail), w),
          Chromosome((p2.value() & ~tail) | (p1.value() & tail), w)};
}

/// Flips the bit at `locus`.
inline Chromosome mutate(const Chromosome& c, unsigned locus) {
  Chromosome::check_locus(locus, c.width());
  return Chromosome(c.value() ^ (u128{1} << (c.width() - locus)), c.width());
}

/// Bit balance: 1 for half ones, 0 for all zeros or all ones.
inline double fitness(const Chromosome& c) {
  const double ratio = static_cast<double>(c.ones()) / c.width();
  const double dev = ratio - 0.5;
  return 1.0 - (dev < 0 ? -dev : dev) * 2.0;
}

// ---------------------------------------------------------------------------
// Population and evolution

struct Population {
  std::vector<Chromosome> chromosomes;
  unsigned generation = 1;
};

/// Each chromosome is the MSB-first concatenation of the low 16 bits of
/// successive LCG outputs, truncated to its leading `width` bits.
inline Population seed_population(Lcg& rng, std::size_t n, unsigned width) {
  if (width == 0 || width > kMaxWidth) {
    throw KeygenError("chromosome width must be in 1..128");
  }
  const unsigned chunks = (width + kLcgChunkBits - 1) / kLcgChunkBits;
  Population pop;
  pop.chromosomes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    u128 acc = 0;
    for (unsigned k = 0; k < chunks; ++k) {
      acc = (acc << kLcgChunkBits) | (rng.next() & 0xFFFF);
    }
    pop.chromosomes.emplace_back(acc >> (chunks * kLcgChunkBits - width), width);
  }
  return pop;
}

inline Population seed_population(const LcgParams& p, std::size_t n,
                                  unsigned width) {
  Lcg rng(p);
  return seed_population(rng, n, width);
}

/// Crossover pairs for producing generation `generation`: even generations
/// pair top-down (0,1)(2,3)..., odd ones bottom-up (n-1,n-2)(n-3,n-4)...
/// With odd n the last index visited stays unpaired.
inline std::vector<std::pair<std::size_t, std::size_t>> pair_indices(
    unsigned generation, std::size_t n) {
  if (n < 2) {
    throw KeygenError("degenerate population: need at least 2 chromosomes");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n / 2);
  if (generation % 2 == 0) {
    for (std::size_t i = 0; i + 1 < n; i += 2) pairs.emplace_back(i, i + 1);
  } else {
    for (std::size_t i = n; i >= 2; i -= 2) pairs.emplace_back(i - 1, i - 2);
  }
  return pairs;
}

/// Where crossover and mutation happen. A fixed locus, or one drawn per pair
/// from the evolving LCG stream as 1 + (x mod (W - 1)).
struct LocusPolicy {
  std::optional<unsigned> fixed;

  static LocusPolicy at(unsigned locus) { return {locus}; }
  static LocusPolicy from_lcg() { return {}; }

  unsigned next(Lcg& rng, unsigned width) const {
    if (fixed) return *fixed;
    return 1 + static_cast<unsigned>(rng.next() % (width - 1));
  }
};

struct EvolveOptions {
  std::size_t population = 10;
  unsigned width = 128;
  unsigned generations = 10;
  LocusPolicy locus = LocusPolicy::from_lcg();
  bool selection = false;
};

using GeneticArray = std::vector<u128>;
using CodedArray = std::vector<std::uint8_t>;

/// One generation step. Children replace their parents in place; with
/// selection on, the best `n` of parents followed by children survive
/// (stable on ties).
inline Population next_generation(const Population& current, Lcg& rng,
                                  const EvolveOptions& opt) {
  const auto& parents = current.chromosomes;
  const unsigned gen = current.generation + 1;
  Population next{parents, gen};
  for (const auto& [i, j] : pair_indices(gen, parents.size())) {
    const unsigned locus = opt.locus.next(rng, parents[i].width());
    auto [c1, c2] = crossover(parents[i], parents[j], locus);
    next.chromosomes[i] = mutate(c1, locus);
    next.chromosomes[j] = mutate(c2, locus);
  }
  if (opt.selection) {
    std::vector<Chromosome> pool = parents;
    pool.insert(pool.end(), next.chromosomes.begin(), next.chromosomes.end());
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Chromosome& a, const Chromosome& b) {
                       return fitness(a) > fitness(b);
                     });
    pool.resize(parents.size());
    next.chromosomes = std::move(pool);
  }
  return next;
}

/// Runs `generations` generations starting from `initial` (generation 1)
/// and returns every chromosome of every generation in order.
inline GeneticArray evolve(Population initial, Lcg& rng,
                           const EvolveOptions& opt) {
  if (opt.generations < 1) throw KeygenError("need at least one generation");
  if (opt.locus.fixed && !initial.chromosomes.empty()) {
    const unsigned w = initial.chromosomes.front().width();
    if (w < 2) throw KeygenError("crossover needs width >= 2");
    Chromosome::check_locus(*opt.locus.fixed, w - 1);
  }
  GeneticArray out;
  out.reserve(opt.generations * initial.chromosomes.size());
  Population pop = std::move(initial);
  for (unsigned g = 1;; ++g) {
    for (const auto& c : pop.chromosomes) out.push_back(c.value());
    if (g == opt.generations) break;
    pop = next_generation(pop, rng, opt);
  }
  return out;
}

inline GeneticArray evolve(const LcgParams& p, const EvolveOptions& opt) {
  Lcg rng(p);
  Population initial = seed_population(rng, opt.population, opt.width);
  return evolve(std::move(initial), rng, opt);
}

// ---------------------------------------------------------------------------
// Coding and key derivation

/// Repeated decimal digit sum down to one digit. 0 stays 0.
inline std::uint8_t digital_root(u128 v) {
  while (v >= 10) {
    u128 sum = 0;
    for (; v != 0; v /= 10) sum += v % 10;
    v = sum;
  }
  return static_cast<std::uint8_t>(v);
}

inline CodedArray coded_array(std::span<const u128> genetic) {
  CodedArray out;
  out.reserve(genetic.size());
  for (u128 v : genetic) out.push_back(digital_root(v));
  return out;
}

/// output[i] = password[i] + coded[i mod |coded|].
inline Bytes mix_password(std::string_view password,
                          std::span<const std::uint8_t> coded) {
  if (password.size() < kMinPasswordLength) {
    throw KeygenError("password must be at least 8 characters");
  }
  if (coded.empty()) throw KeygenError("coded array is empty");
  Bytes out;
  out.reserve(password.size());
  for (std::size_t i = 0; i < password.size(); ++i) {
    const auto ch = static_cast<unsigned char>(password[i]);
    if (ch < 32 || ch > 126) {
      throw KeygenError("password byte " + std::to_string(i) +
                        " is not printable ASCII");
    }
    out.push_back(static_cast<std::uint8_t>(ch + coded[i % coded.size()]));
  }
  return out;
}

/// One nibble v becomes the byte  code(1) | rank(3) | 0000  where code is
/// v's parity and rank = v / 2 its 0-based position in the even or odd
/// series. Eight input bytes give sixteen output bytes.
inline std::uint8_t expand_nibble(std::uint8_t v) {
  const std::uint8_t code = v & 1;
  const std::uint8_t rank = (v >> 1) & 0x07;
  return static_cast<std::uint8_t>((code << 7) | (rank << 4));
}

inline idea::Key128 expand_64_to_128(std::span<const std::uint8_t> mixed) {
  if (mixed.size() != 8) {
    throw KeygenError("key expansion needs exactly 8 bytes, got " +
                      std::to_string(mixed.size()));
  }
  idea::Key128 key;
  for (std::size_t i = 0; i < 8; ++i) {
    key.bytes[2 * i] = expand_nibble(mixed[i] >> 4);
    key.bytes[2 * i + 1] = expand_nibble(mixed[i] & 0x0F);
  }
  return key;
}

/// Password mixing with an explicit coded array, then key expansion.
inline idea::Key128 key_from_coded(std::string_view password,
                                   std::span<const std::uint8_t> coded) {
  const Bytes mixed = mix_password(password, coded);
  return expand_64_to_128(std::span(mixed).first(8));
}

inline idea::Key128 generate_session_key(std::string_view password,
                                         const LcgParams& p,
                                         const EvolveOptions& opt) {
  const GeneticArray genetic = evolve(p, opt);
  return key_from_coded(password, coded_array(genetic));
}

}  // namespace mecard::ga
