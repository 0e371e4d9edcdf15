#pragma once

// key=value configuration shared by the CLI sides. Blank lines and lines
// starting with '#' are ignored; whitespace around keys and values is
// trimmed. Recognized keys:
//
//   lcg.a  lcg.c  lcg.m  lcg.seed          LCG parameters (unsigned decimal)
//   ga.population  ga.width  ga.generations
//   ga.locus        a number, or "lcg" to draw loci from the LCG stream
//   ga.selection    true/false
//   password        session-key password
//   key             32 hex digits, used instead of password derivation
//   store           registry file path
//   endpoint        host:port

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mecard/common.hpp"
#include "mecard/ga_keygen.hpp"
#include "mecard/idea.hpp"

namespace mecard::config {

/// Environment variable consulted for the registry key when no other key
/// source is given.
inline constexpr const char* kRegistryKeyEnv = "MEC_REGISTRY_KEY";

struct Config {
  ga::LcgParams lcg;
  ga::EvolveOptions evolve;
  std::optional<std::string> password;
  std::optional<idea::Key128> key;
  std::optional<std::string> store;
  std::optional<std::string> endpoint;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_unsigned(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw UsageError(std::string(what) + ": expected an unsigned number, got '" +
                     std::string(text) + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view text, std::string_view what) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError(std::string(what) + ": expected true or false");
}

inline ga::LocusPolicy parse_locus(std::string_view text) {
  if (text == "lcg") return ga::LocusPolicy::from_lcg();
  return ga::LocusPolicy::at(parse_unsigned<unsigned>(text, "locus"));
}

/// Comma-separated unsigned decimals, e.g. "5,1,3".
template <typename T>
std::vector<T> parse_list(std::string_view text, std::string_view what) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    out.push_back(parse_unsigned<T>(trim(text.substr(pos, comma - pos)), what));
    pos = comma + 1;
  }
  return out;
}

/// Applies one key=value pair. Throws UsageError for unknown keys.
inline void apply(Config& cfg, std::string_view key, std::string_view value) {
  if (key == "lcg.a") {
    cfg.lcg.a = parse_unsigned<std::uint64_t>(value, key);
  } else if (key == "lcg.c") {
    cfg.lcg.c = parse_unsigned<std::uint64_t>(value, key);
  } else if (key == "lcg.m") {
    cfg.lcg.m = parse_unsigned<std::uint64_t>(value, key);
  } else if (key == "lcg.seed") {
    cfg.lcg.seed = parse_unsigned<std::uint64_t>(value, key);
  } else if (key == "ga.population") {
    cfg.evolve.population = parse_unsigned<std::size_t>(value, key);
  } else if (key == "ga.width") {
    cfg.evolve.width = parse_unsigned<unsigned>(value, key);
  } else if (key == "ga.generations") {
    cfg.evolve.generations = parse_unsigned<unsigned>(value, key);
  } else if (key == "ga.locus") {
    cfg.evolve.locus = parse_locus(value);
  } else if (key == "ga.selection") {
    cfg.evolve.selection = parse_bool(value, key);
  } else if (key == "password") {
    cfg.password = std::string(value);
  } else if (key == "key") {
    cfg.key = idea::Key128::from_hex(value);
  } else if (key == "store") {
    cfg.store = std::string(value);
  } else if (key == "endpoint") {
    cfg.endpoint = std::string(value);
  } else {
    throw UsageError("unknown config key '" + std::string(key) + "'");
  }
}

inline Config parse(std::istream& in, Config cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key=value");
    }
    try {
      apply(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline Config parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

inline Config load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  return parse(in);
}

// ---------------------------------------------------------------------------
// Key resolution

/// Candidate key material from flags, config file and environment.
struct KeySources {
  std::optional<std::string> key_hex;       // --key
  std::optional<idea::Key128> config_key;   // key= in the config file
  std::optional<std::string> password;      // --password or password=
  std::optional<std::string> env_key_hex;   // MEC_REGISTRY_KEY
  ga::LcgParams lcg;
  ga::EvolveOptions evolve;
};

/// Exactly one of --key, config key, or password must be present; the
/// environment key is used only when none of them is.
inline idea::Key128 resolve_key(const KeySources& s) {
  const int explicit_sources = (s.key_hex ? 1 : 0) + (s.config_key ? 1 : 0) +
                               (s.password ? 1 : 0);
  if (explicit_sources > 1) {
    throw UsageError(
        "ambiguous key: give only one of --key, a config key, or a password");
  }
  if (s.key_hex) return idea::Key128::from_hex(*s.key_hex);
  if (s.config_key) return *s.config_key;
  if (s.password) return ga::generate_session_key(*s.password, s.lcg, s.evolve);
  if (s.env_key_hex && !s.env_key_hex->empty()) {
    return idea::Key128::from_hex(*s.env_key_hex);
  }
  throw UsageError(std::string("no key: pass --key, --password, a config file "
                               "with key= or password=, or set ") +
                   kRegistryKeyEnv);
}

inline std::optional<std::string> env_registry_key() {
  if (const char* v = std::getenv(kRegistryKeyEnv)) return std::string(v);
  return std::nullopt;
}

}  // namespace mecard::config
