#pragma once

// Multipurpose Electronic Card registry. Each citizen record carries an
// 8-byte unique ID: the IDEA encryption of its serial under the registry
// key. Presenting a unique ID authenticates by decrypting it back to a
// known serial.
//
// Store file: one record per line,
//   serial,hex(name),age,facilities_hex,uid_hex,status
// serial and age in decimal, facilities as 8 lowercase hex digits, uid as 16,
// status "active" or "revoked". The key is never written to the file.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mecard/common.hpp"
#include "mecard/idea.hpp"

namespace mecard::registry {

using UniqueId = std::array<std::uint8_t, idea::kBlockBytes>;

inline constexpr std::size_t kMaxNameBytes = 64;
inline constexpr unsigned kMaxAge = 150;
inline constexpr std::uint32_t kVotingRight = 1u << 0;

enum class Status { active, revoked };

inline std::string_view to_string(Status s) {
  return s == Status::active ? "active" : "revoked";
}

class RegistryError : public Error {
 public:
  enum class Code : std::uint8_t {
    invalid_field = 1,
    unknown_id = 2,
    revoked = 3,
    storage = 4,
    corrupt_store = 5,
  };

  RegistryError(Code code, const std::string& what)
      : Error(ErrorKind::registry, what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct CitizenRecord {
  std::uint64_t serial = 0;
  std::string name;
  unsigned age = 0;
  std::uint32_t facilities = 0;
  Status status = Status::active;
  UniqueId unique_id{};

  bool has_voting_right() const { return (facilities & kVotingRight) != 0; }

  friend bool operator==(const CitizenRecord&, const CitizenRecord&) = default;
};

/// Clears the personal fields; serial and unique_id are registry-owned.
inline CitizenRecord set_all_defaults(CitizenRecord r) {
  r.name.clear();
  r.age = 0;
  r.facilities = 0;
  r.status = Status::active;
  return r;
}

inline void validate_name(std::string_view name) {
  if (name.size() > kMaxNameBytes) {
    throw RegistryError(RegistryError::Code::invalid_field,
                        "name longer than 64 bytes");
  }
  for (unsigned char ch : name) {
    if (ch < 32 || ch > 126) {
      throw RegistryError(RegistryError::Code::invalid_field,
                          "name contains a non-printable byte");
    }
  }
}

inline void validate_age(unsigned age) {
  if (age > kMaxAge) {
    throw RegistryError(RegistryError::Code::invalid_field,
                        "age " + std::to_string(age) + " outside 0..150");
  }
}

/// Read-only view returned by status checks.
struct StatusReport {
  std::uint64_t serial = 0;
  std::string name;
  unsigned age = 0;
  std::uint32_t facilities = 0;
  Status status = Status::active;
  UniqueId unique_id{};

  friend bool operator==(const StatusReport&, const StatusReport&) = default;
};

inline StatusReport make_report(const CitizenRecord& r) {
  return {r.serial, r.name, r.age, r.facilities, r.status, r.unique_id};
}

// ---------------------------------------------------------------------------
// Text format

inline std::string format_record(const CitizenRecord& r) {
  std::ostringstream line;
  char facilities[9];
  std::snprintf(facilities, sizeof facilities, "%08x", r.facilities);
  line << r.serial << ','
       << to_hex({reinterpret_cast<const std::uint8_t*>(r.name.data()),
                  r.name.size()})
       << ',' << r.age << ',' << facilities << ',' << to_hex(r.unique_id) << ','
       << to_string(r.status);
  return line.str();
}

namespace detail {

inline std::uint64_t parse_decimal(std::string_view s, std::string_view field) {
  if (s.empty() || s.size() > 20) {
    throw RegistryError(RegistryError::Code::corrupt_store,
                        "bad " + std::string(field) + " field");
  }
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') {
      throw RegistryError(RegistryError::Code::corrupt_store,
                          "bad " + std::string(field) + " field");
    }
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

inline bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

}  // namespace detail

/// Strict parser for one store line; rejects anything format_record would
/// not produce.
inline CitizenRecord parse_record(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    parts.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  auto corrupt = [](const std::string& why) {
    return RegistryError(RegistryError::Code::corrupt_store, why);
  };
  if (parts.size() != 6) throw corrupt("expected 6 fields per record");

  CitizenRecord r;
  r.serial = detail::parse_decimal(parts[0], "serial");
  if (parts[1].size() % 2 != 0 || !detail::is_lower_hex(parts[1])) {
    throw corrupt("name is not lowercase hex");
  }
  const Bytes name = from_hex(parts[1]);
  r.name.assign(name.begin(), name.end());
  const std::uint64_t age = detail::parse_decimal(parts[2], "age");
  if (age > kMaxAge) throw corrupt("age out of range");
  r.age = static_cast<unsigned>(age);
  if (parts[3].size() != 8 || !detail::is_lower_hex(parts[3])) {
    throw corrupt("facilities must be 8 lowercase hex digits");
  }
  r.facilities = load_be32(from_hex(parts[3]).data());
  if (parts[4].size() != 16 || !detail::is_lower_hex(parts[4])) {
    throw corrupt("unique id must be 16 lowercase hex digits");
  }
  const Bytes uid = from_hex(parts[4]);
  std::copy(uid.begin(), uid.end(), r.unique_id.begin());
  if (parts[5] == "active") {
    r.status = Status::active;
  } else if (parts[5] == "revoked") {
    r.status = Status::revoked;
  } else {
    throw corrupt("unknown status '" + std::string(parts[5]) + "'");
  }
  try {
    validate_name(r.name);
  } catch (const RegistryError&) {
    throw corrupt("name field fails validation");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Store

/// Ordered collection of records under one registry key. When constructed
/// with a path, every mutation rewrites the file; otherwise it lives in
/// memory only. Single writer: callers serialize mutations.
class RegistryStore {
 public:
  explicit RegistryStore(const idea::Key128& key,
                         std::optional<std::filesystem::path> path = {})
      : enc_(idea::expand_key(key)),
        dec_(idea::invert_key(enc_)),
        path_(std::move(path)) {}

  /// Opens a store file, creating an empty store if it does not exist.
  static RegistryStore open(const idea::Key128& key,
                            const std::filesystem::path& path) {
    RegistryStore store(key, path);
    if (std::filesystem::exists(path)) store.load();
    return store;
  }

  CitizenRecord issue_card(std::string_view name, unsigned age) {
    validate_name(name);
    validate_age(age);
    return transact([&] {
      CitizenRecord r = set_all_defaults({});
      r.serial = next_serial_++;
      r.name = std::string(name);
      r.age = age;
      r.unique_id = unique_id_for(r.serial);
      records_.emplace(r.serial, r);
      return r;
    });
  }

  CitizenRecord set_voter_flag(const UniqueId& uid) {
    return transact([&] {
      CitizenRecord& r = resolve(uid);
      if (r.status == Status::revoked) {
        throw RegistryError(RegistryError::Code::revoked, "record is revoked");
      }
      r.facilities |= kVotingRight;
      return r;
    });
  }

  StatusReport check_overall_status(const UniqueId& uid) const {
    return make_report(resolve(uid));
  }

  CitizenRecord revoke(const UniqueId& uid) {
    return transact([&] {
      CitizenRecord& r = resolve(uid);
      if (r.status == Status::revoked) {
        throw RegistryError(RegistryError::Code::revoked,
                            "record already revoked");
      }
      r.status = Status::revoked;
      r.facilities = 0;
      return r;
    });
  }

  UniqueId unique_id_for(std::uint64_t serial) const {
    return idea::encrypt_block(idea::Block64::from_u64(serial), enc_).to_bytes();
  }

  std::uint64_t serial_for(const UniqueId& uid) const {
    return idea::decrypt_block(idea::Block64::from_bytes(uid), dec_).to_u64();
  }

  std::vector<CitizenRecord> records() const {
    std::vector<CitizenRecord> out;
    out.reserve(records_.size());
    for (const auto& [serial, r] : records_) out.push_back(r);
    return out;
  }

  std::size_t size() const { return records_.size(); }
  const std::optional<std::filesystem::path>& path() const { return path_; }

  /// The exact file contents this store persists.
  std::string serialize() const {
    std::string out;
    for (const auto& [serial, r] : records_) {
      out += format_record(r);
      out += '\n';
    }
    return out;
  }

  void save() const {
    if (!path_) return;
    const std::filesystem::path tmp = path_->string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) {
        throw RegistryError(RegistryError::Code::storage,
                            "cannot write " + tmp.string());
      }
      f << serialize();
      f.flush();
      if (!f) {
        throw RegistryError(RegistryError::Code::storage,
                            "write failed for " + tmp.string());
      }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, *path_, ec);
    if (ec) {
      throw RegistryError(RegistryError::Code::storage,
                          "cannot replace " + path_->string() + ": " +
                              ec.message());
    }
  }

  void load() {
    if (!path_) return;
    std::ifstream f(*path_, std::ios::binary);
    if (!f) {
      throw RegistryError(RegistryError::Code::storage,
                          "cannot read " + path_->string());
    }
    std::stringstream buf;
    buf << f.rdbuf();
    load_from_string(buf.str());
  }

  /// Replaces the contents with records parsed from store text. Each
  /// record's unique ID must match this store's key.
  void load_from_string(std::string_view text) {
    std::map<std::uint64_t, CitizenRecord> loaded;
    std::uint64_t max_serial = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) {
        throw RegistryError(RegistryError::Code::corrupt_store,
                            "store does not end with a newline");
      }
      CitizenRecord r = parse_record(text.substr(pos, nl - pos));
      pos = nl + 1;
      if (r.serial == 0 || loaded.count(r.serial) != 0) {
        throw RegistryError(RegistryError::Code::corrupt_store,
                            "duplicate or zero serial " + std::to_string(r.serial));
      }
      if (r.unique_id != unique_id_for(r.serial)) {
        throw RegistryError(RegistryError::Code::corrupt_store,
                            "unique id of serial " + std::to_string(r.serial) +
                                " does not match the registry key");
      }
      max_serial = std::max(max_serial, r.serial);
      loaded.emplace(r.serial, std::move(r));
    }
    records_ = std::move(loaded);
    next_serial_ = max_serial + 1;
  }

 private:
  template <typename Self>
  static auto& resolve_in(Self& self, const UniqueId& uid) {
    const std::uint64_t serial = self.serial_for(uid);
    auto it = self.records_.find(serial);
    if (it == self.records_.end() || it->second.unique_id != uid) {
      throw RegistryError(RegistryError::Code::unknown_id,
                          "unique id " + to_hex(uid) + " is not registered");
    }
    return it->second;
  }

  CitizenRecord& resolve(const UniqueId& uid) { return resolve_in(*this, uid); }
  const CitizenRecord& resolve(const UniqueId& uid) const {
    return resolve_in(*this, uid);
  }

  // Applies a mutation and persists it; on any failure the in-memory state
  // is rolled back so memory and file never diverge.
  template <typename F>
  CitizenRecord transact(F&& mutation) {
    auto saved_records = records_;
    const std::uint64_t saved_next = next_serial_;
    try {
      CitizenRecord result = mutation();
      save();
      return result;
    } catch (...) {
      records_ = std::move(saved_records);
      next_serial_ = saved_next;
      throw;
    }
  }

  idea::EncryptionKeys enc_;
  idea::DecryptionKeys dec_;
  std::optional<std::filesystem::path> path_;
  std::map<std::uint64_t, CitizenRecord> records_;
  std::uint64_t next_serial_ = 1;
};

}  // namespace mecard::registry
