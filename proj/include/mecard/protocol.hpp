#pragma once

// Wire format for the government/consumer exchange.
//
// Frame (big-endian):
//   "MEC1" | version 0x01 | command | iv[8] | length u32 | ciphertext[length]
//
// The ciphertext is CFB-64 under the shared key and the frame IV. Its
// plaintext is a 4-byte checksum (sum of body bytes mod 2^32) followed by
// the body. The body is a list of fields, each a u16 length plus bytes.
//
// The checksum detects corruption. It is not a MAC.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mecard/common.hpp"
#include "mecard/idea.hpp"
#include "mecard/idea_cfb.hpp"
#include "mecard/registry.hpp"

namespace mecard::protocol {

inline constexpr std::array<std::uint8_t, 4> kMagic{0x4D, 0x45, 0x43, 0x31};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 8 + 4;
inline constexpr std::size_t kChecksumBytes = 4;
inline constexpr std::uint32_t kMaxCiphertext = 1u << 20;

enum class Command : std::uint8_t { issue = 1, grant = 2, check = 3, revoke = 4 };

inline bool is_command(std::uint8_t v) { return v >= 1 && v <= 4; }

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::issue: return "issue";
    case Command::grant: return "grant";
    case Command::check: return "check";
    case Command::revoke: return "revoke";
  }
  return "?";
}

/// Response status codes. Registry failures reuse RegistryError::Code.
enum class StatusCode : std::uint8_t {
  ok = 0,
  invalid_field = 1,
  unknown_id = 2,
  revoked = 3,
  storage = 4,
  corrupt_store = 5,
  checksum_mismatch = 16,
  malformed_body = 17,
  bad_command = 18,
  internal = 19,
};

class ProtocolError : public TransportError {
 public:
  enum class Reason {
    truncated,
    bad_magic,
    bad_version,
    bad_command,
    bad_length,
    checksum_mismatch,
    malformed_body,
  };

  ProtocolError(Reason reason, const std::string& what)
      : TransportError(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

struct Frame {
  std::uint8_t command = 0;
  idea::Iv iv{};
  Bytes ciphertext;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline Bytes encode_frame(const Frame& f) {
  Bytes out(kHeaderBytes + f.ciphertext.size());
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  out[4] = kVersion;
  out[5] = f.command;
  std::copy(f.iv.begin(), f.iv.end(), out.begin() + 6);
  store_be32(&out[14], static_cast<std::uint32_t>(f.ciphertext.size()));
  std::copy(f.ciphertext.begin(), f.ciphertext.end(), out.begin() + kHeaderBytes);
  return out;
}

/// Validated header fields; the ciphertext follows on the wire.
struct FrameHeader {
  std::uint8_t command = 0;
  idea::Iv iv{};
  std::uint32_t length = 0;
};

/// Checks magic and version only. Command validity is reported separately
/// so the server can answer an unknown command with an error frame.
inline FrameHeader decode_header(std::span<const std::uint8_t> in) {
  using R = ProtocolError::Reason;
  if (in.size() < kHeaderBytes) throw ProtocolError(R::truncated, "short frame header");
  if (!std::equal(kMagic.begin(), kMagic.end(), in.begin())) {
    throw ProtocolError(R::bad_magic, "bad frame magic");
  }
  if (in[4] != kVersion) {
    throw ProtocolError(R::bad_version,
                        "unsupported frame version " + std::to_string(in[4]));
  }
  FrameHeader h;
  h.command = in[5];
  std::copy(in.begin() + 6, in.begin() + 14, h.iv.begin());
  h.length = load_be32(&in[14]);
  if (h.length > kMaxCiphertext) {
    throw ProtocolError(R::bad_length, "frame length exceeds limit");
  }
  return h;
}

/// Decodes exactly one frame occupying all of `in`.
inline Frame decode_frame(std::span<const std::uint8_t> in) {
  const FrameHeader h = decode_header(in);
  if (in.size() != kHeaderBytes + h.length) {
    throw ProtocolError(ProtocolError::Reason::bad_length,
                        "frame length field does not match frame size");
  }
  Frame f;
  f.command = h.command;
  f.iv = h.iv;
  f.ciphertext.assign(in.begin() + kHeaderBytes, in.end());
  return f;
}

inline std::uint32_t checksum(std::span<const std::uint8_t> body) {
  std::uint32_t sum = 0;
  for (std::uint8_t b : body) sum += b;
  return sum;
}

inline Frame seal_frame(const idea::Key128& key, std::uint8_t command,
                        const idea::Iv& iv, std::span<const std::uint8_t> body) {
  Bytes plain(kChecksumBytes + body.size());
  store_be32(plain.data(), checksum(body));
  std::copy(body.begin(), body.end(), plain.begin() + kChecksumBytes);
  idea::CfbContext cfb(key, iv);
  return {command, iv, cfb.encrypt(plain)};
}

/// Decrypts and verifies the checksum; returns the body.
inline Bytes open_frame(const idea::Key128& key, const Frame& f) {
  using R = ProtocolError::Reason;
  if (f.ciphertext.size() < kChecksumBytes) {
    throw ProtocolError(R::truncated, "ciphertext shorter than checksum");
  }
  idea::CfbContext cfb(key, f.iv);
  const Bytes plain = cfb.decrypt(f.ciphertext);
  const std::span<const std::uint8_t> body(plain.begin() + kChecksumBytes,
                                           plain.end());
  if (load_be32(plain.data()) != checksum(body)) {
    throw ProtocolError(R::checksum_mismatch, "frame checksum mismatch");
  }
  return Bytes(body.begin(), body.end());
}

// ---------------------------------------------------------------------------
// Bodies

using Fields = std::vector<Bytes>;

inline Bytes encode_fields(const Fields& fields) {
  Bytes out;
  for (const Bytes& f : fields) {
    if (f.size() > 0xFFFF) {
      throw ProtocolError(ProtocolError::Reason::malformed_body,
                          "field longer than 65535 bytes");
    }
    const std::size_t at = out.size();
    out.resize(at + 2 + f.size());
    store_be16(&out[at], static_cast<std::uint16_t>(f.size()));
    std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(at + 2));
  }
  return out;
}

inline Fields decode_fields(std::span<const std::uint8_t> body) {
  Fields out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    if (body.size() - pos < 2) {
      throw ProtocolError(ProtocolError::Reason::malformed_body,
                          "truncated field length");
    }
    const std::size_t len = load_be16(&body[pos]);
    pos += 2;
    if (body.size() - pos < len) {
      throw ProtocolError(ProtocolError::Reason::malformed_body,
                          "field overruns body");
    }
    out.emplace_back(body.begin() + static_cast<std::ptrdiff_t>(pos),
                     body.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

namespace detail {

inline Bytes u16_field(std::uint16_t v) {
  Bytes b(2);
  store_be16(b.data(), v);
  return b;
}

inline Bytes u32_field(std::uint32_t v) {
  Bytes b(4);
  store_be32(b.data(), v);
  return b;
}

inline Bytes u64_field(std::uint64_t v) {
  Bytes b(8);
  store_be64(b.data(), v);
  return b;
}

inline Bytes text_field(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline void expect_size(const Bytes& f, std::size_t n, const char* what) {
  if (f.size() != n) {
    throw ProtocolError(ProtocolError::Reason::malformed_body,
                        std::string(what) + " field has wrong size");
  }
}

inline registry::UniqueId to_uid(const Bytes& f) {
  expect_size(f, 8, "unique id");
  registry::UniqueId uid{};
  std::copy(f.begin(), f.end(), uid.begin());
  return uid;
}

}  // namespace detail

/// ISSUE carries (name, age); the other commands carry a unique ID.
struct Request {
  Command command = Command::check;
  std::string name;
  unsigned age = 0;
  registry::UniqueId unique_id{};

  static Request issue(std::string name, unsigned age) {
    return {Command::issue, std::move(name), age, {}};
  }
  static Request with_id(Command c, const registry::UniqueId& uid) {
    return {c, {}, 0, uid};
  }

  friend bool operator==(const Request&, const Request&) = default;
};

inline Bytes encode_request(const Request& r) {
  if (r.command == Command::issue) {
    if (r.age > 0xFFFF) {
      throw ProtocolError(ProtocolError::Reason::malformed_body, "age too large");
    }
    return encode_fields({detail::text_field(r.name),
                          detail::u16_field(static_cast<std::uint16_t>(r.age))});
  }
  return encode_fields({Bytes(r.unique_id.begin(), r.unique_id.end())});
}

inline Request decode_request(Command command, std::span<const std::uint8_t> body) {
  const Fields f = decode_fields(body);
  Request r;
  r.command = command;
  if (command == Command::issue) {
    if (f.size() != 2) {
      throw ProtocolError(ProtocolError::Reason::malformed_body,
                          "ISSUE expects 2 fields");
    }
    r.name.assign(f[0].begin(), f[0].end());
    detail::expect_size(f[1], 2, "age");
    r.age = load_be16(f[1].data());
  } else {
    if (f.size() != 1) {
      throw ProtocolError(ProtocolError::Reason::malformed_body,
                          "command expects 1 field");
    }
    r.unique_id = detail::to_uid(f[0]);
  }
  return r;
}

struct Response {
  StatusCode status = StatusCode::ok;
  std::optional<registry::StatusReport> report;
  std::string message;

  bool ok() const { return status == StatusCode::ok; }

  friend bool operator==(const Response&, const Response&) = default;
};

/// ok:    status | serial u64 | uid[8] | name | age u16 | facilities u32 | state u8
/// error: status | message
inline Bytes encode_response(const Response& r) {
  Fields f{Bytes{static_cast<std::uint8_t>(r.status)}};
  if (r.ok()) {
    if (!r.report) {
      throw ProtocolError(ProtocolError::Reason::malformed_body,
                          "ok response without report");
    }
    const auto& rep = *r.report;
    f.push_back(detail::u64_field(rep.serial));
    f.emplace_back(rep.unique_id.begin(), rep.unique_id.end());
    f.push_back(detail::text_field(rep.name));
    f.push_back(detail::u16_field(static_cast<std::uint16_t>(rep.age)));
    f.push_back(detail::u32_field(rep.facilities));
    f.push_back(Bytes{static_cast<std::uint8_t>(
        rep.status == registry::Status::active ? 0 : 1)});
  } else {
    f.push_back(detail::text_field(r.message));
  }
  return encode_fields(f);
}

inline Response decode_response(std::span<const std::uint8_t> body) {
  using R = ProtocolError::Reason;
  const Fields f = decode_fields(body);
  if (f.empty()) throw ProtocolError(R::malformed_body, "empty response");
  detail::expect_size(f[0], 1, "status");
  Response r;
  r.status = static_cast<StatusCode>(f[0][0]);
  if (r.ok()) {
    if (f.size() != 7) throw ProtocolError(R::malformed_body, "ok response expects 7 fields");
    registry::StatusReport rep;
    detail::expect_size(f[1], 8, "serial");
    rep.serial = load_be64(f[1].data());
    rep.unique_id = detail::to_uid(f[2]);
    rep.name.assign(f[3].begin(), f[3].end());
    detail::expect_size(f[4], 2, "age");
    rep.age = load_be16(f[4].data());
    detail::expect_size(f[5], 4, "facilities");
    rep.facilities = load_be32(f[5].data());
    detail::expect_size(f[6], 1, "state");
    if (f[6][0] > 1) throw ProtocolError(R::malformed_body, "bad record state");
    rep.status = f[6][0] == 0 ? registry::Status::active : registry::Status::revoked;
    r.report = std::move(rep);
  } else {
    if (f.size() != 2) throw ProtocolError(R::malformed_body, "error response expects 2 fields");
    r.message.assign(f[1].begin(), f[1].end());
  }
  return r;
}

inline Response error_response(StatusCode code, std::string message) {
  return {code, std::nullopt, std::move(message)};
}

/// Applies one decoded request to the registry.
inline Response apply(registry::RegistryStore& store, const Request& req) {
  try {
    switch (req.command) {
      case Command::issue:
        return {StatusCode::ok,
                registry::make_report(store.issue_card(req.name, req.age)), {}};
      case Command::grant:
        return {StatusCode::ok,
                registry::make_report(store.set_voter_flag(req.unique_id)), {}};
      case Command::check:
        return {StatusCode::ok, store.check_overall_status(req.unique_id), {}};
      case Command::revoke:
        return {StatusCode::ok, registry::make_report(store.revoke(req.unique_id)),
                {}};
    }
  } catch (const registry::RegistryError& e) {
    return error_response(static_cast<StatusCode>(e.code()), e.what());
  }
  return error_response(StatusCode::bad_command, "unknown command");
}

/// Server-side handling of one received frame: open, decode, dispatch.
/// Every failure after the header becomes an error response.
inline Response handle_frame(registry::RegistryStore& store,
                             const idea::Key128& key, const Frame& frame) {
  if (!is_command(frame.command)) {
    return error_response(StatusCode::bad_command,
                          "unknown command " + std::to_string(frame.command));
  }
  Bytes body;
  try {
    body = open_frame(key, frame);
  } catch (const ProtocolError& e) {
    return error_response(StatusCode::checksum_mismatch, e.what());
  }
  Request req;
  try {
    req = decode_request(static_cast<Command>(frame.command), body);
  } catch (const ProtocolError& e) {
    return error_response(StatusCode::malformed_body, e.what());
  }
  return apply(store, req);
}

}  // namespace mecard::protocol
