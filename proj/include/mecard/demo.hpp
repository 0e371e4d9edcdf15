#pragma once

// Interactive card session: enter a citizen, grant the voting right, then
// encrypt and decrypt one 8-byte message entered as decimal bytes.

#include <array>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

#include "mecard/common.hpp"
#include "mecard/idea.hpp"
#include "mecard/registry.hpp"

namespace mecard::demo {

struct DemoResult {
  std::array<std::uint8_t, idea::kBlockBytes> original{};
  std::array<std::uint8_t, idea::kBlockBytes> encrypted{};
  std::array<std::uint8_t, idea::kBlockBytes> decrypted{};
  registry::StatusReport card;
};

namespace detail {

inline std::string read_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("input ended before the demo finished");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

/// Re-prompts until the line is an integer in [lo, hi].
inline unsigned read_number(std::istream& in, std::ostream& out,
                            const std::string& prompt, unsigned lo, unsigned hi) {
  while (true) {
    out << prompt << std::flush;
    const std::string line = read_line(in);
    std::size_t used = 0;
    unsigned long v = 0;
    bool ok = false;
    try {
      v = std::stoul(line, &used);
      ok = used == line.size() && line.find('-') == std::string::npos;
    } catch (const std::exception&) {
    }
    if (ok && v >= lo && v <= hi) return static_cast<unsigned>(v);
    out << "invalid input, enter a number between " << lo << " and " << hi << "\n";
  }
}

inline void print_row(std::ostream& out, const char* label,
                      const std::array<std::uint8_t, idea::kBlockBytes>& bytes) {
  out << label;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i > 0) out << "  ";
    if (i + 1 < bytes.size()) out << std::left << std::setw(4);
    out << static_cast<unsigned>(bytes[i]);
  }
  out << std::right << "\n";
}

}  // namespace detail

inline DemoResult run(std::istream& in, std::ostream& out, const idea::Key128& key) {
  registry::RegistryStore store(key);

  out << "Enter all the necessary fields one by one ---\n";
  std::string name;
  while (true) {
    out << "Enter name : " << std::flush;
    name = detail::read_line(in);
    try {
      registry::validate_name(name);
      break;
    } catch (const registry::RegistryError& e) {
      out << e.what() << "\n";
    }
  }
  const unsigned age = detail::read_number(in, out, "Enter age : ", 0, registry::kMaxAge);
  const registry::CitizenRecord card = store.issue_card(name, age);
  store.set_voter_flag(card.unique_id);
  out << "Voting right granted.\n";

  DemoResult result;
  out << "Enter message:\n";
  for (std::size_t i = 0; i < result.original.size(); ++i) {
    result.original[i] = static_cast<std::uint8_t>(detail::read_number(
        in, out,
        "enter the decimal equivalent of 8 bits (0-255) no " +
            std::to_string(i + 1) + " : ",
        0, 255));
  }

  const idea::EncryptionKeys enc = idea::expand_key(key);
  const idea::DecryptionKeys dec = idea::invert_key(enc);
  const idea::Block64 c = idea::encrypt_block(idea::Block64::from_bytes(result.original), enc);
  result.encrypted = c.to_bytes();
  result.decrypted = idea::decrypt_block(c, dec).to_bytes();
  if (result.decrypted != result.original) {
    throw CryptoError("decryption did not restore the original message");
  }

  out << "\n";
  detail::print_row(out, "orig message is ", result.original);
  out << "\n";
  detail::print_row(out, "enc. message is ", result.encrypted);
  out << "\n";
  detail::print_row(out, "dec. message is ", result.decrypted);
  out << "\n";

  result.card = store.check_overall_status(card.unique_id);
  out << "Name : " << result.card.name << "\n";
  out << "Age : " << result.card.age << "\n";
  return result;
}

}  // namespace mecard::demo
