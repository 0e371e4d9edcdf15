#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mecard/registry.hpp"

namespace mecard::registry {
namespace {

namespace fs = std::filesystem;

const idea::Key128 kKey = idea::Key128::from_hex("2bd6459f82c5b300952c49104881ff48");

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mecard-test-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

TEST(Defaults, FreshRecord) {
  const CitizenRecord r = set_all_defaults({});
  EXPECT_TRUE(r.name.empty());
  EXPECT_EQ(r.age, 0u);
  EXPECT_EQ(r.facilities, 0u);
  EXPECT_EQ(r.status, Status::active);
  EXPECT_NO_THROW(validate_name(r.name));
  EXPECT_NO_THROW(validate_age(r.age));
}

TEST(Defaults, Idempotent) {
  CitizenRecord r;
  r.name = "x";
  r.age = 40;
  r.facilities = kVotingRight;
  r.status = Status::revoked;
  EXPECT_EQ(set_all_defaults(set_all_defaults(r)), set_all_defaults(r));
}

TEST(Issue, FirstSerialAndUniqueId) {
  RegistryStore store(kKey);
  const CitizenRecord r = store.issue_card("Abhishek Roy", 27);
  EXPECT_EQ(r.serial, 1u);
  EXPECT_EQ(store.serial_for(r.unique_id), 1u);
  const StatusReport rep = store.check_overall_status(r.unique_id);
  EXPECT_EQ(rep.name, "Abhishek Roy");
  EXPECT_EQ(rep.age, 27u);
  EXPECT_EQ(rep.facilities, 0u);
  EXPECT_EQ(rep.status, Status::active);
}

TEST(Issue, UniqueIdDecryptsToSerial) {
  RegistryStore store(kKey);
  const auto dec = idea::invert_key(idea::expand_key(kKey));
  for (int i = 0; i < 50; ++i) {
    const CitizenRecord r = store.issue_card("citizen " + std::to_string(i), 30);
    EXPECT_EQ(r.serial, static_cast<std::uint64_t>(i + 1));
    EXPECT_EQ(idea::decrypt_block(idea::Block64::from_bytes(r.unique_id), dec).to_u64(),
              r.serial);
  }
}

TEST(Issue, RejectsInvalidFields) {
  RegistryStore store(kKey);
  EXPECT_THROW(store.issue_card(std::string(65, 'a'), 20), RegistryError);
  EXPECT_THROW(store.issue_card("tab\tname", 20), RegistryError);
  EXPECT_THROW(store.issue_card("ok", 151), RegistryError);
  EXPECT_NO_THROW(store.issue_card(std::string(64, 'a'), 150));
  EXPECT_EQ(store.size(), 1u);
}

TEST(Grant, SetsVotingBitIdempotently) {
  RegistryStore store(kKey);
  const CitizenRecord r = store.issue_card("A", 20);
  const CitizenRecord g1 = store.set_voter_flag(r.unique_id);
  const CitizenRecord g2 = store.set_voter_flag(r.unique_id);
  EXPECT_TRUE(g1.has_voting_right());
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(store.check_overall_status(r.unique_id).facilities, kVotingRight);
}

TEST(Grant, RevokedRecordIsRefused) {
  RegistryStore store(kKey);
  const CitizenRecord r = store.issue_card("A", 20);
  store.revoke(r.unique_id);
  try {
    store.set_voter_flag(r.unique_id);
    FAIL() << "grant on revoked record succeeded";
  } catch (const RegistryError& e) {
    EXPECT_EQ(e.code(), RegistryError::Code::revoked);
  }
  EXPECT_EQ(store.check_overall_status(r.unique_id).facilities, 0u);
}

TEST(Check, ForgedIdsAreRejected) {
  RegistryStore store(kKey);
  for (int i = 0; i < 10; ++i) store.issue_card("n" + std::to_string(i), 10);
  std::mt19937_64 rng(41);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    UniqueId uid;
    for (auto& b : uid) b = static_cast<std::uint8_t>(rng());
    try {
      store.check_overall_status(uid);
      ++hits;
    } catch (const RegistryError& e) {
      EXPECT_EQ(e.code(), RegistryError::Code::unknown_id);
    }
  }
  EXPECT_EQ(hits, 0);
}

TEST(Revoke, ClearsFacilitiesAndRefusesTwice) {
  RegistryStore store(kKey);
  const CitizenRecord r = store.issue_card("A", 20);
  store.set_voter_flag(r.unique_id);
  const CitizenRecord rv = store.revoke(r.unique_id);
  EXPECT_EQ(rv.status, Status::revoked);
  EXPECT_EQ(rv.facilities, 0u);
  const StatusReport rep = store.check_overall_status(r.unique_id);
  EXPECT_EQ(rep.status, Status::revoked);
  EXPECT_EQ(rep.facilities, 0u);
  EXPECT_THROW(store.revoke(r.unique_id), RegistryError);
}

TEST(Revoke, LeavesOtherRecordsUntouched) {
  RegistryStore store(kKey);
  std::vector<CitizenRecord> issued;
  for (int i = 0; i < 8; ++i) {
    issued.push_back(store.issue_card("p" + std::to_string(i), 20 + i));
    if (i % 2 == 0) store.set_voter_flag(issued.back().unique_id);
  }
  const auto before = store.records();
  store.revoke(issued[3].unique_id);
  const auto after = store.records();
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (i == 3) {
      EXPECT_NE(before[i], after[i]);
    } else {
      EXPECT_EQ(before[i], after[i]);
    }
  }
}

TEST(Persistence, FileHasOneLinePerIssue) {
  TempDir dir;
  const fs::path file = dir.path() / "store.txt";
  RegistryStore store = RegistryStore::open(kKey, file);
  for (int k = 1; k <= 5; ++k) {
    store.issue_card("x", 1);
    EXPECT_EQ(count_lines(file), static_cast<std::size_t>(k));
  }
}

TEST(Persistence, LineFormat) {
  RegistryStore store(kKey);
  CitizenRecord r = store.issue_card("Ab", 27);
  store.set_voter_flag(r.unique_id);
  EXPECT_EQ(store.serialize(),
            "1,4162,27,00000001," + to_hex(r.unique_id) + ",active\n");
}

TEST(Persistence, SaveLoadIsBitExact) {
  TempDir dir;
  const fs::path file = dir.path() / "store.txt";
  std::string snapshot;
  {
    RegistryStore store = RegistryStore::open(kKey, file);
    const auto a = store.issue_card("Abhishek Roy", 27);
    const auto b = store.issue_card("Name, with comma", 80);
    store.issue_card("", 0);
    store.set_voter_flag(a.unique_id);
    store.revoke(b.unique_id);
    snapshot = store.serialize();
  }
  RegistryStore reopened = RegistryStore::open(kKey, file);
  EXPECT_EQ(reopened.serialize(), snapshot);
  std::ifstream in(file, std::ios::binary);
  std::stringstream raw;
  raw << in.rdbuf();
  EXPECT_EQ(raw.str(), snapshot);
  // Serial numbering continues after reload.
  EXPECT_EQ(reopened.issue_card("next", 1).serial, 4u);
}

TEST(Persistence, WrongKeyIsDetectedOnLoad) {
  TempDir dir;
  const fs::path file = dir.path() / "store.txt";
  {
    RegistryStore store = RegistryStore::open(kKey, file);
    store.issue_card("A", 1);
  }
  const auto other = idea::Key128::from_hex("00000000000000000000000000000001");
  EXPECT_THROW(RegistryStore::open(other, file), RegistryError);
}

TEST(Persistence, CorruptLinesAreRejected) {
  RegistryStore store(kKey);
  const std::string uid = to_hex(store.unique_id_for(1));
  const std::string good = "1,41,5,00000000," + uid + ",active\n";
  EXPECT_NO_THROW(store.load_from_string(good));
  for (const std::string& bad : std::vector<std::string>{
           "1,41,5,00000000," + uid + ",active",          // no newline
           "1,41,5,00000000," + uid + "\n",               // missing field
           "1,4,5,00000000," + uid + ",active\n",         // odd hex
           "1,41,151,00000000," + uid + ",active\n",      // age
           "1,41,5,0000000," + uid + ",active\n",         // facilities width
           "1,41,5,00000000," + uid + ",dead\n",          // status
           std::string("1,41,5,00000000,ABCDEF0123456789,active\n"),  // uppercase uid
           "2,41,5,00000000," + uid + ",active\n",        // uid for serial 1
           good + good,                                   // duplicate serial
       }) {
    EXPECT_THROW(store.load_from_string(bad), RegistryError) << bad;
  }
}

TEST(Persistence, FailedWriteRollsBack) {
  TempDir dir;
  const fs::path file = dir.path() / "missing-dir" / "store.txt";
  RegistryStore store(kKey, file);
  EXPECT_THROW(store.issue_card("A", 1), RegistryError);
  EXPECT_EQ(store.size(), 0u);
  fs::create_directories(file.parent_path());
  EXPECT_EQ(store.issue_card("A", 1).serial, 1u);
}

TEST(Invariants, RandomScriptNeverReactivates) {
  RegistryStore store(kKey);
  std::mt19937_64 rng(42);
  std::vector<UniqueId> ids;
  for (int step = 0; step < 2000; ++step) {
    const auto op = rng() % 4;
    if (op == 0 || ids.empty()) {
      ids.push_back(store.issue_card("c", static_cast<unsigned>(rng() % 151)).unique_id);
      continue;
    }
    const UniqueId& uid = ids[rng() % ids.size()];
    const bool was_revoked = store.check_overall_status(uid).status == Status::revoked;
    try {
      if (op == 1) store.set_voter_flag(uid);
      if (op == 2) store.revoke(uid);
    } catch (const RegistryError&) {
    }
    const StatusReport now = store.check_overall_status(uid);
    if (was_revoked) {
      ASSERT_EQ(now.status, Status::revoked);
      ASSERT_EQ(now.facilities, 0u);
    }
  }
}

}  // namespace
}  // namespace mecard::registry
