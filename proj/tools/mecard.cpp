// mecard: command-line front end for the mecard library.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <thread>

#include <CLI11.hpp>

#include "mecard/config.hpp"
#include "mecard/demo.hpp"
#include "mecard/ga_keygen.hpp"
#include "mecard/idea_cfb.hpp"
#include "mecard/net.hpp"
#include "mecard/protocol.hpp"
#include "mecard/registry.hpp"

namespace {

using namespace mecard;

constexpr int kExitUnexpected = 1;

// Flags shared by every command that needs key material or GA settings.
// Explicit flags override values from --config.
struct KeyFlags {
  std::string config_path;
  std::optional<std::string> key_hex;
  std::optional<std::string> password;
  std::optional<std::uint64_t> lcg_a, lcg_c, lcg_m, seed;
  std::optional<std::size_t> size;
  std::optional<unsigned> width, generations;
  std::optional<std::string> locus;
  bool selection = false;

  config::Config load() const {
    config::Config cfg = config_path.empty() ? config::Config{} : config::load(config_path);
    if (lcg_a) cfg.lcg.a = *lcg_a;
    if (lcg_c) cfg.lcg.c = *lcg_c;
    if (lcg_m) cfg.lcg.m = *lcg_m;
    if (seed) cfg.lcg.seed = *seed;
    if (size) cfg.evolve.population = *size;
    if (width) cfg.evolve.width = *width;
    if (generations) cfg.evolve.generations = *generations;
    if (locus) cfg.evolve.locus = config::parse_locus(*locus);
    if (selection) cfg.evolve.selection = true;
    return cfg;
  }

  std::optional<std::string> effective_password(const config::Config& cfg) const {
    return password ? password : cfg.password;
  }

  config::KeySources sources() const {
    const config::Config cfg = load();
    config::KeySources s;
    s.key_hex = key_hex;
    s.config_key = cfg.key;
    s.password = effective_password(cfg);
    s.env_key_hex = config::env_registry_key();
    s.lcg = cfg.lcg;
    s.evolve = cfg.evolve;
    return s;
  }

  bool any_key_source() const {
    const config::KeySources s = sources();
    return s.key_hex || s.config_key || s.password || (s.env_key_hex && !s.env_key_hex->empty());
  }

  idea::Key128 key() const { return config::resolve_key(sources()); }
};

void add_ga_flags(CLI::App* app, KeyFlags& f) {
  app->add_option("--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--password", f.password, "password for session-key derivation (>= 8 chars)");
  app->add_option("--lcg-a", f.lcg_a, "LCG multiplier");
  app->add_option("--lcg-c", f.lcg_c, "LCG increment");
  app->add_option("--lcg-m", f.lcg_m, "LCG modulus");
  app->add_option("--seed", f.seed, "LCG seed");
  app->add_option("--size", f.size, "population size N");
  app->add_option("--width", f.width, "chromosome width W in bits (1..128)");
  app->add_option("--generations", f.generations, "number of generations G");
  app->add_option("--locus", f.locus, "crossover/mutation locus, or 'lcg'");
  app->add_flag("--selection", f.selection, "keep the fittest N of parents and children");
}

void add_key_flags(CLI::App* app, KeyFlags& f) {
  app->add_option("--key", f.key_hex, "128-bit key as 32 hex chars");
  add_ga_flags(app, f);
}

std::string store_path(const KeyFlags& f, const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (auto s = f.load().store) return *s;
  throw UsageError("no store: pass --store or set store= in the config file");
}

net::Endpoint endpoint(const KeyFlags& f, const std::optional<std::string>& flag) {
  if (flag) return net::Endpoint::parse(*flag);
  if (auto e = f.load().endpoint) return net::Endpoint::parse(*e);
  throw UsageError("no endpoint: pass --endpoint or set endpoint= in the config file");
}

// --- keygen ----------------------------------------------------------------

struct KeygenFlags {
  KeyFlags k;
  std::optional<std::string> coded_array;
  std::optional<std::string> population;
};

int cmd_keygen(const KeygenFlags& f) {
  const config::Config cfg = f.k.load();
  const auto password = f.k.effective_password(cfg);
  if (!password) throw UsageError("keygen needs --password or password= in the config file");

  if (f.coded_array && f.population) {
    throw UsageError("--coded-array and --population are mutually exclusive");
  }
  idea::Key128 key;
  if (f.coded_array) {
    ga::CodedArray coded;
    for (unsigned v : config::parse_list<unsigned>(*f.coded_array, "--coded-array")) {
      if (v > 255) throw UsageError("--coded-array values must be 0..255");
      coded.push_back(static_cast<std::uint8_t>(v));
    }
    key = ga::key_from_coded(*password, coded);
  } else if (f.population) {
    ga::Population pop;
    for (auto v : config::parse_list<std::uint64_t>(*f.population, "--population")) {
      pop.chromosomes.emplace_back(v, cfg.evolve.width);
    }
    ga::EvolveOptions opt = cfg.evolve;
    opt.population = pop.chromosomes.size();
    ga::Lcg rng(cfg.lcg);
    key = ga::key_from_coded(*password, ga::coded_array(ga::evolve(std::move(pop), rng, opt)));
  } else {
    key = ga::generate_session_key(*password, cfg.lcg, cfg.evolve);
  }
  std::cout << key.hex() << "\n";
  return 0;
}

// --- encrypt / decrypt -----------------------------------------------------

struct CipherFlags {
  KeyFlags k;
  std::optional<std::string> block;
  std::string in = "-";
  std::string out = "-";
  std::optional<std::string> iv;
};

Bytes read_input(const std::string& path) {
  if (path == "-") {
    return Bytes(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_output(const std::string& path, std::span<const std::uint8_t> data) {
  if (path == "-") {
    std::cout.write(reinterpret_cast<const char*>(data.data()),
                    static_cast<std::streamsize>(data.size()));
    std::cout.flush();
    if (!std::cout) throw Error(ErrorKind::usage, "cannot write to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw UsageError("cannot write " + path);
}

idea::Block64 parse_block(const std::string& hex) {
  if (hex.size() != 2 * idea::kBlockBytes) throw UsageError("--block must be 16 hex chars");
  const Bytes b = from_hex(hex);
  return idea::Block64::from_bytes(std::span<const std::uint8_t, 8>(b.data(), 8));
}

idea::Iv parse_iv(const std::string& hex) {
  if (hex.size() != 2 * idea::kBlockBytes) throw UsageError("--iv must be 16 hex chars");
  const Bytes b = from_hex(hex);
  idea::Iv iv{};
  std::copy(b.begin(), b.end(), iv.begin());
  return iv;
}

int cmd_encrypt(const CipherFlags& f) {
  const idea::Key128 key = f.k.key();
  if (f.block) {
    const auto c = idea::encrypt_block(parse_block(*f.block), idea::expand_key(key));
    std::cout << to_hex(c.to_bytes()) << "\n";
    return 0;
  }
  const idea::Iv iv = f.iv ? parse_iv(*f.iv) : net::IvSource(key).next();
  const Bytes plain = read_input(f.in);
  idea::CfbContext cfb(key, iv);
  Bytes out(iv.begin(), iv.end());
  const Bytes c = cfb.encrypt(plain);
  out.insert(out.end(), c.begin(), c.end());
  write_output(f.out, out);
  return 0;
}

int cmd_decrypt(const CipherFlags& f) {
  const idea::Key128 key = f.k.key();
  if (f.block) {
    const auto p = idea::decrypt_block(parse_block(*f.block),
                                       idea::invert_key(idea::expand_key(key)));
    std::cout << to_hex(p.to_bytes()) << "\n";
    return 0;
  }
  if (f.iv) throw UsageError("--iv is read from the input when decrypting");
  const Bytes in = read_input(f.in);
  if (in.size() < idea::kBlockBytes) {
    throw CryptoError("input is shorter than the 8-byte IV");
  }
  idea::Iv iv{};
  std::copy_n(in.begin(), iv.size(), iv.begin());
  idea::CfbContext cfb(key, iv);
  write_output(f.out, cfb.decrypt(std::span(in).subspan(idea::kBlockBytes)));
  return 0;
}

// --- card / send -----------------------------------------------------------

struct RecordFlags {
  KeyFlags k;
  std::string action;
  std::optional<std::string> store;
  std::optional<std::string> endpoint;
  std::string name;
  unsigned age = 0;
  std::string id;
};

registry::UniqueId parse_id(const std::string& hex) {
  if (hex.size() != 16) throw UsageError("--id must be 16 hex chars");
  const Bytes b = from_hex(hex);
  registry::UniqueId uid{};
  std::copy(b.begin(), b.end(), uid.begin());
  return uid;
}

void print_report(const registry::StatusReport& r) {
  std::cout << "serial: " << r.serial << "\n"
            << "unique id: " << to_hex(r.unique_id) << "\n"
            << "name: " << r.name << "\n"
            << "age: " << r.age << "\n";
  char facilities[9];
  std::snprintf(facilities, sizeof facilities, "%08x", r.facilities);
  std::cout << "facilities: " << facilities
            << ((r.facilities & registry::kVotingRight) ? " (voting right)" : "") << "\n"
            << "status: " << registry::to_string(r.status) << "\n";
}

protocol::Request make_request(const RecordFlags& f) {
  if (f.action == "issue") return protocol::Request::issue(f.name, f.age);
  const auto cmd = f.action == "grant"   ? protocol::Command::grant
                   : f.action == "check" ? protocol::Command::check
                                         : protocol::Command::revoke;
  return protocol::Request::with_id(cmd, parse_id(f.id));
}

int cmd_card(const RecordFlags& f) {
  const idea::Key128 key = f.k.key();
  const protocol::Request req = make_request(f);
  registry::RegistryStore store = registry::RegistryStore::open(key, store_path(f.k, f.store));
  registry::CitizenRecord r;
  switch (req.command) {
    case protocol::Command::issue: r = store.issue_card(req.name, req.age); break;
    case protocol::Command::grant: r = store.set_voter_flag(req.unique_id); break;
    case protocol::Command::check:
      print_report(store.check_overall_status(req.unique_id));
      return 0;
    case protocol::Command::revoke: r = store.revoke(req.unique_id); break;
  }
  print_report(registry::make_report(r));
  return 0;
}

int cmd_send(const RecordFlags& f) {
  const idea::Key128 key = f.k.key();
  const protocol::Response resp = net::request(endpoint(f.k, f.endpoint), key, make_request(f));
  if (resp.ok()) {
    print_report(*resp.report);
    return 0;
  }
  std::cerr << "mecard: server: " << resp.message << "\n";
  const auto code = static_cast<unsigned>(resp.status);
  return code <= static_cast<unsigned>(protocol::StatusCode::corrupt_store)
             ? static_cast<int>(ErrorKind::registry)
             : static_cast<int>(ErrorKind::transport);
}

// --- serve -----------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct ServeFlags {
  KeyFlags k;
  std::optional<std::string> store;
  std::optional<std::string> endpoint;
};

int cmd_serve(const ServeFlags& f) {
  const idea::Key128 key = f.k.key();
  std::optional<std::string> path = f.store ? f.store : f.k.load().store;
  registry::RegistryStore store =
      path ? registry::RegistryStore::open(key, *path) : registry::RegistryStore(key);
  net::Server server(store, key);
  const net::Endpoint ep = endpoint(f.k, f.endpoint);
  server.bind(ep);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << net::Endpoint{ep.host, server.port()}.str() << std::endl;
  server.start();
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  std::cout << "served " << server.frames_handled() << " frames" << std::endl;
  return 0;
}

// --- demo ------------------------------------------------------------------

int cmd_demo(const KeyFlags& f) {
  idea::Key128 key;
  if (f.any_key_source()) {
    key = f.key();
  } else {
    std::random_device rd;
    for (auto& b : key.bytes) b = static_cast<std::uint8_t>(rd());
  }
  demo::run(std::cin, std::cout, key);
  return 0;
}

void add_record_flags(CLI::App* sub, RecordFlags& f, bool remote) {
  add_key_flags(sub, f.k);
  if (remote) {
    sub->add_option("--endpoint", f.endpoint, "server address host:port");
  } else {
    sub->add_option("--store", f.store, "record store file");
  }
  auto* issue = sub->add_subcommand("issue", "issue a new card");
  issue->add_option("--name", f.name, "citizen name")->required();
  issue->add_option("--age", f.age, "age in years (0..150)")->required();
  for (const char* action : {"grant", "check", "revoke"}) {
    const char* help = std::string_view(action) == "grant"   ? "grant the voting right"
                       : std::string_view(action) == "check" ? "show a card's status"
                                                             : "revoke a card";
    sub->add_subcommand(action, help)
        ->add_option("--id", f.id, "unique id as 16 hex chars")
        ->required();
  }
  sub->require_subcommand(1);
  sub->parse_complete_callback([sub, &f] { f.action = sub->get_subcommands().front()->get_name(); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IDEA encryption, GA session keys and the citizen card registry"};
  app.footer(std::string("Key sources: --key, --password (GA-derived), or key=/password= in "
                         "--config; exactly one may be given. If none is, the key is read "
                         "from ") +
             config::kRegistryKeyEnv +
             " (32 hex chars).\n\nExit codes: 0 ok, 1 unexpected failure, 2 usage error, "
             "3 crypto failure, 4 registry error, 5 transport error.");
  app.require_subcommand(1);

  KeygenFlags keygen;
  auto* keygen_cmd = app.add_subcommand("keygen", "derive a 128-bit session key from a password");
  add_ga_flags(keygen_cmd, keygen.k);
  keygen_cmd->add_option("--coded-array", keygen.coded_array,
                         "skip evolution and mix this coded array, e.g. 5,1,3,5,2,4,2,4");
  keygen_cmd->add_option("--population", keygen.population,
                         "initial chromosomes, e.g. 284,7000 (with --width)");

  CipherFlags enc, dec;
  auto* enc_cmd = app.add_subcommand("encrypt", "encrypt one block, or a stream in CFB mode");
  auto* dec_cmd = app.add_subcommand("decrypt", "decrypt one block, or a CFB stream");
  for (auto [cmd, flags] : {std::pair{enc_cmd, &enc}, std::pair{dec_cmd, &dec}}) {
    add_key_flags(cmd, flags->k);
    auto* block = cmd->add_option("--block", flags->block, "one block as 16 hex chars");
    cmd->add_option("--in", flags->in, "input file, '-' for stdin")->excludes(block);
    cmd->add_option("--out", flags->out, "output file, '-' for stdout")->excludes(block);
    cmd->add_option("--iv", flags->iv, "stream IV as 16 hex chars (default: random)")
        ->excludes(block);
  }

  RecordFlags card, send;
  add_record_flags(app.add_subcommand("card", "operate on a local record store"), card, false);
  add_record_flags(app.add_subcommand("send", "send one command to a server"), send, true);

  ServeFlags serve;
  auto* serve_cmd = app.add_subcommand("serve", "serve a record store over TCP");
  add_key_flags(serve_cmd, serve.k);
  serve_cmd->add_option("--store", serve.store, "record store file (default: in memory)");
  serve_cmd->add_option("--endpoint", serve.endpoint, "listen address host:port (port 0: any)");

  KeyFlags demo_flags;
  auto* demo_cmd = app.add_subcommand("demo", "interactive card and message session");
  add_key_flags(demo_cmd, demo_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*keygen_cmd) return cmd_keygen(keygen);
    if (*enc_cmd) return cmd_encrypt(enc);
    if (*dec_cmd) return cmd_decrypt(dec);
    if (app.got_subcommand("card")) return cmd_card(card);
    if (app.got_subcommand("send")) return cmd_send(send);
    if (*serve_cmd) return cmd_serve(serve);
    if (*demo_cmd) return cmd_demo(demo_flags);
  } catch (const Error& e) {
    std::cerr << "mecard: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "mecard: unexpected error: " << e.what() << "\n";
    return kExitUnexpected;
  }
  return kExitUnexpected;
}
