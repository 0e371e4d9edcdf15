#pragma once

// TCP transport for the framed protocol: a government-side server that owns
// the registry and a consumer-side client issuing one request per call.
// POSIX sockets; IPv4/IPv6 via getaddrinfo.

#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <list>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include "mecard/common.hpp"
#include "mecard/idea_cfb.hpp"
#include "mecard/protocol.hpp"
#include "mecard/registry.hpp"

namespace mecard::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"; the host may be a bracketed IPv6 literal.
  static Endpoint parse(std::string_view text) {
    const std::size_t colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
      throw UsageError("endpoint must be host:port, got '" + std::string(text) + "'");
    }
    std::string host(text.substr(0, colon));
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
      host = host.substr(1, host.size() - 2);
    }
    unsigned long port = 0;
    for (char c : text.substr(colon + 1)) {
      if (c < '0' || c > '9') throw UsageError("endpoint port is not a number");
      port = port * 10 + static_cast<unsigned long>(c - '0');
      if (port > 65535) throw UsageError("endpoint port out of range");
    }
    return {std::move(host), static_cast<std::uint16_t>(port)};
  }

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Owning socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void write_all(std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n =
          ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  /// Fills `out` completely. Returns false on clean EOF before the first
  /// byte; throws on EOF midway or on error.
  bool read_exact(std::span<std::uint8_t> out) {
    std::size_t got = 0;
    while (got < out.size()) {
      const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
      if (n == 0) {
        if (got == 0) return false;
        throw TransportError("connection closed mid-frame");
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("recv failed: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(n);
    }
    return true;
  }

 private:
  int fd_ = -1;
};

namespace detail {

struct AddrInfo {
  addrinfo* list = nullptr;
  ~AddrInfo() {
    if (list != nullptr) ::freeaddrinfo(list);
  }
};

inline AddrInfo resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  AddrInfo info;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(),
                               port.c_str(), &hints, &info.list);
  if (rc != 0) {
    throw TransportError("cannot resolve " + ep.str() + ": " + ::gai_strerror(rc));
  }
  return info;
}

}  // namespace detail

/// Reads one complete frame. Returns nullopt on clean EOF. Bad magic,
/// version or length throws ProtocolError.
inline std::optional<protocol::Frame> read_frame(Socket& s) {
  std::array<std::uint8_t, protocol::kHeaderBytes> header{};
  if (!s.read_exact(header)) return std::nullopt;
  const protocol::FrameHeader h = protocol::decode_header(header);
  protocol::Frame f;
  f.command = h.command;
  f.iv = h.iv;
  f.ciphertext.resize(h.length);
  if (h.length > 0 && !s.read_exact(f.ciphertext)) {
    throw TransportError("connection closed mid-frame");
  }
  return f;
}

inline void write_frame(Socket& s, const protocol::Frame& f) {
  s.write_all(protocol::encode_frame(f));
}

/// Fresh frame IVs from the IDEA byte generator, seeded from the OS.
class IvSource {
 public:
  explicit IvSource(const idea::Key128& key) : rand_(key, os_seed()) {}
  IvSource(const idea::Key128& key, const idea::Iv& seed) : rand_(key, seed) {}

  idea::Iv next() { return rand_.next_bytes<idea::kBlockBytes>(); }

 private:
  static idea::Iv os_seed() {
    std::random_device rd;
    idea::Iv seed{};
    for (std::size_t i = 0; i < seed.size(); i += 4) {
      store_be32(&seed[i], rd());
    }
    const auto t = static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count());
    for (std::size_t i = 0; i < seed.size(); ++i) {
      seed[i] ^= static_cast<std::uint8_t>(t >> (8 * i));
    }
    return seed;
  }

  idea::RandContext rand_;
};

/// Government side. Each connection gets its own thread; registry access is
/// serialized by one mutex.
class Server {
 public:
  Server(registry::RegistryStore& store, const idea::Key128& key)
      : store_(store), key_(key), ivs_(key) {}

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  /// Binds and listens. Port 0 picks an ephemeral port; see port().
  void bind(const Endpoint& ep) {
    detail::AddrInfo info = detail::resolve(ep, /*passive=*/true);
    std::string last_error = "no usable address";
    for (addrinfo* ai = info.list; ai != nullptr; ai = ai->ai_next) {
      Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
      if (!s.valid()) continue;
      const int one = 1;
      ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0 ||
          ::listen(s.fd(), 16) != 0) {
        last_error = std::strerror(errno);
        continue;
      }
      sockaddr_storage addr{};
      socklen_t len = sizeof addr;
      ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
      port_ = addr.ss_family == AF_INET6
                  ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                  : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
      listener_ = std::move(s);
      return;
    }
    throw TransportError("cannot listen on " + ep.str() + ": " + last_error);
  }

  std::uint16_t port() const { return port_; }

  /// Accept loop; returns after stop().
  void run() {
    while (!stopping_) {
      pollfd pfd{listener_.fd(), POLLIN, 0};
      const int rc = ::poll(&pfd, 1, 100);
      if (rc <= 0) continue;
      Socket conn(::accept(listener_.fd(), nullptr, nullptr));
      if (!conn.valid()) continue;
      std::lock_guard lock(conn_mutex_);
      connections_.emplace_back();
      Connection& c = connections_.back();
      c.socket = std::move(conn);
      c.worker = std::thread([this, &c] { serve_connection(c.socket); });
    }
  }

  void start() {
    accept_thread_ = std::thread([this] { run(); });
  }

  void stop() {
    stopping_ = true;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<Connection> done;
    {
      std::lock_guard lock(conn_mutex_);
      for (auto& c : connections_) c.socket.shutdown();
      done.splice(done.end(), connections_);
    }
    for (auto& c : done) {
      if (c.worker.joinable()) c.worker.join();
    }
    listener_.close();
  }

  std::size_t frames_handled() const { return frames_handled_; }

 private:
  struct Connection {
    Socket socket;
    std::thread worker;
  };

  void serve_connection(Socket& s) {
    try {
      while (!stopping_) {
        std::optional<protocol::Frame> frame = read_frame(s);
        if (!frame) break;
        protocol::Response resp;
        idea::Iv iv;
        {
          std::lock_guard lock(store_mutex_);
          resp = protocol::handle_frame(store_, key_, *frame);
          iv = ivs_.next();
        }
        ++frames_handled_;
        write_frame(s, protocol::seal_frame(key_, frame->command, iv,
                                            protocol::encode_response(resp)));
      }
    } catch (const Error&) {
      // Bad magic/version or a broken connection: drop the connection.
    }
    s.shutdown();
  }

  registry::RegistryStore& store_;
  idea::Key128 key_;
  IvSource ivs_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> frames_handled_{0};
  std::mutex store_mutex_;
  std::mutex conn_mutex_;
  std::list<Connection> connections_;
  std::thread accept_thread_;
};

/// Consumer side: one connection, synchronous request/response.
class Client {
 public:
  Client(const Endpoint& ep, const idea::Key128& key) : key_(key), ivs_(key) {
    detail::AddrInfo info = detail::resolve(ep, /*passive=*/false);
    std::string last_error = "no usable address";
    for (addrinfo* ai = info.list; ai != nullptr; ai = ai->ai_next) {
      Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
      if (!s.valid()) continue;
      if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
        socket_ = std::move(s);
        return;
      }
      last_error = std::strerror(errno);
    }
    throw TransportError("cannot connect to " + ep.str() + ": " + last_error);
  }

  protocol::Response request(const protocol::Request& req) {
    const protocol::Frame out =
        protocol::seal_frame(key_, static_cast<std::uint8_t>(req.command),
                             ivs_.next(), protocol::encode_request(req));
    write_frame(socket_, out);
    std::optional<protocol::Frame> in = read_frame(socket_);
    if (!in) throw TransportError("server closed the connection");
    if (in->command != out.command) {
      throw protocol::ProtocolError(protocol::ProtocolError::Reason::bad_command,
                                    "response command does not echo request");
    }
    return protocol::decode_response(protocol::open_frame(key_, *in));
  }

  /// Sends raw bytes and reads one response frame (test hook for corrupted
  /// frames). Returns nullopt if the server closed the connection.
  std::optional<protocol::Frame> exchange_raw(std::span<const std::uint8_t> bytes) {
    socket_.write_all(bytes);
    return read_frame(socket_);
  }

 private:
  idea::Key128 key_;
  IvSource ivs_;
  Socket socket_;
};

/// One-shot request over a fresh connection.
inline protocol::Response request(const Endpoint& ep, const idea::Key128& key,
                                  const protocol::Request& req) {
  Client client(ep, key);
  return client.request(req);
}

}  // namespace mecard::net
