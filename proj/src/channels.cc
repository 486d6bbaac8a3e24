/*
 * Copyright 2026 The fedicu Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

#include "fedicu/errors.h"
#include "fedicu/transport.h"

namespace fedicu::transport {

namespace {

// Shared state of one in-process connection. Side 0 is the server end.
struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> queue[2];  // queue[i]: frames for side i
  bool closed[2] = {false, false};
};

class InProcessConnection : public Connection {
 public:
  InProcessConnection(std::shared_ptr<Pipe> pipe, int side, std::string peer)
      : Connection(std::move(peer)), pipe_(std::move(pipe)), side_(side) {}

  ~InProcessConnection() override {
    std::lock_guard lock(pipe_->mu);
    pipe_->closed[side_] = true;
    pipe_->cv.notify_all();
  }

 protected:
  void SendFrame(std::vector<std::uint8_t> frame) override {
    std::lock_guard lock(pipe_->mu);
    if (pipe_->closed[1 - side_]) {
      throw TransportError("connection to " + peer() + " closed by peer");
    }
    pipe_->queue[1 - side_].push_back(std::move(frame));
    pipe_->cv.notify_all();
  }

  std::vector<std::uint8_t> RecvFrame() override {
    std::unique_lock lock(pipe_->mu);
    auto& inbox = pipe_->queue[side_];
    pipe_->cv.wait(lock,
                   [&] { return !inbox.empty() || pipe_->closed[1 - side_]; });
    if (inbox.empty()) {
      throw TransportError("connection to " + peer() + " closed by peer");
    }
    std::vector<std::uint8_t> frame = std::move(inbox.front());
    inbox.pop_front();
    return frame;
  }

 private:
  std::shared_ptr<Pipe> pipe_;
  int side_;
};

std::string ErrnoText() { return std::strerror(errno); }

class TcpConnection : public Connection {
 public:
  TcpConnection(int fd, std::string peer)
      : Connection(std::move(peer)), fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpConnection() override { ::close(fd_); }

 protected:
  void SendFrame(std::vector<std::uint8_t> frame) override {
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n =
          ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError("send to " + peer() + " failed: " + ErrnoText());
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::vector<std::uint8_t> RecvFrame() override {
    std::vector<std::uint8_t> frame(kLengthPrefixBytes);
    ReadExactly(frame.data(), kLengthPrefixBytes, /*at_boundary=*/true);
    const std::size_t total = *FrameLength(frame);
    frame.resize(total);
    ReadExactly(frame.data() + kLengthPrefixBytes, total - kLengthPrefixBytes,
                /*at_boundary=*/false);
    return frame;
  }

 private:
  void ReadExactly(std::uint8_t* dst, std::size_t len, bool at_boundary) {
    std::size_t got = 0;
    while (got < len) {
      const ssize_t n = ::recv(fd_, dst + got, len - got, 0);
      if (n == 0) {
        throw TransportError(
            (at_boundary && got == 0 ? "connection to " + peer() + " closed by peer"
                                     : "connection to " + peer() +
                                           " closed mid-frame"));
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError("recv from " + peer() + " failed: " + ErrnoText());
      }
      got += static_cast<std::size_t>(n);
    }
  }

  int fd_;
};

std::string DescribePeer(const sockaddr_storage& addr) {
  char host[NI_MAXHOST], serv[NI_MAXSERV];
  if (::getnameinfo(reinterpret_cast<const sockaddr*>(&addr), sizeof(addr),
                    host, sizeof(host), serv, sizeof(serv),
                    NI_NUMERICHOST | NI_NUMERICSERV) != 0) {
    return "unknown-peer";
  }
  return std::string(host) + ":" + serv;
}

struct AddrInfoDeleter {
  void operator()(addrinfo* p) const { ::freeaddrinfo(p); }
};
using AddrInfoPtr = std::unique_ptr<addrinfo, AddrInfoDeleter>;

AddrInfoPtr Resolve(const HostPort& addr, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string port = std::to_string(addr.port);
  const int rc = ::getaddrinfo(addr.host.empty() ? nullptr : addr.host.c_str(),
                               port.c_str(), &hints, &result);
  if (rc != 0) {
    throw TransportError("cannot resolve " + addr.host + ":" + port + ": " +
                         ::gai_strerror(rc));
  }
  return AddrInfoPtr(result);
}

}  // namespace

std::unique_ptr<Connection> InProcessListener::Connect(std::string worker_name) {
  auto pipe = std::make_shared<Pipe>();
  auto server_end =
      std::make_unique<InProcessConnection>(pipe, 0, worker_name);
  auto worker_end = std::make_unique<InProcessConnection>(pipe, 1, "server");
  {
    std::lock_guard lock(mu_);
    pending_.push_back(std::move(server_end));
  }
  cv_.notify_all();
  return worker_end;
}

std::unique_ptr<Connection> InProcessListener::Accept(
    std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !pending_.empty(); })) {
    throw TransportError("timed out waiting for an in-process worker");
  }
  std::unique_ptr<Connection> conn = std::move(pending_.front());
  pending_.pop_front();
  return conn;
}

HostPort ParseHostPort(std::string_view text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw UsageError("expected HOST:PORT, got '" + std::string(text) + "'");
  }
  HostPort out;
  out.host = std::string(text.substr(0, colon));
  if (out.host.size() >= 2 && out.host.front() == '[' && out.host.back() == ']') {
    out.host = out.host.substr(1, out.host.size() - 2);
  }
  const std::string_view port = text.substr(colon + 1);
  unsigned value = 0;
  const auto r = std::from_chars(port.data(), port.data() + port.size(), value);
  if (r.ec != std::errc() || r.ptr != port.data() + port.size() ||
      value > 65535) {
    throw UsageError("invalid port '" + std::string(port) + "'");
  }
  out.port = static_cast<std::uint16_t>(value);
  return out;
}

TcpListener::TcpListener(const HostPort& addr) {
  AddrInfoPtr info = Resolve(addr, /*passive=*/true);
  std::string last_error = "no usable address";
  for (addrinfo* ai = info.get(); ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_error = ErrnoText();
      continue;
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      fd_ = fd;
      break;
    }
    last_error = ErrnoText();
    ::close(fd);
  }
  if (fd_ < 0) {
    throw TransportError("cannot listen on " + addr.host + ":" +
                         std::to_string(addr.port) + ": " + last_error);
  }
  sockaddr_storage bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  if (bound.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port);
  }
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Connection> TcpListener::Accept(
    std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  int rc;
  do {
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  } while (rc < 0 && errno == EINTR);
  if (rc == 0) throw TransportError("timed out waiting for a worker to connect");
  if (rc < 0) throw TransportError("poll failed: " + ErrnoText());

  sockaddr_storage peer{};
  socklen_t len = sizeof(peer);
  const int fd = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer), &len);
  if (fd < 0) throw TransportError("accept failed: " + ErrnoText());
  return std::make_unique<TcpConnection>(fd, DescribePeer(peer));
}

std::unique_ptr<Connection> TcpConnect(const HostPort& addr,
                                       std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  const std::string name = addr.host + ":" + std::to_string(addr.port);
  while (true) {
    AddrInfoPtr info = Resolve(addr, /*passive=*/false);
    std::string last_error = "no usable address";
    for (addrinfo* ai = info.get(); ai != nullptr; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) {
        last_error = ErrnoText();
        continue;
      }
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        return std::make_unique<TcpConnection>(fd, name);
      }
      last_error = ErrnoText();
      ::close(fd);
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TransportError("cannot connect to " + name + ": " + last_error);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace fedicu::transport
