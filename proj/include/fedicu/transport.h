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

// Server <-> hospital message vocabulary, its binary wire format, and two
// interchangeable transports: in-process channels and TCP.
//
// Wire format. Every frame is
//
//   u32 payload_length | payload
//
// and every payload is a one-byte tag followed by the message fields in
// declaration order. Integers are little-endian; parameter sequences are a
// u32 count followed by IEEE-754 binary64 values, little-endian.
//
//   0x01 Register        u32 hospital_id, u64 n_train, u64 n_test
//   0x02 BroadcastModel  u32 round, params
//   0x03 LocalUpdate     u32 hospital_id, u32 round, u64 n_samples, params
//   0x04 EvalRequest     u32 round, params
//   0x05 EvalResult      u32 hospital_id, u32 round, f64 value, u64 n_test
//   0x06 Shutdown        (no fields)
//
// The only variable-length field of any message is a parameter sequence;
// there is no way to put feature rows or labels on the wire.

#ifndef FEDICU_TRANSPORT_H_
#define FEDICU_TRANSPORT_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fedicu::transport {

struct Register {
  std::uint32_t hospital_id = 0;
  std::uint64_t n_train = 0;
  std::uint64_t n_test = 0;
  friend bool operator==(const Register&, const Register&) = default;
};

struct BroadcastModel {
  std::uint32_t round = 0;
  std::vector<double> params;
  friend bool operator==(const BroadcastModel&, const BroadcastModel&) = default;
};

struct LocalUpdate {
  std::uint32_t hospital_id = 0;
  std::uint32_t round = 0;
  std::uint64_t n_samples = 0;
  std::vector<double> params;
  friend bool operator==(const LocalUpdate&, const LocalUpdate&) = default;
};

struct EvalRequest {
  std::uint32_t round = 0;
  std::vector<double> params;
  friend bool operator==(const EvalRequest&, const EvalRequest&) = default;
};

struct EvalResult {
  std::uint32_t hospital_id = 0;
  std::uint32_t round = 0;
  double value = 0.0;
  std::uint64_t n_test = 0;
  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct Shutdown {
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

using Message = std::variant<Register, BroadcastModel, LocalUpdate,
                             EvalRequest, EvalResult, Shutdown>;

enum class Tag : std::uint8_t {
  kRegister = 0x01,
  kBroadcastModel = 0x02,
  kLocalUpdate = 0x03,
  kEvalRequest = 0x04,
  kEvalResult = 0x05,
  kShutdown = 0x06,
};

Tag TagOf(const Message& msg);
std::string_view MessageName(const Message& msg);

inline constexpr std::size_t kLengthPrefixBytes = 4;
// Frames above this size are rejected before allocation.
inline constexpr std::uint32_t kMaxPayloadBytes = 256u << 20;

// Payload bytes of everything except the parameter values.
std::size_t FixedPayloadBytes(Tag tag);

// Number of f64 parameter values carried (0 for scalar-only messages).
std::size_t ParamCount(const Message& msg);

// Throws ValidationError on non-finite parameters.
std::vector<std::uint8_t> Encode(const Message& msg);

// Total frame length once the header is available, nullopt before. Throws
// FramingError for a declared length above kMaxPayloadBytes.
std::optional<std::size_t> FrameLength(std::span<const std::uint8_t> bytes);

// Decodes exactly one complete frame. Throws FramingError on truncation or
// trailing bytes, ProtocolError on an unknown tag, ValidationError on
// non-finite parameters.
Message Decode(std::span<const std::uint8_t> frame);

// Decodes a frame from the front of a stream buffer. Returns nullopt and
// leaves the buffer untouched when the frame is still incomplete.
std::optional<Message> TryDecode(std::vector<std::uint8_t>& buffer);

// One end of an ordered, reliable connection. Endpoints are not shared
// between threads but may be handed from one thread to another.
class Connection {
 public:
  virtual ~Connection() = default;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void Send(const Message& msg);
  // Throws SessionClosed once a Shutdown has been received, TransportError
  // if the peer goes away.
  Message Recv();

  const std::string& peer() const { return peer_; }
  std::uint64_t bytes_sent() const { return bytes_sent_; }
  std::uint64_t bytes_received() const { return bytes_received_; }

 protected:
  explicit Connection(std::string peer) : peer_(std::move(peer)) {}
  virtual void SendFrame(std::vector<std::uint8_t> frame) = 0;
  // Returns one complete frame including the length prefix.
  virtual std::vector<std::uint8_t> RecvFrame() = 0;

 private:
  std::string peer_;
  std::uint64_t bytes_sent_ = 0;
  std::uint64_t bytes_received_ = 0;
  bool shutdown_received_ = false;
};

class Listener {
 public:
  virtual ~Listener() = default;
  // Throws TransportError on timeout.
  virtual std::unique_ptr<Connection> Accept(
      std::chrono::milliseconds timeout) = 0;
};

// In-process transport. Frames are encoded exactly as on TCP and passed
// through locked queues.
class InProcessListener : public Listener {
 public:
  // Creates a connected pair; returns the worker end and queues the server
  // end for Accept().
  std::unique_ptr<Connection> Connect(std::string worker_name);
  std::unique_ptr<Connection> Accept(std::chrono::milliseconds timeout) override;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<Connection>> pending_;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

// Parses "HOST:PORT". Throws UsageError.
HostPort ParseHostPort(std::string_view text);

class TcpListener : public Listener {
 public:
  // Port 0 binds an ephemeral port; see port().
  explicit TcpListener(const HostPort& addr);
  ~TcpListener() override;
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Connection> Accept(std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Retries refused connections until `timeout` has passed.
std::unique_ptr<Connection> TcpConnect(
    const HostPort& addr,
    std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

}  // namespace fedicu::transport

#endif  // FEDICU_TRANSPORT_H_
