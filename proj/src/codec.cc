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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>

#include "fedicu/errors.h"
#include "fedicu/transport.h"

namespace fedicu::transport {

namespace {

class Writer {
 public:
  explicit Writer(std::size_t payload_size) {
    out_.reserve(kLengthPrefixBytes + payload_size);
    U32(static_cast<std::uint32_t>(payload_size));
  }

  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) { Le(v, 4); }
  void U64(std::uint64_t v) { Le(v, 8); }
  void F64(double v) {
    if (!std::isfinite(v)) {
      throw ValidationError("cannot encode a non-finite value");
    }
    U64(std::bit_cast<std::uint64_t>(v));
  }
  void Params(const std::vector<double>& params) {
    if (params.size() > UINT32_MAX) {
      throw ValidationError("parameter sequence too long");
    }
    U32(static_cast<std::uint32_t>(params.size()));
    for (double v : params) F64(v);
  }

  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  void Le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back((v >> (8 * i)) & 0xFF);
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> payload) : in_(payload) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(Le(1)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Le(4)); }
  std::uint64_t U64() { return Le(8); }
  double F64() {
    const double v = std::bit_cast<double>(Le(8));
    if (!std::isfinite(v)) {
      throw ValidationError("non-finite value in message");
    }
    return v;
  }
  std::vector<double> Params() {
    const std::uint32_t count = U32();
    if (static_cast<std::uint64_t>(count) * 8 > in_.size() - pos_) {
      throw FramingError("parameter count " + std::to_string(count) +
                         " exceeds the remaining payload");
    }
    std::vector<double> params(count);
    for (double& v : params) v = F64();
    return params;
  }

  void ExpectEnd() const {
    if (pos_ != in_.size()) {
      throw FramingError(std::to_string(in_.size() - pos_) +
                         " unexpected trailing payload bytes");
    }
  }

 private:
  std::uint64_t Le(int bytes) {
    if (in_.size() - pos_ < static_cast<std::size_t>(bytes)) {
      throw FramingError("payload truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += bytes;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::uint32_t ReadLength(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(bytes[0]) |
         static_cast<std::uint32_t>(bytes[1]) << 8 |
         static_cast<std::uint32_t>(bytes[2]) << 16 |
         static_cast<std::uint32_t>(bytes[3]) << 24;
}

}  // namespace

Tag TagOf(const Message& msg) {
  return static_cast<Tag>(msg.index() + 1);
}

std::string_view MessageName(const Message& msg) {
  static constexpr std::string_view kNames[] = {
      "Register",    "BroadcastModel", "LocalUpdate",
      "EvalRequest", "EvalResult",     "Shutdown"};
  return kNames[msg.index()];
}

std::size_t FixedPayloadBytes(Tag tag) {
  switch (tag) {
    case Tag::kRegister:
      return 1 + 4 + 8 + 8;
    case Tag::kBroadcastModel:
      return 1 + 4 + 4;
    case Tag::kLocalUpdate:
      return 1 + 4 + 4 + 8 + 4;
    case Tag::kEvalRequest:
      return 1 + 4 + 4;
    case Tag::kEvalResult:
      return 1 + 4 + 4 + 8 + 8;
    case Tag::kShutdown:
      return 1;
  }
  throw ProtocolError("unknown message tag");
}

std::size_t ParamCount(const Message& msg) {
  return std::visit(
      Overloaded{[](const BroadcastModel& m) { return m.params.size(); },
                 [](const LocalUpdate& m) { return m.params.size(); },
                 [](const EvalRequest& m) { return m.params.size(); },
                 [](const auto&) { return std::size_t{0}; }},
      msg);
}

std::vector<std::uint8_t> Encode(const Message& msg) {
  const Tag tag = TagOf(msg);
  Writer w(FixedPayloadBytes(tag) + 8 * ParamCount(msg));
  w.U8(static_cast<std::uint8_t>(tag));
  std::visit(Overloaded{
                 [&](const Register& m) {
                   w.U32(m.hospital_id);
                   w.U64(m.n_train);
                   w.U64(m.n_test);
                 },
                 [&](const BroadcastModel& m) {
                   w.U32(m.round);
                   w.Params(m.params);
                 },
                 [&](const LocalUpdate& m) {
                   w.U32(m.hospital_id);
                   w.U32(m.round);
                   w.U64(m.n_samples);
                   w.Params(m.params);
                 },
                 [&](const EvalRequest& m) {
                   w.U32(m.round);
                   w.Params(m.params);
                 },
                 [&](const EvalResult& m) {
                   w.U32(m.hospital_id);
                   w.U32(m.round);
                   w.F64(m.value);
                   w.U64(m.n_test);
                 },
                 [](const Shutdown&) {},
             },
             msg);
  return w.Take();
}

std::optional<std::size_t> FrameLength(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kLengthPrefixBytes) return std::nullopt;
  const std::uint32_t payload = ReadLength(bytes);
  if (payload > kMaxPayloadBytes) {
    throw FramingError("frame declares " + std::to_string(payload) +
                       " payload bytes, above the limit");
  }
  return kLengthPrefixBytes + payload;
}

Message Decode(std::span<const std::uint8_t> frame) {
  const std::optional<std::size_t> length = FrameLength(frame);
  if (!length) {
    throw FramingError("frame shorter than its length prefix");
  }
  if (frame.size() < *length) {
    throw FramingError("frame declares " +
                       std::to_string(*length - kLengthPrefixBytes) +
                       " payload bytes but only " +
                       std::to_string(frame.size() - kLengthPrefixBytes) +
                       " are present");
  }
  if (frame.size() > *length) {
    throw FramingError("trailing bytes after frame");
  }
  if (*length == kLengthPrefixBytes) throw FramingError("empty payload");

  Reader r(frame.subspan(kLengthPrefixBytes));
  const std::uint8_t tag = r.U8();
  Message msg;
  switch (static_cast<Tag>(tag)) {
    case Tag::kRegister: {
      Register m;
      m.hospital_id = r.U32();
      m.n_train = r.U64();
      m.n_test = r.U64();
      msg = m;
      break;
    }
    case Tag::kBroadcastModel: {
      BroadcastModel m;
      m.round = r.U32();
      m.params = r.Params();
      msg = std::move(m);
      break;
    }
    case Tag::kLocalUpdate: {
      LocalUpdate m;
      m.hospital_id = r.U32();
      m.round = r.U32();
      m.n_samples = r.U64();
      m.params = r.Params();
      msg = std::move(m);
      break;
    }
    case Tag::kEvalRequest: {
      EvalRequest m;
      m.round = r.U32();
      m.params = r.Params();
      msg = std::move(m);
      break;
    }
    case Tag::kEvalResult: {
      EvalResult m;
      m.hospital_id = r.U32();
      m.round = r.U32();
      m.value = r.F64();
      m.n_test = r.U64();
      msg = m;
      break;
    }
    case Tag::kShutdown:
      msg = Shutdown{};
      break;
    default: {
      char hex[8];
      std::snprintf(hex, sizeof(hex), "0x%02X", tag);
      throw ProtocolError(std::string("unknown message tag ") + hex);
    }
  }
  r.ExpectEnd();
  return msg;
}

std::optional<Message> TryDecode(std::vector<std::uint8_t>& buffer) {
  const std::optional<std::size_t> length = FrameLength(buffer);
  if (!length || buffer.size() < *length) return std::nullopt;
  Message msg = Decode(std::span(buffer).first(*length));
  buffer.erase(buffer.begin(), buffer.begin() + *length);
  return msg;
}

void Connection::Send(const Message& msg) {
  std::vector<std::uint8_t> frame = Encode(msg);
  const std::size_t n = frame.size();
  SendFrame(std::move(frame));
  bytes_sent_ += n;
}

Message Connection::Recv() {
  if (shutdown_received_) {
    throw SessionClosed("session with " + peer_ + " has been shut down");
  }
  const std::vector<std::uint8_t> frame = RecvFrame();
  bytes_received_ += frame.size();
  Message msg = Decode(frame);
  if (std::holds_alternative<Shutdown>(msg)) shutdown_received_ = true;
  return msg;
}

}  // namespace fedicu::transport
