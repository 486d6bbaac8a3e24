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

#ifndef FEDICU_ERRORS_H_
#define FEDICU_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fedicu {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument shapes: vector lengths, matrix widths, empty inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A computation is undefined for the given input (e.g. AUROC on one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input files. `line` is 1-based, 0 if unknown.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Unknown message tags, unexpected message kinds, duplicate registrations.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Incomplete or oversized frames.
class FramingError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// Well-framed messages carrying invalid values (non-finite parameters).
class ValidationError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// Connection-level failures. The message names the peer.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Raised by Recv() once the session has been shut down.
class SessionClosed : public Error {
 public:
  using Error::Error;
};

// Bad command-line or config-file input.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedicu

#endif  // FEDICU_ERRORS_H_
