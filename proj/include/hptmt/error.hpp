// Copyright 2026 The hptmt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hptmt {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (type mismatch, unknown
/// column, out-of-range index, schema mismatch).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  kBadMagic,
  kTruncated,
  kBadOffsets,
  kBadTypeTag,
  kBadLayout,
  kTrailingBytes,
};

const char* to_string(ParseErrorKind kind);

/// Malformed wire-format input.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// Peer disconnect, connect timeout, bind failure, or an aborted world.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Using a communicator after finalize.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Ranks entered a collective with inconsistent parameters. Raised on every
/// rank of the world.
class CollectiveMismatch : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (spill files, CSV I/O).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate values in numeric kernels.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hptmt
