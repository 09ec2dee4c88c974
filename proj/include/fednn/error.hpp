// Copyright 2026 The FedNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fednn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement between inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

enum class FormatErrc {
  kBadMagic,
  kTruncated,
  kVersionMismatch,
  kCorrupt,
};

// Raised while decoding one of the binary file or wire formats.
class FormatError : public Error {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : Error(what), code_(code) {}

  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

// Authenticated decryption failed (wrong key or tampered ciphertext).
class AuthenticationError : public Error {
 public:
  using Error::Error;
};

// The federated protocol could not complete.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fednn
