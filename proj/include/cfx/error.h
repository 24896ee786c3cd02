// Copyright 2026 The cfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFX_ERROR_H_
#define CFX_ERROR_H_

#include <stdexcept>
#include <string>

namespace cfx {

// Root of every exception thrown by the toolkit. `kind()` is a short stable
// tag used in the CLI's single-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Malformed or inconsistent input data (datasets, record files, tables).
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

// Bad configuration file or bad provider/template settings.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
};

// Endpoint could not be reached, or kept failing after all retries.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message)
      : Error("transport", message) {}
};

// Missing or rejected credentials.
class AuthError : public Error {
 public:
  explicit AuthError(const std::string& message) : Error("auth", message) {}
};

// Endpoint answered, but with something that violates the wire contract.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error("protocol", message) {}
};

// Violated precondition of a pure computation (empty input, bad lengths).
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

}  // namespace cfx

#endif  // CFX_ERROR_H_
