/* Copyright 2026 The groundalign Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef GROUNDALIGN_ERRORS_H_
#define GROUNDALIGN_ERRORS_H_

#include <stdexcept>
#include <string>
#include <utility>

namespace groundalign {

// Process exit statuses used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kAdapter = 3,
  kDataIntegrity = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
  virtual ExitCode exit_code() const { return ExitCode::kFailure; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kConfig; }
};

// Malformed input documents (JSON syntax or schema).
class ParseError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kDataIntegrity; }
};

// Dangling cross references and similar dataset consistency failures.
class IntegrityError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kDataIntegrity; }
};

class PreconditionError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kConfig; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kDataIntegrity; }
};

// A peer violated the detector wire protocol, or answered with ok=false.
// `kind` is the wire-level error kind ("parse", "version", "unknown_model",
// "invalid_response", ...).
class ProtocolError : public Error {
 public:
  ProtocolError(std::string kind, const std::string& message)
      : Error(kind + ": " + message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }
  ExitCode exit_code() const override { return ExitCode::kAdapter; }

 private:
  std::string kind_;
};

// The adapter could not be reached or the stream broke.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts, bool retryable)
      : Error(message), attempts_(attempts), retryable_(retryable) {}
  int attempts() const { return attempts_; }
  bool retryable() const { return retryable_; }
  ExitCode exit_code() const override { return ExitCode::kAdapter; }

 private:
  int attempts_;
  bool retryable_;
};

// Adds context to an error raised deeper down while keeping its exit code.
class ContextError : public Error {
 public:
  ContextError(const std::string& message, ExitCode code)
      : Error(message), code_(code) {}
  ExitCode exit_code() const override { return code_; }

 private:
  ExitCode code_;
};

}  // namespace groundalign

#endif  // GROUNDALIGN_ERRORS_H_
