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
#ifndef GROUNDALIGN_TRANSPORT_H_
#define GROUNDALIGN_TRANSPORT_H_

#include <deque>
#include <functional>
#include <memory>
#include <string>

namespace groundalign {

// An ordered duplex stream of protocol lines. Not thread-safe; the
// DetectorClient is the single owner.
class Transport {
 public:
  virtual ~Transport() = default;
  // `line` holds one message without the trailing newline.
  virtual void Send(const std::string& line) = 0;
  // Blocks for the next message. Throws TransportError when the peer is gone.
  virtual std::string Receive() = 0;
};

// Runs `command` through /bin/sh and talks over its stdin/stdout.
class SubprocessTransport : public Transport {
 public:
  explicit SubprocessTransport(const std::string& command);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  void Send(const std::string& line) override;
  std::string Receive() override;

 private:
  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// HTTP binding: detect messages go to POST /detect, finetune to
// POST /finetune; each reply body is one response message.
class HttpTransport : public Transport {
 public:
  // `base_url` like "http://127.0.0.1:8080". Connection failures are retried
  // `retries` times before a TransportError is raised.
  explicit HttpTransport(std::string base_url, int retries = 2);
  ~HttpTransport() override;

  void Send(const std::string& line) override;
  std::string Receive() override;

 private:
  std::string base_url_;
  int retries_;
  std::deque<std::string> replies_;
};

// In-process peer; `handler` maps one request line to one response line.
class LoopbackTransport : public Transport {
 public:
  explicit LoopbackTransport(std::function<std::string(const std::string&)> handler)
      : handler_(std::move(handler)) {}

  void Send(const std::string& line) override;
  std::string Receive() override;

 private:
  std::function<std::string(const std::string&)> handler_;
  std::deque<std::string> replies_;
};

}  // namespace groundalign

#endif  // GROUNDALIGN_TRANSPORT_H_
