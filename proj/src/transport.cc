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
#include "groundalign/transport.h"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "groundalign/errors.h"
#include "httplib.h"
#include "json.hpp"

namespace groundalign {

SubprocessTransport::SubprocessTransport(const std::string& command)
    : command_(command) {
  // A dead child must surface as a TransportError, not kill us.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0) {
    throw TransportError("pipe: " + std::string(std::strerror(errno)), 1, false);
  }
  pid_ = ::fork();
  if (pid_ < 0) {
    throw TransportError("fork: " + std::string(std::strerror(errno)), 1, false);
  }
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

void SubprocessTransport::Send(const std::string& line) {
  std::string data = line + "\n";
  size_t written = 0;
  while (written < data.size()) {
    ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("write to '" + command_ + "': " + std::strerror(errno),
                           1, false);
    }
    written += static_cast<size_t>(n);
  }
}

std::string SubprocessTransport::Receive() {
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (line.empty()) continue;
      return line;
    }
    char chunk[65536];
    ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("read from '" + command_ + "': " + std::strerror(errno),
                           1, false);
    }
    if (n == 0) {
      throw TransportError("detector process '" + command_ + "' closed its output",
                           1, false);
    }
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

HttpTransport::HttpTransport(std::string base_url, int retries)
    : base_url_(std::move(base_url)), retries_(retries) {}

HttpTransport::~HttpTransport() = default;

void HttpTransport::Send(const std::string& line) {
  std::string path = "/detect";
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.value("op", "") == "finetune") path = "/finetune";
  } catch (const nlohmann::json::exception&) {
    // Let the server report the malformed message.
  }
  httplib::Client client(base_url_);
  client.set_read_timeout(3600, 0);
  int attempts = 0;
  for (;;) {
    ++attempts;
    auto result = client.Post(path, line, "application/json");
    if (result) {
      std::string body = result->body;
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) {
        body.pop_back();
      }
      replies_.push_back(std::move(body));
      return;
    }
    if (attempts > retries_) {
      throw TransportError("POST " + base_url_ + path + " failed: " +
                               httplib::to_string(result.error()),
                           attempts, true);
    }
  }
}

std::string HttpTransport::Receive() {
  if (replies_.empty()) {
    throw TransportError("no reply pending on " + base_url_, 0, false);
  }
  std::string line = std::move(replies_.front());
  replies_.pop_front();
  return line;
}

void LoopbackTransport::Send(const std::string& line) {
  replies_.push_back(handler_(line));
}

std::string LoopbackTransport::Receive() {
  if (replies_.empty()) throw TransportError("no reply pending", 0, false);
  std::string line = std::move(replies_.front());
  replies_.pop_front();
  return line;
}

}  // namespace groundalign
