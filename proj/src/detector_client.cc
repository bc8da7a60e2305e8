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
#include "groundalign/detector_client.h"

#include <algorithm>
#include <cmath>
#include <deque>

#include "groundalign/errors.h"
#include "groundalign/mock_detector.h"

namespace groundalign {
namespace {

[[noreturn]] void ThrowAdapterError(const ErrorResponse& e) {
  throw ProtocolError(e.kind, e.message);
}

Detection ToDetection(const WireDetection& w, const DetectionQuery& q) {
  const auto& [x, y, width, height] = w.bbox;
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(width) ||
      !std::isfinite(height) || width < 0 || height < 0) {
    throw ProtocolError("invalid_response",
                        "adapter returned an invalid bbox for " + q.image_ref);
  }
  if (!std::isfinite(w.score) || w.score < 0.0 || w.score > 1.0) {
    throw ProtocolError("invalid_response",
                        "adapter returned score outside [0,1] for " + q.image_ref);
  }
  return Detection{q.image_id, BBox::FromXywh(x, y, width, height), w.score,
                   q.expression, q.category_id};
}

}  // namespace

DetectorClient::DetectorClient(std::unique_ptr<Transport> transport,
                               ClientOptions options)
    : transport_(std::move(transport)), options_(options) {
  if (options_.batch_size == 0) options_.batch_size = 1;
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
}

ModelHandle DetectorClient::RootModel(const std::string& id,
                                      const std::string& created_from) {
  std::lock_guard<std::mutex> lock(mu_);
  return lineage_.AddRoot(id, created_from);
}

Response DetectorClient::AwaitReply(int64_t id) {
  if (auto it = stash_.find(id); it != stash_.end()) {
    Response r = std::move(it->second);
    stash_.erase(it);
    return r;
  }
  for (;;) {
    Response r = ParseResponse(transport_->Receive());
    if (std::holds_alternative<Heartbeat>(r)) continue;
    std::optional<int64_t> rid;
    std::visit([&rid](const auto& v) { rid = v.id; }, r);
    if (!rid) {
      // Only an error can lack an id; the peer could not read our message.
      ThrowAdapterError(std::get<ErrorResponse>(r));
    }
    if (*rid == id) return r;
    stash_.emplace(*rid, std::move(r));
  }
}

std::vector<std::vector<Detection>> DetectorClient::Detect(
    const ModelHandle& model, std::span<const DetectionQuery> queries) {
  for (const auto& q : queries) {
    if (q.expression.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw PreconditionError("detect expression must be non-blank");
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::vector<Detection>> groups(queries.size());

  struct Pending {
    int64_t id;
    size_t begin;
    size_t end;
  };
  std::deque<Pending> in_flight;

  auto collect = [&](const Pending& p) {
    Response r = AwaitReply(p.id);
    if (auto* e = std::get_if<ErrorResponse>(&r)) ThrowAdapterError(*e);
    auto* d = std::get_if<DetectResponse>(&r);
    if (!d) {
      throw ProtocolError("invalid_response", "expected a detect reply");
    }
    if (d->groups.size() != p.end - p.begin) {
      throw ProtocolError("invalid_response",
                          "detect reply has " + std::to_string(d->groups.size()) +
                              " groups for " + std::to_string(p.end - p.begin) +
                              " requests");
    }
    for (size_t i = p.begin; i < p.end; ++i) {
      auto& out = groups[i];
      for (const auto& w : d->groups[i - p.begin]) {
        out.push_back(ToDetection(w, queries[i]));
      }
      std::stable_sort(out.begin(), out.end(),
                       [](const Detection& a, const Detection& b) {
                         return a.score > b.score;
                       });
    }
  };

  for (size_t begin = 0; begin < queries.size(); begin += options_.batch_size) {
    const size_t end = std::min(queries.size(), begin + options_.batch_size);
    DetectRequest request{next_id_++, model.id, {}};
    for (size_t i = begin; i < end; ++i) {
      request.requests.push_back(
          {queries[i].image_ref, queries[i].expression, queries[i].category_id});
    }
    transport_->Send(SerializeRequest(request));
    in_flight.push_back({request.id, begin, end});
    if (in_flight.size() >= options_.max_in_flight) {
      collect(in_flight.front());
      in_flight.pop_front();
    }
  }
  while (!in_flight.empty()) {
    collect(in_flight.front());
    in_flight.pop_front();
  }
  return groups;
}

ModelHandle DetectorClient::Finetune(const ModelHandle& model,
                                     const std::filesystem::path& dataset,
                                     const FinetuneConfig& config) {
  if (!std::filesystem::exists(dataset)) {
    throw PreconditionError("finetune dataset not found: " + dataset.string());
  }
  try {
    config.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::lock_guard<std::mutex> lock(mu_);
  FinetuneRequest request{next_id_++, model.id, dataset.string(), config};
  transport_->Send(SerializeRequest(request));
  Response r = AwaitReply(request.id);
  if (auto* e = std::get_if<ErrorResponse>(&r)) ThrowAdapterError(*e);
  auto* f = std::get_if<FinetuneResponse>(&r);
  if (!f) throw ProtocolError("invalid_response", "expected a finetune reply");
  if (!lineage_.Find(model.id)) lineage_.AddRoot(model.id, model.created_from);
  ++finetune_calls_;
  return lineage_.AddChild(ModelHandle{f->model, model.id, dataset.string()});
}

std::unique_ptr<DetectorClient> ConnectDetector(const std::string& spec,
                                                ClientOptions options) {
  constexpr std::string_view kSubprocess = "subprocess:";
  constexpr std::string_view kMock = "mock:";
  if (spec.starts_with(kSubprocess)) {
    return std::make_unique<DetectorClient>(
        std::make_unique<SubprocessTransport>(spec.substr(kSubprocess.size())),
        options);
  }
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    return std::make_unique<DetectorClient>(std::make_unique<HttpTransport>(spec),
                                            options);
  }
  if (spec.starts_with(kMock)) {
    auto mock = std::make_shared<MockDetector>(
        MockScript::Load(std::string(spec.substr(kMock.size()))));
    return std::make_unique<DetectorClient>(
        std::make_unique<LoopbackTransport>(
            [mock](const std::string& line) { return mock->HandleLine(line); }),
        options);
  }
  throw ConfigError("unrecognized detector spec '" + spec +
                    "' (expected subprocess:<cmd>, http://host:port or "
                    "mock:<script>)");
}

}  // namespace groundalign
