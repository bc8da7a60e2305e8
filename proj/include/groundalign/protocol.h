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
#ifndef GROUNDALIGN_PROTOCOL_H_
#define GROUNDALIGN_PROTOCOL_H_

// Detector wire protocol, version 1. One JSON object per line.
//
//   -> {"v":1,"id":7,"op":"detect","model":"m0",
//       "requests":[{"image":"a.jpg","expression":"bus","category_id":4}]}
//   <- {"v":1,"id":7,"ok":true,"groups":[[{"bbox":[x,y,w,h],"score":0.9}]]}
//   -> {"v":1,"id":8,"op":"finetune","model":"m0","dataset":"d.json",
//       "config":{"focal":1.0,"l1":5.0,"giou":2.0,"epochs":1,...}}
//   <- {"v":1,"id":8,"ok":true,"model":"m1"}
//   <- {"v":1,"id":8,"ok":false,"error":{"kind":"...","message":"..."}}
//   <- {"v":1,"id":8,"heartbeat":true,"message":"epoch 1/3"}
//
// Boxes on the wire are COCO [x,y,w,h]; conversion to corner form happens
// in DetectorClient.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "groundalign/geometry.h"
#include "json.hpp"

namespace groundalign {

inline constexpr int kProtocolVersion = 1;

// One predicted box, as seen by the rest of the toolkit.
struct Detection {
  int64_t image_id = 0;
  BBox bbox;
  double score = 0.0;
  std::string expression;
  std::optional<int64_t> category_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Loss weights and schedule forwarded to the detector's trainer. Unknown
// keys ride along in `extra`.
struct FinetuneConfig {
  double focal_loss_weight = 1.0;
  double box_l1_weight = 5.0;
  double giou_weight = 2.0;
  int epochs = 1;
  nlohmann::json extra = nlohmann::json::object();

  // Throws std::invalid_argument on negative weights, non-positive epochs or
  // `extra` keys that shadow the named fields.
  void Validate() const;

  friend bool operator==(const FinetuneConfig&, const FinetuneConfig&) = default;
};

struct ModelHandle {
  std::string id;
  std::optional<std::string> parent;
  std::string created_from;

  friend bool operator==(const ModelHandle&, const ModelHandle&) = default;
};

// Registry of model handles seen during a run. Every non-root handle names a
// registered parent and ids are never reused, so the lineage is a forest.
class ModelLineage {
 public:
  // Registers a root handle; re-registering an existing root is a no-op.
  const ModelHandle& AddRoot(const std::string& id,
                             const std::string& created_from);
  // Throws ProtocolError("lineage", ...) if the id exists or the parent is
  // unknown.
  const ModelHandle& AddChild(const ModelHandle& child);

  const ModelHandle* Find(const std::string& id) const;
  // True when `ancestor` is reachable from `descendant` via parent links.
  // A handle is not its own descendant.
  bool IsDescendant(const std::string& descendant,
                    const std::string& ancestor) const;
  size_t size() const { return handles_.size(); }
  nlohmann::json ToJson() const;

 private:
  std::map<std::string, ModelHandle> handles_;
};

// ---- wire messages ----

struct DetectQuery {
  std::string image;
  std::string expression;
  int64_t category_id = 0;

  friend bool operator==(const DetectQuery&, const DetectQuery&) = default;
};

struct DetectRequest {
  int64_t id = 0;
  std::string model;
  std::vector<DetectQuery> requests;

  friend bool operator==(const DetectRequest&, const DetectRequest&) = default;
};

struct FinetuneRequest {
  int64_t id = 0;
  std::string model;
  std::string dataset;
  FinetuneConfig config;

  friend bool operator==(const FinetuneRequest&, const FinetuneRequest&) = default;
};

using Request = std::variant<DetectRequest, FinetuneRequest>;

struct WireDetection {
  std::array<double, 4> bbox{};  // x, y, w, h
  double score = 0.0;

  friend bool operator==(const WireDetection&, const WireDetection&) = default;
};

struct DetectResponse {
  int64_t id = 0;
  std::vector<std::vector<WireDetection>> groups;

  friend bool operator==(const DetectResponse&, const DetectResponse&) = default;
};

struct FinetuneResponse {
  int64_t id = 0;
  std::string model;

  friend bool operator==(const FinetuneResponse&, const FinetuneResponse&) = default;
};

struct ErrorResponse {
  std::optional<int64_t> id;  // absent when the request id was unreadable
  std::string kind;
  std::string message;

  friend bool operator==(const ErrorResponse&, const ErrorResponse&) = default;
};

// Progress notice during long operations; carries no result.
struct Heartbeat {
  int64_t id = 0;
  std::string message;

  friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

using Response =
    std::variant<DetectResponse, FinetuneResponse, ErrorResponse, Heartbeat>;

// Serialization never emits a newline inside a message. Parsing throws
// ProtocolError with kind "parse", "version", "schema" or "unknown_op".
std::string SerializeRequest(const Request& request);
Request ParseRequest(std::string_view line);
std::string SerializeResponse(const Response& response);
Response ParseResponse(std::string_view line);

nlohmann::json FinetuneConfigToJson(const FinetuneConfig& config);
FinetuneConfig FinetuneConfigFromJson(const nlohmann::json& j);

int64_t RequestId(const Request& request);

}  // namespace groundalign

#endif  // GROUNDALIGN_PROTOCOL_H_
