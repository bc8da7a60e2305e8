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
#include "groundalign/protocol.h"

#include <cmath>
#include <stdexcept>

#include "groundalign/errors.h"

namespace groundalign {
namespace {

using nlohmann::json;

constexpr const char* kReservedConfigKeys[] = {"focal", "l1", "giou", "epochs"};

[[noreturn]] void SchemaError(const std::string& message) {
  throw ProtocolError("schema", message);
}

const json& Require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) SchemaError(std::string("missing '") + key + "'");
  return *it;
}

int64_t RequireInt(const json& obj, const char* key) {
  const json& v = Require(obj, key);
  if (!v.is_number_integer()) SchemaError(std::string("'") + key + "' must be an integer");
  return v.get<int64_t>();
}

double RequireNumber(const json& obj, const char* key) {
  const json& v = Require(obj, key);
  if (!v.is_number()) SchemaError(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::string RequireString(const json& obj, const char* key) {
  const json& v = Require(obj, key);
  if (!v.is_string()) SchemaError(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

json ParseEnvelope(std::string_view line) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ProtocolError("parse", e.what());
  }
  if (!j.is_object()) throw ProtocolError("parse", "message must be a JSON object");
  auto v = j.find("v");
  if (v == j.end() || !v->is_number_integer()) {
    throw ProtocolError("version", "missing protocol version");
  }
  if (v->get<int64_t>() != kProtocolVersion) {
    throw ProtocolError("version",
                        "unsupported protocol version " + v->dump());
  }
  return j;
}

void RequireFinite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

void FinetuneConfig::Validate() const {
  if (focal_loss_weight < 0 || box_l1_weight < 0 || giou_weight < 0) {
    throw std::invalid_argument("finetune loss weights must be non-negative");
  }
  RequireFinite(focal_loss_weight, "focal loss weight");
  RequireFinite(box_l1_weight, "box L1 weight");
  RequireFinite(giou_weight, "GIoU weight");
  if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (!extra.is_object()) throw std::invalid_argument("extra must be an object");
  for (const char* key : kReservedConfigKeys) {
    if (extra.contains(key)) {
      throw std::invalid_argument(std::string("extra key '") + key +
                                  "' shadows a named field");
    }
  }
}

json FinetuneConfigToJson(const FinetuneConfig& config) {
  config.Validate();
  json j = config.extra;
  j["focal"] = config.focal_loss_weight;
  j["l1"] = config.box_l1_weight;
  j["giou"] = config.giou_weight;
  j["epochs"] = config.epochs;
  return j;
}

FinetuneConfig FinetuneConfigFromJson(const json& j) {
  if (!j.is_object()) SchemaError("'config' must be an object");
  FinetuneConfig config;
  config.focal_loss_weight = RequireNumber(j, "focal");
  config.box_l1_weight = RequireNumber(j, "l1");
  config.giou_weight = RequireNumber(j, "giou");
  const int64_t epochs = RequireInt(j, "epochs");
  if (epochs <= 0 || epochs > INT32_MAX) SchemaError("'epochs' out of range");
  config.epochs = static_cast<int>(epochs);
  config.extra = j;
  for (const char* key : kReservedConfigKeys) config.extra.erase(key);
  try {
    config.Validate();
  } catch (const std::invalid_argument& e) {
    SchemaError(e.what());
  }
  return config;
}

const ModelHandle& ModelLineage::AddRoot(const std::string& id,
                                         const std::string& created_from) {
  auto it = handles_.find(id);
  if (it != handles_.end()) return it->second;
  return handles_.emplace(id, ModelHandle{id, std::nullopt, created_from})
      .first->second;
}

const ModelHandle& ModelLineage::AddChild(const ModelHandle& child) {
  if (!child.parent) {
    throw ProtocolError("lineage", "model " + child.id + " has no parent");
  }
  if (handles_.count(child.id)) {
    throw ProtocolError("lineage", "model id " + child.id + " already exists");
  }
  if (!handles_.count(*child.parent)) {
    throw ProtocolError("lineage", "unknown parent model " + *child.parent);
  }
  return handles_.emplace(child.id, child).first->second;
}

const ModelHandle* ModelLineage::Find(const std::string& id) const {
  auto it = handles_.find(id);
  return it == handles_.end() ? nullptr : &it->second;
}

bool ModelLineage::IsDescendant(const std::string& descendant,
                                const std::string& ancestor) const {
  const ModelHandle* h = Find(descendant);
  // Ids are never reused, so the walk terminates within size() steps.
  for (size_t steps = 0; h && h->parent && steps <= handles_.size(); ++steps) {
    if (*h->parent == ancestor) return true;
    h = Find(*h->parent);
  }
  return false;
}

json ModelLineage::ToJson() const {
  json out = json::array();
  for (const auto& [id, h] : handles_) {
    out.push_back({{"id", id},
                   {"parent", h.parent ? json(*h.parent) : json(nullptr)},
                   {"created_from", h.created_from}});
  }
  return out;
}

int64_t RequestId(const Request& request) {
  return std::visit([](const auto& r) { return r.id; }, request);
}

std::string SerializeRequest(const Request& request) {
  json j;
  if (const auto* d = std::get_if<DetectRequest>(&request)) {
    json queries = json::array();
    for (const auto& q : d->requests) {
      queries.push_back({{"image", q.image},
                         {"expression", q.expression},
                         {"category_id", q.category_id}});
    }
    j = {{"v", kProtocolVersion},
         {"id", d->id},
         {"op", "detect"},
         {"model", d->model},
         {"requests", std::move(queries)}};
  } else {
    const auto& f = std::get<FinetuneRequest>(request);
    j = {{"v", kProtocolVersion},
         {"id", f.id},
         {"op", "finetune"},
         {"model", f.model},
         {"dataset", f.dataset},
         {"config", FinetuneConfigToJson(f.config)}};
  }
  return j.dump();
}

Request ParseRequest(std::string_view line) {
  const json j = ParseEnvelope(line);
  const int64_t id = RequireInt(j, "id");
  const std::string op = RequireString(j, "op");
  if (op == "detect") {
    DetectRequest r{id, RequireString(j, "model"), {}};
    const json& queries = Require(j, "requests");
    if (!queries.is_array()) SchemaError("'requests' must be an array");
    for (const json& q : queries) {
      if (!q.is_object()) SchemaError("request entries must be objects");
      r.requests.push_back({RequireString(q, "image"),
                            RequireString(q, "expression"),
                            RequireInt(q, "category_id")});
    }
    return r;
  }
  if (op == "finetune") {
    return FinetuneRequest{id, RequireString(j, "model"),
                           RequireString(j, "dataset"),
                           FinetuneConfigFromJson(Require(j, "config"))};
  }
  throw ProtocolError("unknown_op", "unknown op '" + op + "'");
}

std::string SerializeResponse(const Response& response) {
  json j = {{"v", kProtocolVersion}};
  std::visit(
      [&j](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, DetectResponse>) {
          j["id"] = r.id;
          j["ok"] = true;
          json groups = json::array();
          for (const auto& group : r.groups) {
            json g = json::array();
            for (const auto& d : group) {
              g.push_back({{"bbox", d.bbox}, {"score", d.score}});
            }
            groups.push_back(std::move(g));
          }
          j["groups"] = std::move(groups);
        } else if constexpr (std::is_same_v<T, FinetuneResponse>) {
          j["id"] = r.id;
          j["ok"] = true;
          j["model"] = r.model;
        } else if constexpr (std::is_same_v<T, ErrorResponse>) {
          j["id"] = r.id ? json(*r.id) : json(nullptr);
          j["ok"] = false;
          j["error"] = {{"kind", r.kind}, {"message", r.message}};
        } else {
          j["id"] = r.id;
          j["heartbeat"] = true;
          j["message"] = r.message;
        }
      },
      response);
  return j.dump();
}

Response ParseResponse(std::string_view line) {
  const json j = ParseEnvelope(line);
  if (auto hb = j.find("heartbeat"); hb != j.end() && *hb == true) {
    std::string message;
    if (auto m = j.find("message"); m != j.end() && m->is_string()) {
      message = m->get<std::string>();
    }
    return Heartbeat{RequireInt(j, "id"), message};
  }
  const json& ok = Require(j, "ok");
  if (!ok.is_boolean()) SchemaError("'ok' must be a boolean");
  if (!ok.get<bool>()) {
    ErrorResponse e;
    const json& id = Require(j, "id");
    if (id.is_number_integer()) {
      e.id = id.get<int64_t>();
    } else if (!id.is_null()) {
      SchemaError("'id' must be an integer or null");
    }
    const json& err = Require(j, "error");
    if (!err.is_object()) SchemaError("'error' must be an object");
    e.kind = RequireString(err, "kind");
    e.message = RequireString(err, "message");
    return e;
  }
  const int64_t id = RequireInt(j, "id");
  if (j.contains("groups")) {
    DetectResponse r{id, {}};
    const json& groups = j["groups"];
    if (!groups.is_array()) SchemaError("'groups' must be an array");
    for (const json& group : groups) {
      if (!group.is_array()) SchemaError("each group must be an array");
      std::vector<WireDetection> out;
      for (const json& d : group) {
        if (!d.is_object()) SchemaError("detections must be objects");
        const json& bbox = Require(d, "bbox");
        if (!bbox.is_array() || bbox.size() != 4) {
          SchemaError("'bbox' must be [x,y,w,h]");
        }
        WireDetection w;
        for (size_t i = 0; i < 4; ++i) {
          if (!bbox[i].is_number()) SchemaError("'bbox' entries must be numbers");
          w.bbox[i] = bbox[i].get<double>();
        }
        w.score = RequireNumber(d, "score");
        out.push_back(w);
      }
      r.groups.push_back(std::move(out));
    }
    return r;
  }
  if (j.contains("model")) return FinetuneResponse{id, RequireString(j, "model")};
  SchemaError("response has neither 'groups' nor 'model'");
}

}  // namespace groundalign
