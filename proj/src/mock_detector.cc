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
#include "groundalign/mock_detector.h"

#include <algorithm>
#include <cmath>

#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/rng.h"

namespace groundalign {
namespace {

using nlohmann::json;

PolicyKind ParsePolicyKind(const std::string& name) {
  if (name == "oracle") return PolicyKind::kOracle;
  if (name == "jittered_oracle") return PolicyKind::kJitteredOracle;
  if (name == "silent") return PolicyKind::kSilent;
  if (name == "random_boxes") return PolicyKind::kRandomBoxes;
  if (name == "fixed") return PolicyKind::kFixed;
  throw ConfigError("unknown mock policy '" + name + "'");
}

const char* PolicyName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kOracle: return "oracle";
    case PolicyKind::kJitteredOracle: return "jittered_oracle";
    case PolicyKind::kSilent: return "silent";
    case PolicyKind::kRandomBoxes: return "random_boxes";
    case PolicyKind::kFixed: return "fixed";
  }
  return "silent";
}

ResponsePolicy ParsePolicy(const json& j) {
  if (!j.is_object() || !j.contains("policy") || !j["policy"].is_string()) {
    throw ConfigError("mock stage needs a \"policy\" name: " + j.dump());
  }
  ResponsePolicy p;
  p.kind = ParsePolicyKind(j["policy"].get<std::string>());
  try {
    p.iou_floor = j.value("iou_floor", p.iou_floor);
    p.score = j.value("score", p.kind == PolicyKind::kOracle ? 0.99 : p.score);
    p.score_min = j.value("score_min", p.kind == PolicyKind::kJitteredOracle ? 0.5 : 0.0);
    p.score_max = j.value("score_max", p.kind == PolicyKind::kJitteredOracle ? 0.99 : 1.0);
    p.count = j.value("count", p.count);
    if (auto it = j.find("detections"); it != j.end()) {
      for (const json& d : *it) {
        WireDetection w;
        w.bbox = d.at("bbox").get<std::array<double, 4>>();
        w.score = d.at("score").get<double>();
        p.fixed.push_back(w);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad mock policy: ") + e.what());
  }
  if (p.iou_floor < 0.0 || p.iou_floor > 1.0) {
    throw ConfigError("iou_floor must lie in [0,1]");
  }
  if (p.score_min < 0.0 || p.score_max > 1.0 || p.score_min > p.score_max ||
      p.score < 0.0 || p.score > 1.0) {
    throw ConfigError("mock scores must lie in [0,1]");
  }
  if (p.count < 0) throw ConfigError("count must be non-negative");
  return p;
}

json PolicyToJson(const ResponsePolicy& p) {
  json j = {{"policy", PolicyName(p.kind)},
            {"iou_floor", p.iou_floor},
            {"score", p.score},
            {"score_min", p.score_min},
            {"score_max", p.score_max},
            {"count", p.count}};
  if (!p.fixed.empty()) {
    json dets = json::array();
    for (const auto& d : p.fixed) dets.push_back({{"bbox", d.bbox}, {"score", d.score}});
    j["detections"] = std::move(dets);
  }
  return j;
}

double RoundTo2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

MockScript MockScript::FromJson(const json& doc,
                                const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("mock script must be a JSON object");
  MockScript script;
  script.seed = doc.value("seed", uint64_t{0});
  script.initial_model = doc.value("initial_model", std::string("m0"));
  auto truth = doc.find("truth");
  if (truth == doc.end()) throw ConfigError("mock script needs \"truth\"");
  if (truth->is_string()) {
    std::filesystem::path p = truth->get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    script.truth = LoadCoco(p);
  } else {
    script.truth = ParseCoco(*truth);
  }
  for (const json& r : doc.value("rules", json::array())) {
    MockRule rule;
    if (!r.is_object() || !r.contains("category_id")) {
      throw ConfigError("mock rule needs a category_id: " + r.dump());
    }
    rule.category_id = r["category_id"].get<int64_t>();
    rule.expression = r.value("expression", std::string("*"));
    if (auto stages = r.find("stages"); stages != r.end()) {
      for (const json& s : *stages) rule.stages.push_back(ParsePolicy(s));
    } else {
      rule.stages.push_back(ParsePolicy(r));
    }
    if (rule.stages.empty()) throw ConfigError("mock rule has no stages");
    if (!script.truth.FindCategory(rule.category_id)) {
      throw ConfigError("mock rule references unknown category " +
                        std::to_string(rule.category_id));
    }
    script.rules.push_back(std::move(rule));
  }
  return script;
}

MockScript MockScript::Load(const std::filesystem::path& path) {
  return FromJson(ReadJsonFile(path), path.parent_path());
}

json MockScript::ToJson() const {
  json rules_json = json::array();
  for (const auto& r : rules) {
    json stages = json::array();
    for (const auto& s : r.stages) stages.push_back(PolicyToJson(s));
    rules_json.push_back({{"category_id", r.category_id},
                          {"expression", r.expression},
                          {"stages", std::move(stages)}});
  }
  return {{"seed", seed},
          {"initial_model", initial_model},
          {"truth", ToCocoJson(truth)},
          {"rules", std::move(rules_json)}};
}

MockDetector::MockDetector(MockScript script) : script_(std::move(script)) {
  for (const auto& r : script_.rules) {
    if (!script_.truth.FindCategory(r.category_id)) {
      throw ConfigError("mock rule references unknown category " +
                        std::to_string(r.category_id));
    }
  }
  for (const auto& image : script_.truth.images) {
    images_by_name_[image.file_name] = &image;
  }
  for (const auto& a : script_.truth.annotations) {
    truth_index_[{a.image_id, a.category_id}].push_back(a.bbox);
  }
  stages_[script_.initial_model] = 0;
}

int MockDetector::StageOf(const std::string& model_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = stages_.find(model_id);
  return it == stages_.end() ? -1 : it->second;
}

std::vector<FinetuneRequest> MockDetector::finetune_log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return finetune_log_;
}

const MockRule* MockDetector::Match(const DetectQuery& q) const {
  for (const auto& rule : script_.rules) {
    if (rule.category_id != q.category_id) continue;
    if (rule.expression == "*" || rule.expression == q.expression) return &rule;
  }
  return nullptr;
}

BBox MockDetector::Jitter(const BBox& truth, double floor, double image_width,
                          double image_height, uint64_t seed) {
  if (floor >= 1.0 || Area(truth) <= 0.0) return truth;
  SeededRng rng(seed);
  const double spread = 0.5 * (1.0 - floor);
  std::array<double, 4> offsets{};
  auto build = [&]() {
    const double x0 = truth.x_min() + offsets[0];
    const double y0 = truth.y_min() + offsets[1];
    const double x1 = std::max(x0, truth.x_max() + offsets[2]);
    const double y1 = std::max(y0, truth.y_max() + offsets[3]);
    return BBox(x0, y0, x1, y1).ClampedTo(image_width, image_height);
  };
  for (int attempt = 0; attempt < 32; ++attempt) {
    for (int i = 0; i < 4; ++i) {
      offsets[i] = rng.Uniform(-spread, spread) *
                   (i % 2 == 0 ? truth.width() : truth.height());
    }
    const BBox candidate = build();
    if (Iou(candidate, truth) >= floor) return candidate;
  }
  // Halving the offsets moves the candidate toward the truth.
  for (int shrink = 0; shrink < 64; ++shrink) {
    for (double& o : offsets) o *= 0.5;
    const BBox candidate = build();
    if (Iou(candidate, truth) >= floor) return candidate;
  }
  return truth;
}

std::vector<WireDetection> MockDetector::Answer(int stage,
                                                const DetectQuery& q) const {
  const MockRule* rule = Match(q);
  if (!rule) return {};
  auto image_it = images_by_name_.find(q.image);
  if (image_it == images_by_name_.end()) return {};
  const ImageRecord& image = *image_it->second;
  const ResponsePolicy& policy =
      rule->stages[std::min<size_t>(stage, rule->stages.size() - 1)];

  const uint64_t base = MixSeed(
      script_.seed, HashString(std::to_string(stage) + "|" + q.image + "|" +
                               std::to_string(q.category_id) + "|" + q.expression));
  std::vector<BBox> empty;
  auto truth_it = truth_index_.find({image.id, q.category_id});
  const std::vector<BBox>& truth = truth_it == truth_index_.end() ? empty : truth_it->second;

  std::vector<WireDetection> out;
  switch (policy.kind) {
    case PolicyKind::kSilent:
      break;
    case PolicyKind::kOracle:
      for (const BBox& b : truth) out.push_back({b.ToXywh(), policy.score});
      break;
    case PolicyKind::kJitteredOracle:
      for (size_t i = 0; i < truth.size(); ++i) {
        const BBox j = Jitter(truth[i], policy.iou_floor, image.width,
                              image.height, MixSeed(base, i));
        const double score =
            policy.score_min + (policy.score_max - policy.score_min) * Iou(j, truth[i]);
        out.push_back({j.ToXywh(), score});
      }
      break;
    case PolicyKind::kRandomBoxes: {
      SeededRng rng(base);
      for (int i = 0; i < policy.count; ++i) {
        double xa = rng.Uniform(0, image.width), xb = rng.Uniform(0, image.width);
        double ya = rng.Uniform(0, image.height), yb = rng.Uniform(0, image.height);
        const BBox b(std::min(xa, xb), std::min(ya, yb), std::max(xa, xb),
                     std::max(ya, yb));
        out.push_back({b.ToXywh(),
                       RoundTo2(rng.Uniform(policy.score_min, policy.score_max))});
      }
      break;
    }
    case PolicyKind::kFixed:
      out = policy.fixed;
      break;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const WireDetection& a, const WireDetection& b) {
                     return a.score > b.score;
                   });
  return out;
}

Response MockDetector::Handle(const Request& request) {
  if (const auto* d = std::get_if<DetectRequest>(&request)) {
    const int stage = StageOf(d->model);
    if (stage < 0) {
      return ErrorResponse{d->id, "unknown_model", "unknown model " + d->model};
    }
    DetectResponse r{d->id, {}};
    for (const auto& q : d->requests) r.groups.push_back(Answer(stage, q));
    return r;
  }
  const auto& f = std::get<FinetuneRequest>(request);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = stages_.find(f.model);
  if (it == stages_.end()) {
    return ErrorResponse{f.id, "unknown_model", "unknown model " + f.model};
  }
  if (!std::filesystem::exists(f.dataset)) {
    return ErrorResponse{f.id, "dataset", "dataset not found: " + f.dataset};
  }
  finetune_log_.push_back(f);
  const std::string id = "m" + std::to_string(next_model_++);
  stages_[id] = it->second + 1;
  return FinetuneResponse{f.id, id};
}

std::string MockDetector::HandleLine(const std::string& line) {
  try {
    return SerializeResponse(Handle(ParseRequest(line)));
  } catch (const ProtocolError& e) {
    std::optional<int64_t> id;
    try {
      auto j = json::parse(line);
      if (j.is_object() && j.contains("id") && j["id"].is_number_integer()) {
        id = j["id"].get<int64_t>();
      }
    } catch (const json::exception&) {
    }
    return SerializeResponse(ErrorResponse{id, e.kind(), e.what()});
  } catch (const std::exception& e) {
    return SerializeResponse(ErrorResponse{std::nullopt, "internal", e.what()});
  }
}

}  // namespace groundalign
