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
#ifndef GROUNDALIGN_MOCK_DETECTOR_H_
#define GROUNDALIGN_MOCK_DETECTOR_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/protocol.h"
#include "json.hpp"

namespace groundalign {

// How the mock answers a matching query.
//   oracle          every hidden ground-truth box of the category, exactly
//   jittered_oracle each hidden box perturbed so that IoU >= iou_floor;
//                   score rises linearly with the achieved IoU
//   silent          nothing
//   random_boxes    `count` boxes inside the image, scores uniform in
//                   [score_min, score_max] rounded to two decimals
//   fixed           the listed detections, for every matching image
enum class PolicyKind { kOracle, kJitteredOracle, kSilent, kRandomBoxes, kFixed };

struct ResponsePolicy {
  PolicyKind kind = PolicyKind::kSilent;
  double iou_floor = 0.5;
  double score = 0.99;
  double score_min = 0.0;
  double score_max = 1.0;
  int count = 3;
  std::vector<WireDetection> fixed;
};

// Applies to queries for `category_id` whose expression equals `expression`
// ("*" matches any expression). stages[s] is used by models s finetune steps
// away from the root; the last stage sticks.
struct MockRule {
  int64_t category_id = 0;
  std::string expression;
  std::vector<ResponsePolicy> stages;
};

struct MockScript {
  uint64_t seed = 0;
  std::string initial_model = "m0";
  // Hidden ground truth for every image the mock may be asked about.
  Dataset truth;
  std::vector<MockRule> rules;

  // Script document:
  //   {"seed": 7, "initial_model": "m0",
  //    "truth": "truth.json" | {COCO document},
  //    "rules": [{"category_id": 13, "expression": "small kick scooter",
  //               "stages": [{"policy": "jittered_oracle", "iou_floor": 0.7}]}]}
  // A rule may give a single "policy" object instead of "stages". Relative
  // truth paths resolve against `base_dir`. Throws ConfigError for unknown
  // policies or categories absent from the truth.
  static MockScript FromJson(const nlohmann::json& doc,
                             const std::filesystem::path& base_dir);
  static MockScript Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;
};

// Deterministic detector double. Responses depend only on (script, model
// stage, image, category, expression), never on call order.
class MockDetector {
 public:
  explicit MockDetector(MockScript script);

  // Never throws on malformed input; replies with an error message instead.
  std::string HandleLine(const std::string& line);
  Response Handle(const Request& request);

  int StageOf(const std::string& model_id) const;
  std::vector<FinetuneRequest> finetune_log() const;

  // Jittered copy of `truth` with IoU >= floor, clamped to the image.
  static BBox Jitter(const BBox& truth, double floor, double image_width,
                     double image_height, uint64_t seed);

 private:
  std::vector<WireDetection> Answer(int stage, const DetectQuery& q) const;
  const MockRule* Match(const DetectQuery& q) const;

  MockScript script_;
  std::map<std::string, const ImageRecord*> images_by_name_;
  std::map<std::pair<int64_t, int64_t>, std::vector<BBox>> truth_index_;

  mutable std::mutex mu_;
  std::map<std::string, int> stages_;
  int next_model_ = 1;
  std::vector<FinetuneRequest> finetune_log_;
};

}  // namespace groundalign

#endif  // GROUNDALIGN_MOCK_DETECTOR_H_
