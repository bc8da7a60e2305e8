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
#ifndef GROUNDALIGN_EVALUATION_H_
#define GROUNDALIGN_EVALUATION_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/protocol.h"
#include "json.hpp"

namespace groundalign {

inline constexpr int kRecallPoints = 101;
inline constexpr const char* kMatchingTag =
    "greedy-highest-iou, 101-point interpolated AP";

struct PRPoint {
  double score_threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Matches detections to ground truth for one category. Detections are taken
// in descending score order (ties keep input order); each claims the
// unmatched box on its image with the highest IoU, provided that IoU is at
// least `iou_threshold`. When `federation` is given, detections on images
// where the category is not verified are dropped; images missing from the
// map count as verified. Returns one point per kept detection.
std::vector<PRPoint> PrecisionRecallCurve(std::span<const Detection> detections,
                                          std::span<const GroundTruthBox> gts,
                                          double iou_threshold,
                                          const Federation* federation = nullptr);

// 101-point interpolated AP. nullopt when there is no ground truth.
std::optional<double> AveragePrecision(std::span<const Detection> detections,
                                       std::span<const GroundTruthBox> gts,
                                       double iou_threshold,
                                       const Federation* federation = nullptr);

// 0.50, 0.55, ..., 0.95.
std::vector<double> CocoIouThresholds();

struct EvalReport {
  // Classes without ground truth are absent.
  std::map<int64_t, double> per_class_ap;
  double map = 0.0;
  std::vector<double> iou_thresholds;
  std::string matching = kMatchingTag;

  // "AP@0.50" or "AP@[0.50:0.95]" style label.
  std::string ModeLabel() const;
  nlohmann::json ToJson() const;
};

// Per-class AP averaged over thresholds, then averaged over the classes
// that have ground truth. Detections without a category_id are ignored.
// Classes are evaluated in parallel.
EvalReport MeanAp(std::span<const Detection> detections,
                  std::span<const GroundTruthBox> gts,
                  std::span<const double> iou_thresholds,
                  const Federation* federation = nullptr);

namespace serial {
EvalReport MeanAp(std::span<const Detection> detections,
                  std::span<const GroundTruthBox> gts,
                  std::span<const double> iou_thresholds,
                  const Federation* federation = nullptr);
}  // namespace serial

// COCO results: [{"image_id":..,"category_id":..,"bbox":[x,y,w,h],"score":..}]
std::vector<Detection> ParseCocoResults(const nlohmann::json& doc);
std::vector<Detection> LoadCocoResults(const std::filesystem::path& path);
nlohmann::json CocoResultsJson(std::span<const Detection> detections);

}  // namespace groundalign

#endif  // GROUNDALIGN_EVALUATION_H_
