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
#include "groundalign/evaluation.h"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "fmt/format.h"
#include "groundalign/errors.h"
#include "groundalign/json_io.h"

namespace groundalign {
namespace {

using nlohmann::json;

bool Verified(const Federation* federation, int64_t image_id,
              int64_t category_id) {
  if (!federation) return true;
  auto it = federation->find(image_id);
  return it == federation->end() || it->second.count(category_id) > 0;
}

std::map<int64_t, std::vector<GroundTruthBox>> GtByClass(
    std::span<const GroundTruthBox> gts) {
  std::map<int64_t, std::vector<GroundTruthBox>> out;
  for (const auto& g : gts) out[g.category_id].push_back(g);
  return out;
}

std::map<int64_t, std::vector<Detection>> DetectionsByClass(
    std::span<const Detection> detections) {
  std::map<int64_t, std::vector<Detection>> out;
  for (const auto& d : detections) {
    if (d.category_id) out[*d.category_id].push_back(d);
  }
  return out;
}

// Shared tail of MeanAp: per-class averages and the class mean.
EvalReport Summarize(std::span<const int64_t> classes,
                     const std::vector<std::optional<double>>& ap,
                     std::span<const double> thresholds) {
  EvalReport report;
  report.iou_thresholds.assign(thresholds.begin(), thresholds.end());
  const size_t t = thresholds.size();
  for (size_t c = 0; c < classes.size(); ++c) {
    double sum = 0.0;
    for (size_t i = 0; i < t; ++i) sum += ap[c * t + i].value_or(0.0);
    report.per_class_ap[classes[c]] = t ? sum / static_cast<double>(t) : 0.0;
  }
  if (!report.per_class_ap.empty()) {
    double sum = 0.0;
    for (const auto& [id, v] : report.per_class_ap) sum += v;
    report.map = sum / static_cast<double>(report.per_class_ap.size());
  }
  return report;
}

}  // namespace

std::vector<PRPoint> PrecisionRecallCurve(std::span<const Detection> detections,
                                          std::span<const GroundTruthBox> gts,
                                          double iou_threshold,
                                          const Federation* federation) {
  std::vector<PRPoint> curve;
  if (gts.empty()) return curve;
  const int64_t fallback_category = gts.front().category_id;

  std::unordered_map<int64_t, std::vector<size_t>> gts_by_image;
  for (size_t i = 0; i < gts.size(); ++i) gts_by_image[gts[i].image_id].push_back(i);
  std::vector<bool> matched(gts.size(), false);

  std::vector<size_t> order;
  for (size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    if (Verified(federation, d.image_id, d.category_id.value_or(fallback_category))) {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return detections[a].score > detections[b].score;
  });

  size_t tp = 0, fp = 0;
  for (size_t i : order) {
    const Detection& d = detections[i];
    double best_iou = -1.0;
    size_t best = 0;
    if (auto it = gts_by_image.find(d.image_id); it != gts_by_image.end()) {
      for (size_t g : it->second) {
        if (matched[g]) continue;
        const double iou = Iou(d.bbox, gts[g].bbox);
        if (iou > best_iou) {
          best_iou = iou;
          best = g;
        }
      }
    }
    if (best_iou >= iou_threshold) {
      matched[best] = true;
      ++tp;
    } else {
      ++fp;
    }
    curve.push_back({d.score, static_cast<double>(tp) / static_cast<double>(tp + fp),
                     static_cast<double>(tp) / static_cast<double>(gts.size())});
  }
  return curve;
}

std::optional<double> AveragePrecision(std::span<const Detection> detections,
                                       std::span<const GroundTruthBox> gts,
                                       double iou_threshold,
                                       const Federation* federation) {
  if (gts.empty()) return std::nullopt;
  std::vector<PRPoint> curve =
      PrecisionRecallCurve(detections, gts, iou_threshold, federation);
  // Precision envelope: best precision at this recall or beyond.
  for (size_t i = curve.size(); i > 1; --i) {
    curve[i - 2].precision = std::max(curve[i - 2].precision, curve[i - 1].precision);
  }
  double sum = 0.0;
  size_t k = 0;
  for (int r = 0; r < kRecallPoints; ++r) {
    const double level = static_cast<double>(r) / (kRecallPoints - 1);
    while (k < curve.size() && curve[k].recall < level) ++k;
    if (k == curve.size()) break;
    sum += curve[k].precision;
  }
  return sum / kRecallPoints;
}

std::vector<double> CocoIouThresholds() {
  std::vector<double> out;
  for (int i = 0; i < 10; ++i) out.push_back((50.0 + 5.0 * i) / 100.0);
  return out;
}

std::string EvalReport::ModeLabel() const {
  if (iou_thresholds.size() == 1) return fmt::format("AP@{:.2f}", iou_thresholds[0]);
  if (iou_thresholds.empty()) return "AP@[]";
  return fmt::format("AP@[{:.2f}:{:.2f}]", iou_thresholds.front(),
                     iou_thresholds.back());
}

json EvalReport::ToJson() const {
  json classes = json::object();
  for (const auto& [id, ap] : per_class_ap) classes[std::to_string(id)] = ap;
  return {{"mode", ModeLabel()},
          {"map", map},
          {"per_class_ap", std::move(classes)},
          {"iou_thresholds", iou_thresholds},
          {"matching", matching},
          {"zero_gt_classes", "excluded from the mean"}};
}

EvalReport MeanAp(std::span<const Detection> detections,
                  std::span<const GroundTruthBox> gts,
                  std::span<const double> iou_thresholds,
                  const Federation* federation) {
  const auto gt_by_class = GtByClass(gts);
  const auto det_by_class = DetectionsByClass(detections);
  std::vector<int64_t> classes;
  for (const auto& [id, boxes] : gt_by_class) classes.push_back(id);

  const size_t t = iou_thresholds.size();
  std::vector<std::optional<double>> ap(classes.size() * t);
  static const std::vector<Detection> kNone;
  const auto tasks = static_cast<std::ptrdiff_t>(ap.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t task = 0; task < tasks; ++task) {
    const int64_t cls = classes[task / t];
    auto it = det_by_class.find(cls);
    const auto& dets = it == det_by_class.end() ? kNone : it->second;
    ap[task] = AveragePrecision(dets, gt_by_class.at(cls),
                                iou_thresholds[task % t], federation);
  }
  return Summarize(classes, ap, iou_thresholds);
}

namespace serial {

EvalReport MeanAp(std::span<const Detection> detections,
                  std::span<const GroundTruthBox> gts,
                  std::span<const double> iou_thresholds,
                  const Federation* federation) {
  const auto gt_by_class = GtByClass(gts);
  const auto det_by_class = DetectionsByClass(detections);
  std::vector<int64_t> classes;
  std::vector<std::optional<double>> ap;
  for (const auto& [cls, boxes] : gt_by_class) {
    classes.push_back(cls);
    auto it = det_by_class.find(cls);
    const std::vector<Detection> none;
    for (double thr : iou_thresholds) {
      ap.push_back(AveragePrecision(it == det_by_class.end() ? none : it->second,
                                    boxes, thr, federation));
    }
  }
  return Summarize(classes, ap, iou_thresholds);
}

}  // namespace serial

std::vector<Detection> ParseCocoResults(const json& doc) {
  if (!doc.is_array()) throw ParseError("results must be a JSON array");
  std::vector<Detection> out;
  for (size_t i = 0; i < doc.size(); ++i) {
    const json& r = doc[i];
    const std::string where = "results[" + std::to_string(i) + "]";
    try {
      const auto bbox = r.at("bbox").get<std::array<double, 4>>();
      Detection d;
      d.image_id = r.at("image_id").get<int64_t>();
      d.category_id = r.at("category_id").get<int64_t>();
      d.bbox = BBox::FromXywh(bbox[0], bbox[1], bbox[2], bbox[3]);
      d.score = r.at("score").get<double>();
      if (d.score < 0.0 || d.score > 1.0) {
        throw ParseError(where + ": score outside [0,1]");
      }
      d.expression = r.value("expression", std::string());
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<Detection> LoadCocoResults(const std::filesystem::path& path) {
  try {
    return ParseCocoResults(ReadJsonFile(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json CocoResultsJson(std::span<const Detection> detections) {
  json out = json::array();
  for (const auto& d : detections) {
    const auto xywh = d.bbox.ToXywh();
    json r = {{"image_id", d.image_id},
              {"category_id", d.category_id.value_or(0)},
              {"bbox", xywh},
              {"score", d.score}};
    if (!d.expression.empty()) r["expression"] = d.expression;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace groundalign
