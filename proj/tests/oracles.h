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

// Brute-force reference computations used only by tests. Each one is written
// from the definition, independently of the library code it checks.

#ifndef GROUNDALIGN_TESTS_ORACLES_H_
#define GROUNDALIGN_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/geometry.h"
#include "groundalign/protocol.h"

namespace groundalign::testing {

// Unit-cell counts over integer-coordinate boxes.
struct CellCounts {
  int64_t a = 0, b = 0, both = 0, either = 0, hull = 0;
};

inline CellCounts CountCells(const BBox& a, const BBox& b) {
  CellCounts c;
  const auto x0 = static_cast<int64_t>(std::min(a.x_min(), b.x_min()));
  const auto y0 = static_cast<int64_t>(std::min(a.y_min(), b.y_min()));
  const auto x1 = static_cast<int64_t>(std::max(a.x_max(), b.x_max()));
  const auto y1 = static_cast<int64_t>(std::max(a.y_max(), b.y_max()));
  auto inside = [](const BBox& box, int64_t x, int64_t y) {
    return x >= box.x_min() && x + 1 <= box.x_max() && y >= box.y_min() &&
           y + 1 <= box.y_max();
  };
  for (int64_t y = y0; y < y1; ++y) {
    for (int64_t x = x0; x < x1; ++x) {
      const bool in_a = inside(a, x, y), in_b = inside(b, x, y);
      c.a += in_a;
      c.b += in_b;
      c.both += in_a && in_b;
      c.either += in_a || in_b;
    }
  }
  c.hull = (x1 - x0) * (y1 - y0);
  return c;
}

inline double GridIou(const BBox& a, const BBox& b) {
  const CellCounts c = CountCells(a, b);
  return c.either == 0 ? 0.0 : static_cast<double>(c.both) / c.either;
}

// Caller guarantees at least one box has positive area.
inline double GridGiou(const BBox& a, const BBox& b) {
  const CellCounts c = CountCells(a, b);
  const double iou = c.either == 0 ? 0.0 : static_cast<double>(c.both) / c.either;
  return iou - static_cast<double>(c.hull - c.either) / c.hull;
}

inline BBox RandomIntBox(std::mt19937_64& gen, int extent, bool allow_empty) {
  std::uniform_int_distribution<int> pos(0, extent);
  int x0 = pos(gen), x1 = pos(gen), y0 = pos(gen), y1 = pos(gen);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  if (!allow_empty) {
    if (x0 == x1) ++x1;
    if (y0 == y1) ++y1;
  }
  return BBox(x0, y0, x1, y1);
}

// Number of shots whose best detection overlaps the shot box with IoU
// strictly above `threshold`.
inline int CountHits(const std::vector<BBox>& shot_boxes,
                     const std::vector<std::vector<BBox>>& detections,
                     double threshold) {
  int hits = 0;
  for (size_t j = 0; j < shot_boxes.size(); ++j) {
    bool hit = false;
    if (j < detections.size()) {
      for (const BBox& d : detections[j]) hit = hit || GridIou(d, shot_boxes[j]) > threshold;
    }
    hits += hit;
  }
  return hits;
}

// 101-point interpolated AP for one category, recomputing the greedy
// matching from scratch for every prefix of the ranked detections.
inline double BruteForceAp(std::vector<Detection> detections,
                           const std::vector<GroundTruthBox>& gts, double threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& x, const Detection& y) { return x.score > y.score; });
  const double npos = static_cast<double>(gts.size());
  std::vector<std::pair<double, double>> points;  // recall, precision
  for (size_t k = 1; k <= detections.size(); ++k) {
    std::vector<bool> used(gts.size(), false);
    int tp = 0;
    for (size_t d = 0; d < k; ++d) {
      double best = -1.0;
      int best_g = -1;
      for (size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || gts[g].image_id != detections[d].image_id) continue;
        const double iou = Iou(detections[d].bbox, gts[g].bbox);
        if (iou >= threshold && iou > best) {
          best = iou;
          best_g = static_cast<int>(g);
        }
      }
      if (best_g >= 0) {
        used[best_g] = true;
        ++tp;
      }
    }
    points.emplace_back(tp / npos, tp / static_cast<double>(k));
  }
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    double p = 0.0;
    for (const auto& [rec, prec] : points) {
      if (rec >= level) p = std::max(p, prec);
    }
    sum += p;
  }
  return sum / 101.0;
}

}  // namespace groundalign::testing

#endif  // GROUNDALIGN_TESTS_ORACLES_H_
