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
#include "groundalign/geometry.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace groundalign {

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) ||
      !std::isfinite(x_max) || !std::isfinite(y_max)) {
    throw std::invalid_argument("bbox coordinates must be finite");
  }
  if (x_max < x_min || y_max < y_min) {
    throw std::invalid_argument(
        "bbox has negative extent: (" + std::to_string(x_min) + "," +
        std::to_string(y_min) + "," + std::to_string(x_max) + "," +
        std::to_string(y_max) + ")");
  }
}

BBox BBox::FromXywh(double x, double y, double width, double height) {
  return BBox(x, y, x + width, y + height);
}

BBox BBox::Translated(double dx, double dy) const {
  return BBox(x_min_ + dx, y_min_ + dy, x_max_ + dx, y_max_ + dy);
}

BBox BBox::ClampedTo(double image_width, double image_height) const {
  const double x0 = std::clamp(x_min_, 0.0, image_width);
  const double y0 = std::clamp(y_min_, 0.0, image_height);
  const double x1 = std::clamp(x_max_, 0.0, image_width);
  const double y1 = std::clamp(y_max_, 0.0, image_height);
  return BBox(x0, y0, x1, y1);
}

double Area(const BBox& b) { return b.width() * b.height(); }

double IntersectionArea(const BBox& a, const BBox& b) {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  return std::max(w, 0.0) * std::max(h, 0.0);
}

double UnionArea(const BBox& a, const BBox& b) {
  return Area(a) + Area(b) - IntersectionArea(a, b);
}

BBox EnclosingBox(const BBox& a, const BBox& b) {
  return BBox(std::min(a.x_min(), b.x_min()), std::min(a.y_min(), b.y_min()),
              std::max(a.x_max(), b.x_max()), std::max(a.y_max(), b.y_max()));
}

double Iou(const BBox& a, const BBox& b) {
  const double inter = IntersectionArea(a, b);
  const double uni = Area(a) + Area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double Giou(const BBox& a, const BBox& b) {
  if (Area(a) <= 0.0 && Area(b) <= 0.0) {
    throw std::invalid_argument("giou undefined for two zero-area boxes");
  }
  const double inter = IntersectionArea(a, b);
  const double uni = Area(a) + Area(b) - inter;
  const double hull = Area(EnclosingBox(a, b));
  return inter / uni - (hull - uni) / hull;
}

IouMatrix PairwiseIou(std::span<const BBox> a, std::span<const BBox> b) {
  IouMatrix m{a.size(), b.size(), std::vector<double>(a.size() * b.size())};
  const auto rows = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < b.size(); ++c) {
      m.values[r * b.size() + c] = Iou(a[r], b[c]);
    }
  }
  return m;
}

std::vector<double> ElementwiseIou(std::span<const BBox> a,
                                   std::span<const BBox> b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  std::vector<double> out(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = Iou(a[i], b[i]);
  return out;
}

std::vector<double> ElementwiseGiou(std::span<const BBox> a,
                                    std::span<const BBox> b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  for (size_t i = 0; i < a.size(); ++i) {
    if (Area(a[i]) <= 0.0 && Area(b[i]) <= 0.0) {
      throw std::invalid_argument("giou undefined for two zero-area boxes");
    }
  }
  std::vector<double> out(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = Giou(a[i], b[i]);
  return out;
}

namespace serial {

IouMatrix PairwiseIou(std::span<const BBox> a, std::span<const BBox> b) {
  IouMatrix m{a.size(), b.size(), {}};
  m.values.reserve(a.size() * b.size());
  for (const BBox& x : a) {
    for (const BBox& y : b) m.values.push_back(Iou(x, y));
  }
  return m;
}

std::vector<double> ElementwiseIou(std::span<const BBox> a,
                                   std::span<const BBox> b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  std::vector<double> out;
  out.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) out.push_back(Iou(a[i], b[i]));
  return out;
}

std::vector<double> ElementwiseGiou(std::span<const BBox> a,
                                    std::span<const BBox> b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  std::vector<double> out;
  out.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) out.push_back(Giou(a[i], b[i]));
  return out;
}

}  // namespace serial
}  // namespace groundalign
