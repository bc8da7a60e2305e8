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
#ifndef GROUNDALIGN_GEOMETRY_H_
#define GROUNDALIGN_GEOMETRY_H_

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace groundalign {

// Axis-aligned box in pixel coordinates, stored in corner form.
// Zero-area boxes are allowed; negative extents and non-finite coordinates
// are rejected with std::invalid_argument.
class BBox {
 public:
  BBox() = default;
  BBox(double x_min, double y_min, double x_max, double y_max);

  // COCO order: top-left corner plus width and height.
  static BBox FromXywh(double x, double y, double width, double height);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }

  std::array<double, 4> ToXywh() const {
    return {x_min_, y_min_, width(), height()};
  }

  BBox Translated(double dx, double dy) const;
  // Intersection with [0,width]x[0,height].
  BBox ClampedTo(double image_width, double image_height) const;

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_min_ = 0.0;
  double y_min_ = 0.0;
  double x_max_ = 0.0;
  double y_max_ = 0.0;
};

double Area(const BBox& b);
double IntersectionArea(const BBox& a, const BBox& b);
double UnionArea(const BBox& a, const BBox& b);
BBox EnclosingBox(const BBox& a, const BBox& b);

// |a ∩ b| / |a ∪ b|, or 0 when the union is empty.
double Iou(const BBox& a, const BBox& b);

// Generalized IoU. Throws std::invalid_argument when both boxes have zero
// area, since the enclosing-box penalty is undefined there.
double Giou(const BBox& a, const BBox& b);

// Row-major |a| x |b| matrix of pairwise IoU values.
struct IouMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  double at(size_t r, size_t c) const { return values[r * cols + c]; }
};

// OpenMP kernels.
IouMatrix PairwiseIou(std::span<const BBox> a, std::span<const BBox> b);
// out[i] = Iou(a[i], b[i]); spans must have equal length.
std::vector<double> ElementwiseIou(std::span<const BBox> a,
                                   std::span<const BBox> b);
std::vector<double> ElementwiseGiou(std::span<const BBox> a,
                                    std::span<const BBox> b);

// Single-threaded reference versions of the kernels above.
namespace serial {
IouMatrix PairwiseIou(std::span<const BBox> a, std::span<const BBox> b);
std::vector<double> ElementwiseIou(std::span<const BBox> a,
                                   std::span<const BBox> b);
std::vector<double> ElementwiseGiou(std::span<const BBox> a,
                                    std::span<const BBox> b);
}  // namespace serial

}  // namespace groundalign

#endif  // GROUNDALIGN_GEOMETRY_H_
