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

#include <cmath>
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "oracles.h"

namespace groundalign {
namespace {

using testing::GridGiou;
using testing::GridIou;
using testing::RandomIntBox;

TEST(BBoxTest, RejectsNegativeExtentAndNonFinite) {
  EXPECT_THROW(BBox(5, 0, 4, 1), std::invalid_argument);
  EXPECT_THROW(BBox(0, 5, 1, 4), std::invalid_argument);
  EXPECT_THROW(BBox(0, 0, std::numeric_limits<double>::quiet_NaN(), 1),
               std::invalid_argument);
  EXPECT_THROW(BBox::FromXywh(0, 0, -1, 1), std::invalid_argument);
  EXPECT_NO_THROW(BBox(2, 2, 2, 2));
}

TEST(BBoxTest, XywhRoundTrip) {
  const BBox b = BBox::FromXywh(10, 20, 30, 40);
  EXPECT_EQ(b, BBox(10, 20, 40, 60));
  const auto xywh = b.ToXywh();
  EXPECT_EQ(xywh[0], 10);
  EXPECT_EQ(xywh[3], 40);
}

TEST(BBoxTest, ClampToImage) {
  EXPECT_EQ(BBox(-5, -5, 700, 100).ClampedTo(640, 480), BBox(0, 0, 640, 100));
  const BBox outside = BBox(700, 10, 800, 20).ClampedTo(640, 480);
  EXPECT_EQ(Area(outside), 0.0);
}

TEST(IouTest, KnownValues) {
  EXPECT_DOUBLE_EQ(Iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(Iou(BBox(0, 0, 1, 1), BBox(0, 0, 1, 1)), 1.0);
  EXPECT_DOUBLE_EQ(Iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)), 0.0);
  // Touching edges share no area.
  EXPECT_DOUBLE_EQ(Iou(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)), 0.0);
}

TEST(IouTest, DegenerateBoxes) {
  EXPECT_DOUBLE_EQ(Iou(BBox(1, 1, 1, 1), BBox(1, 1, 1, 1)), 0.0);
  EXPECT_DOUBLE_EQ(Iou(BBox(1, 1, 1, 1), BBox(0, 0, 2, 2)), 0.0);
}

TEST(GiouTest, KnownValues) {
  // Disjoint unit squares two apart: hull 3x1, union 2.
  EXPECT_DOUBLE_EQ(Giou(BBox(0, 0, 1, 1), BBox(2, 0, 3, 1)), -1.0 / 3.0);
  EXPECT_DOUBLE_EQ(Giou(BBox(0, 0, 1, 1), BBox(0, 0, 1, 1)), 1.0);
  EXPECT_THROW(Giou(BBox(1, 1, 1, 1), BBox(2, 2, 2, 2)), std::invalid_argument);
}

TEST(IouTest, MatchesGridCountOracle) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 300; ++i) {
    const BBox a = RandomIntBox(gen, 40, true), b = RandomIntBox(gen, 40, true);
    EXPECT_NEAR(Iou(a, b), GridIou(a, b), 1e-9);
    if (Area(a) > 0 || Area(b) > 0) EXPECT_NEAR(Giou(a, b), GridGiou(a, b), 1e-9);
  }
}

TEST(IouTest, SymmetryBoundsAndTranslation) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> shift(-1000, 1000);
  for (int i = 0; i < 2000; ++i) {
    const BBox a = RandomIntBox(gen, 100, false), b = RandomIntBox(gen, 100, false);
    const double iou = Iou(a, b), giou = Giou(a, b);
    EXPECT_EQ(iou, Iou(b, a));
    EXPECT_EQ(giou, Giou(b, a));
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
    EXPECT_GE(giou, -1.0);
    EXPECT_LE(giou, iou);
    const double dx = shift(gen), dy = shift(gen);
    EXPECT_NEAR(Iou(a.Translated(dx, dy), b.Translated(dx, dy)), iou, 1e-9);
  }
}

TEST(KernelTest, ParallelMatchesSerial) {
  std::mt19937_64 gen(13);
  std::vector<BBox> a, b;
  for (int i = 0; i < 257; ++i) {
    a.push_back(RandomIntBox(gen, 200, false));
    b.push_back(RandomIntBox(gen, 200, false));
  }
  const IouMatrix m = PairwiseIou(a, b), ms = serial::PairwiseIou(a, b);
  ASSERT_EQ(m.rows, 257u);
  ASSERT_EQ(m.cols, 257u);
  EXPECT_EQ(m.values, ms.values);
  EXPECT_DOUBLE_EQ(m.at(3, 5), Iou(a[3], b[5]));
  EXPECT_EQ(ElementwiseIou(a, b), serial::ElementwiseIou(a, b));
  EXPECT_EQ(ElementwiseGiou(a, b), serial::ElementwiseGiou(a, b));
}

TEST(KernelTest, ElementwiseRejectsLengthMismatch) {
  std::vector<BBox> a(3), b(2);
  EXPECT_THROW(ElementwiseIou(a, b), std::invalid_argument);
}

}  // namespace
}  // namespace groundalign
