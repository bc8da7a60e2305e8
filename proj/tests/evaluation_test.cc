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
#include <cmath>
#include <random>

#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/reports.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "oracles.h"
#include "test_util.h"

namespace groundalign {
namespace {

using nlohmann::json;

GroundTruthBox Gt(int64_t id, int64_t image, int64_t cat, BBox box) {
  return {id, image, cat, box, LabelSource::kHuman, std::nullopt};
}

Detection Det(int64_t image, int64_t cat, BBox box, double score) {
  return {image, box, score, "", cat};
}

// Box inside `gt` whose IoU with it equals `fraction`.
BBox Shrunk(const BBox& gt, double fraction) {
  return BBox(gt.x_min(), gt.y_min(), gt.x_max(), gt.y_min() + fraction * gt.height());
}

TEST(ApTest, SingleMatchAndMiss) {
  const BBox g(0, 0, 100, 100);
  const std::vector<GroundTruthBox> gts = {Gt(1, 1, 1, g)};
  EXPECT_EQ(AveragePrecision(std::vector<Detection>{Det(1, 1, Shrunk(g, 0.9), 0.8)}, gts, 0.5),
            1.0);
  EXPECT_EQ(AveragePrecision(std::vector<Detection>{Det(1, 1, BBox(200, 200, 300, 300), 0.8)},
                             gts, 0.5),
            0.0);
  EXPECT_FALSE(AveragePrecision(std::vector<Detection>{}, {}, 0.5).has_value());
}

TEST(ApTest, TrailingFalsePositiveAtFullRecall) {
  const BBox g1(0, 0, 100, 100), g2(200, 0, 300, 100);
  const std::vector<GroundTruthBox> gts = {Gt(1, 1, 1, g1), Gt(2, 1, 1, g2)};
  const std::vector<Detection> dets = {Det(1, 1, Shrunk(g1, 0.8), 0.9),
                                       Det(1, 1, Shrunk(g2, 0.6), 0.8),
                                       Det(1, 1, Shrunk(g2, 0.55), 0.7)};
  EXPECT_EQ(AveragePrecision(dets, gts, 0.5), 1.0);
  const auto curve = PrecisionRecallCurve(dets, gts, 0.5);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_DOUBLE_EQ(curve[2].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(curve[2].recall, 1.0);
}

TEST(ApTest, FederatedImagesIgnored) {
  const BBox g(0, 0, 100, 100);
  const std::vector<GroundTruthBox> gts = {Gt(1, 1, 1, g)};
  // A confident false positive on image 2, where class 1 was never checked.
  const std::vector<Detection> dets = {Det(2, 1, g, 0.99), Det(1, 1, g, 0.5)};
  const Federation fed = {{1, {1}}, {2, {}}};
  EXPECT_LT(*AveragePrecision(dets, gts, 0.5), 1.0);
  EXPECT_EQ(AveragePrecision(dets, gts, 0.5, &fed), 1.0);
}

std::vector<Detection> RandomInstance(std::mt19937_64& gen, std::vector<GroundTruthBox>* gts) {
  std::uniform_int_distribution<int> count_gt(1, 5), count_det(0, 20), img(1, 3);
  std::uniform_real_distribution<double> score(0.0, 1.0), jitter(-15, 15);
  gts->clear();
  const int n = count_gt(gen);
  for (int i = 0; i < n; ++i) {
    gts->push_back(Gt(i + 1, img(gen), 1, testing::RandomIntBox(gen, 100, false)));
  }
  std::vector<Detection> dets;
  const int m = count_det(gen);
  for (int i = 0; i < m; ++i) {
    const GroundTruthBox& near = (*gts)[gen() % gts->size()];
    BBox b = gen() % 4 == 0 ? testing::RandomIntBox(gen, 100, false)
                            : near.bbox.Translated(jitter(gen), jitter(gen));
    // Quantized scores make ties common.
    dets.push_back(Det(gen() % 3 ? near.image_id : img(gen), 1, b,
                       std::round(score(gen) * 10) / 10));
  }
  return dets;
}

TEST(ApTest, MatchesBruteForceOracle) {
  std::mt19937_64 gen(31);
  std::vector<GroundTruthBox> gts;
  for (int i = 0; i < 300; ++i) {
    const auto dets = RandomInstance(gen, &gts);
    for (double t : {0.5, 0.75}) {
      EXPECT_NEAR(*AveragePrecision(dets, gts, t), testing::BruteForceAp(dets, gts, t), 1e-9)
          << "instance " << i;
    }
  }
}

TEST(ApTest, ScoreScalingInvariance) {
  std::mt19937_64 gen(32);
  std::vector<GroundTruthBox> gts;
  for (int i = 0; i < 100; ++i) {
    auto dets = RandomInstance(gen, &gts);
    const double before = *AveragePrecision(dets, gts, 0.5);
    for (auto& d : dets) d.score = 0.5 * d.score * d.score + 0.01;
    EXPECT_NEAR(*AveragePrecision(dets, gts, 0.5), before, 1e-12);
  }
}

TEST(ApTest, FixingFalsePositiveNeverHurts) {
  std::mt19937_64 gen(33);
  std::vector<GroundTruthBox> gts;
  for (int i = 0; i < 200; ++i) {
    auto dets = RandomInstance(gen, &gts);
    if (dets.empty()) continue;
    // Replace the lowest-ranked detection with an exact copy of a GT box
    // that no detection overlaps.
    for (const auto& g : gts) {
      bool covered = false;
      for (const auto& d : dets) covered = covered || (d.image_id == g.image_id && Iou(d.bbox, g.bbox) > 0);
      if (covered) continue;
      const double before = *AveragePrecision(dets, gts, 0.5);
      auto lowest = std::min_element(dets.begin(), dets.end(),
                                     [](const Detection& a, const Detection& b) { return a.score < b.score; });
      const bool was_fp = testing::BruteForceAp({*lowest}, gts, 0.5) == 0.0;
      if (!was_fp) break;
      lowest->image_id = g.image_id;
      lowest->bbox = g.bbox;
      EXPECT_GE(*AveragePrecision(dets, gts, 0.5) + 1e-12, before);
      break;
    }
  }
}

TEST(MeanApTest, PerfectEmptyAndMissingClasses) {
  std::vector<GroundTruthBox> gts;
  std::vector<Detection> perfect;
  for (int i = 0; i < 30; ++i) {
    const BBox b = BBox::FromXywh(i * 3, i, 20 + i, 10 + i);
    gts.push_back(Gt(i + 1, 1 + i % 4, 1 + i % 3, b));
    perfect.push_back(Det(1 + i % 4, 1 + i % 3, b, 0.1 + 0.02 * i));
  }
  const auto thresholds = CocoIouThresholds();
  ASSERT_EQ(thresholds.size(), 10u);
  EXPECT_EQ(thresholds[0], 0.5);
  EXPECT_EQ(thresholds[9], 0.95);
  EXPECT_EQ(MeanAp(perfect, gts, thresholds).map, 1.0);
  EXPECT_EQ(MeanAp({}, gts, thresholds).map, 0.0);
  // Detections for a class without ground truth do not enter the mean.
  perfect.push_back(Det(1, 9, BBox(0, 0, 5, 5), 0.99));
  const EvalReport r = MeanAp(perfect, gts, thresholds);
  EXPECT_EQ(r.map, 1.0);
  EXPECT_EQ(r.per_class_ap.size(), 3u);
  EXPECT_EQ(r.ModeLabel(), "AP@[0.50:0.95]");
  EXPECT_EQ(MeanAp(perfect, gts, std::vector<double>{0.5}).ModeLabel(), "AP@0.50");
}

TEST(MeanApTest, ParallelMatchesSerial) {
  std::mt19937_64 gen(34);
  std::vector<GroundTruthBox> gts;
  std::vector<Detection> dets;
  for (int c = 1; c <= 18; ++c) {
    std::vector<GroundTruthBox> g;
    auto d = RandomInstance(gen, &g);
    for (auto& x : g) {
      x.category_id = c;
      x.id += 100 * c;
      gts.push_back(x);
    }
    for (auto& x : d) {
      x.category_id = c;
      dets.push_back(x);
    }
  }
  const auto t = CocoIouThresholds();
  const EvalReport p = MeanAp(dets, gts, t), s = serial::MeanAp(dets, gts, t);
  EXPECT_EQ(p.per_class_ap, s.per_class_ap);
  EXPECT_EQ(p.map, s.map);
}

TEST(ResultsTest, ParseAndRoundTrip) {
  const std::vector<Detection> dets = {Det(1, 2, BBox::FromXywh(1, 2, 3, 4), 0.5)};
  const auto back = ParseCocoResults(CocoResultsJson(dets));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].bbox, dets[0].bbox);
  EXPECT_EQ(back[0].category_id, 2);
  try {
    ParseCocoResults(json::parse(R"([{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":1},
                                     {"image_id":1,"bbox":[0,0,1,1],"score":1}])"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("[1]"), std::string::npos) << e.what();
  }
}

// ---- reports ----

TEST(ReportTest, FormatScore) {
  EXPECT_EQ(FormatScore(0.7), "0.7");
  EXPECT_EQ(FormatScore(1.0), "1.0");
  EXPECT_EQ(FormatScore(0.0), "0.0");
  EXPECT_EQ(FormatScore(0.25), "0.25");
  EXPECT_EQ(FormatScore(1.0 / 3.0), "0.3333");
}

TEST(ReportTest, AlignmentTableFixture) {
  const json doc = ReadJsonFile(testing::TestdataDir() / "alignment_table.json");
  std::vector<SelectionResult> rows;
  for (const auto& r : doc["results"]) rows.push_back(SelectionFromJson(r));
  const ReportDocument report = RenderAlignmentReport(rows);
  EXPECT_NE(report.markdown.find(
                "| 18 | debris | indicator warning board with wooden frame | 0.0 | 0.7 | yes |"),
            std::string::npos);
  EXPECT_NE(report.markdown.find("| 1 | car | car | 1.0 | 1.0 |  |"), std::string::npos);
  EXPECT_EQ(report.data["rows"].size(), 18u);
}

TEST(ReportTest, EmptyAlignmentReportIsHeaderOnly) {
  const ReportDocument r = RenderAlignmentReport({});
  EXPECT_EQ(std::count(r.markdown.begin(), r.markdown.end(), '\n'), 2);
  EXPECT_TRUE(r.data["rows"].empty());
}

TEST(ReportTest, ComparisonTable) {
  const auto entries = ParseComparisonEntries(
      ReadJsonFile(testing::TestdataDir() / "comparison_table.json"));
  const ReportDocument r = RenderComparisonReport(entries);
  EXPECT_NE(r.markdown.find("| Grounding DINO + | 32.56 |"), std::string::npos);
  EXPECT_NE(r.markdown.find("| GLIP (zero-shot) | 15.73 |"), std::string::npos);
  EXPECT_EQ(r.data["rows"].size(), 5u);

  const std::vector<ComparisonEntry> dup = {{"GLIP +", 27.27}, {"GLIP +", 27.27}};
  EXPECT_EQ(RenderComparisonReport(dup).data["rows"].size(), 2u);
  EXPECT_EQ(RenderComparisonReport(std::vector<ComparisonEntry>{{"x", 1}}).data["rows"].size(), 1u);
  EXPECT_THROW(ParseComparisonEntries(json::parse(R"({"rows": 3})")), ParseError);
}

}  // namespace
}  // namespace groundalign
