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

#include "groundalign/pseudolabel.h"

#include <fstream>

#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/mock_detector.h"
#include "groundalign/transport.h"
#include "gtest/gtest.h"
#include "synthetic.h"
#include "test_util.h"

namespace groundalign {
namespace {

using testing::Jittered;
using testing::MakeSynthetic;
using testing::SyntheticOptions;

ResponsePolicy Fixed(std::vector<double> scores) {
  ResponsePolicy p;
  p.kind = PolicyKind::kFixed;
  for (size_t i = 0; i < scores.size(); ++i) {
    p.fixed.push_back({{10.0 * i, 10.0, 30.0, 30.0}, scores[i]});
  }
  return p;
}

ResponsePolicy Simple(PolicyKind kind) {
  ResponsePolicy p;
  p.kind = kind;
  return p;
}

struct Harness {
  explicit Harness(MockScript script)
      : mock(std::make_shared<MockDetector>(std::move(script))),
        client(std::make_unique<LoopbackTransport>(
            [m = mock](const std::string& line) { return m->HandleLine(line); })) {}
  std::shared_ptr<MockDetector> mock;
  DetectorClient client;
};

MockScript FixedScript(std::vector<double> scores) {
  MockScript s;
  s.truth.categories = {{1, "car"}};
  s.truth.images = {{1, "a.jpg", 200, 200, {1}}, {2, "b.jpg", 200, 200, {}}};
  s.rules = {{1, "*", {Fixed(std::move(scores))}}};
  return s;
}

TEST(EtaTest, StrictThreshold) {
  Harness h(FixedScript({0.95, 0.31, 0.30, 0.29}));
  const auto images = FixedScript({}).truth.images;
  const PseudoLabelBatch batch = GeneratePseudoLabels(
      h.client, h.client.RootModel("m0"), images, {{1, "car"}}, EtaConfig{}, 0, 100);
  // Image 2 has no verified category, so only image 1 is queried.
  ASSERT_EQ(batch.labels.size(), 2u);
  EXPECT_EQ(batch.labels[0].score, 0.95);
  EXPECT_EQ(batch.labels[1].score, 0.31);
  EXPECT_EQ(batch.labels[0].id, 100);
  EXPECT_EQ(batch.labels[1].id, 101);
  EXPECT_EQ(batch.labels[0].source, LabelSource::kPseudo);
  EXPECT_EQ(batch.CountsByCategory().at(1), 2);
}

TEST(EtaTest, ZeroKeepsEverythingPositive) {
  Harness h(FixedScript({0.95, 0.31, 0.30, 0.29}));
  EtaConfig eta;
  eta.eta = 0.0;
  const auto batch = GeneratePseudoLabels(h.client, h.client.RootModel("m0"),
                                          FixedScript({}).truth.images, {{1, "car"}}, eta);
  EXPECT_EQ(batch.labels.size(), 4u);
}

TEST(EtaTest, PerCategoryOverrideAndValidation) {
  EtaConfig eta;
  eta.per_category[1] = 0.5;
  EXPECT_EQ(eta.For(1), 0.5);
  EXPECT_EQ(eta.For(2), 0.3);
  Harness h(FixedScript({0.95, 0.31}));
  const auto batch = GeneratePseudoLabels(h.client, h.client.RootModel("m0"),
                                          FixedScript({}).truth.images, {{1, "car"}}, eta);
  EXPECT_EQ(batch.labels.size(), 1u);
  eta.eta = 1.0;
  EXPECT_THROW(eta.Validate(), ConfigError);
  eta.eta = -0.1;
  EXPECT_THROW(eta.Validate(), ConfigError);
}

TEST(GenerateTest, SilentMockGivesEmptyBatch) {
  MockScript s = FixedScript({});
  s.rules = {{1, "*", {Simple(PolicyKind::kSilent)}}};
  Harness h(s);
  const auto batch = GeneratePseudoLabels(h.client, h.client.RootModel("m0"),
                                          s.truth.images, {{1, "car"}}, EtaConfig{});
  EXPECT_TRUE(batch.labels.empty());
  EXPECT_THROW(GeneratePseudoLabels(h.client, h.client.RootModel("m0"), s.truth.images,
                                    {}, EtaConfig{}),
               PreconditionError);
}

TEST(GenerateTest, AdapterFailureKeepsPartialBatch) {
  MockScript s = FixedScript({0.9});
  for (int i = 3; i < 300; ++i) s.truth.images.push_back({i, "x" + std::to_string(i), 200, 200, {1}});
  auto mock = std::make_shared<MockDetector>(s);
  int calls = 0;
  DetectorClient client(std::make_unique<LoopbackTransport>([&](const std::string& line) {
    if (++calls > 1) throw TransportError("peer vanished", 1, false);
    return mock->HandleLine(line);
  }),
                        ClientOptions{256, 1});
  try {
    GeneratePseudoLabels(client, client.RootModel("m0"), s.truth.images, {{1, "car"}},
                         EtaConfig{});
    FAIL() << "expected PartialBatchError";
  } catch (const PartialBatchError& e) {
    EXPECT_EQ(e.exit_code(), ExitCode::kAdapter);
    EXPECT_EQ(e.partial().labels.size(), 128u);
  }
}

TEST(RefineTest, RequiresDescendantModel) {
  testing::TempDir dir;
  std::ofstream(dir / "d.json") << "{}";
  Harness h(FixedScript({0.9}));
  const auto images = FixedScript({}).truth.images;
  const ModelHandle m0 = h.client.RootModel("m0");
  const auto batch0 = GeneratePseudoLabels(h.client, m0, images, {{1, "car"}}, EtaConfig{});
  const ModelHandle m1 = h.client.Finetune(m0, dir / "d.json", FinetuneConfig{});
  const auto batch1 = RefineBatch(batch0, m1, h.client, images, EtaConfig{});
  EXPECT_EQ(batch1.iteration, 1);
  EXPECT_EQ(batch1.expressions_used, batch0.expressions_used);
  // Fixed responses do not depend on the model, so the labels are identical.
  ASSERT_EQ(batch1.labels.size(), batch0.labels.size());
  EXPECT_EQ(batch1.labels[0].bbox, batch0.labels[0].bbox);

  const ModelHandle other = h.client.RootModel("other");
  EXPECT_THROW(RefineBatch(batch0, other, h.client, images, EtaConfig{}), PreconditionError);
  EXPECT_THROW(RefineBatch(batch1, m0, h.client, images, EtaConfig{}), PreconditionError);
}

TEST(StoppingTest, CapAndPlateau) {
  StoppingRule rule{3, 0.0, 1};
  std::vector<IterationRecord> h;
  EXPECT_FALSE(ShouldStop(rule, h));
  for (int i = 0; i <= 3; ++i) {
    h.push_back({i, "m", {}, 0.5});
    EXPECT_EQ(ShouldStop(rule, h), i == 3);
  }
  StoppingRule plateau{10, 0.01, 2};
  std::vector<IterationRecord> p = {{0, "m", {}, 0.5}, {1, "m", {}, 0.6}, {2, "m", {}, 0.605}};
  EXPECT_FALSE(ShouldStop(plateau, p));
  p.push_back({3, "m", {}, 0.606});
  EXPECT_TRUE(ShouldStop(plateau, p));
  EXPECT_THROW((StoppingRule{0, 0, 1}).Validate(), ConfigError);
}

LoopInputs SyntheticLoop(const testing::SyntheticFixture& f, const std::filesystem::path& workdir,
                         DetectorClient& client) {
  LoopInputs in;
  in.initial_model = client.RootModel("m0");
  in.categories = f.train.categories;
  in.train_images = f.train.images;
  for (const auto& a : f.train.annotations) in.human_labels.push_back(a);
  std::set<int64_t> labeled;
  for (const auto& a : f.train.annotations) labeled.insert(a.image_id);
  for (const auto& im : f.train.images) {
    if (!labeled.count(im.id)) in.unlabeled_images.push_back(im);
  }
  for (const auto& c : f.classes) in.expressions[c.id] = c.planted;
  in.validation.images = f.test.images;
  in.validation.gts = f.test.annotations;
  in.workdir = workdir;
  return in;
}

TEST(LoopTest, SilentThenOracle) {
  SyntheticOptions opt;
  opt.labeled_per_class = 2;
  opt.unlabeled_per_class = 2;
  opt.test_per_class = 1;
  opt.stages = {Simple(PolicyKind::kSilent), Simple(PolicyKind::kOracle)};
  const auto f = MakeSynthetic(opt);
  Harness h(f.script);
  testing::TempDir dir;
  LoopInputs in = SyntheticLoop(f, dir.path(), h.client);
  in.stopping.max_iterations = 2;
  const IterationState state = RunIterationLoop(h.client, in);
  ASSERT_FALSE(state.error) << *state.error;
  ASSERT_EQ(state.history.size(), 3u);
  int total0 = 0, total1 = 0;
  for (const auto& [id, n] : state.history[0].label_counts) total0 += n;
  for (const auto& [id, n] : state.history[1].label_counts) total1 += n;
  EXPECT_EQ(total0, 0);
  EXPECT_EQ(total1, 36);
  EXPECT_EQ(state.history[0].validation_map, 0.0);
  EXPECT_EQ(state.history[1].validation_map, 1.0);
  EXPECT_EQ(state.finetune_calls, 2);
  EXPECT_EQ(state.model.id, "m2");
  for (int k = 0; k <= 2; ++k) {
    const auto it = dir / ("iter_" + std::to_string(k));
    EXPECT_TRUE(std::filesystem::exists(it / "dataset.json"));
    EXPECT_TRUE(std::filesystem::exists(it / "pseudo_labels.json"));
    EXPECT_TRUE(std::filesystem::exists(it / "metrics.json"));
  }
  // Merged datasets stay loadable, and pseudo ids never collide with human ids.
  const Dataset merged = LoadCoco(dir / "iter_1" / "dataset.json");
  EXPECT_EQ(merged.annotations.size(), f.train.annotations.size() + 36);
  // The first finetune trained on the iteration-0 dataset.
  EXPECT_EQ(h.mock->finetune_log()[0].dataset, (dir / "iter_0" / "dataset.json").string());
}

TEST(LoopTest, AbortIsReportedInState) {
  SyntheticOptions opt;
  opt.labeled_per_class = 1;
  opt.unlabeled_per_class = 1;
  opt.test_per_class = 0;
  const auto f = MakeSynthetic(opt);
  auto mock = std::make_shared<MockDetector>(f.script);
  DetectorClient client(std::make_unique<LoopbackTransport>([mock](const std::string& line) {
    if (line.find("\"finetune\"") != std::string::npos) {
      return std::string(R"({"v":1,"id":)") +
             std::to_string(nlohmann::json::parse(line)["id"].get<int64_t>()) +
             R"(,"ok":false,"error":{"kind":"oom","message":"out of memory"}})";
    }
    return mock->HandleLine(line);
  }));
  testing::TempDir dir;
  const IterationState state = RunIterationLoop(client, SyntheticLoop(f, dir.path(), client));
  ASSERT_TRUE(state.error.has_value());
  EXPECT_EQ(state.error_code, ExitCode::kAdapter);
  EXPECT_EQ(state.history.size(), 1u);
  EXPECT_EQ(state.finetune_calls, 0);
}

}  // namespace
}  // namespace groundalign
