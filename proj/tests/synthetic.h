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

// Synthetic 18-class fixture shaped like the alignment table: every class has
// a planted referential expression that the scripted mock detector answers
// with jittered ground truth, while every other expression stays silent.

#ifndef GROUNDALIGN_TESTS_SYNTHETIC_H_
#define GROUNDALIGN_TESTS_SYNTHETIC_H_

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/json_io.h"
#include "groundalign/mock_detector.h"
#include "json.hpp"

namespace groundalign::testing {

struct ClassSpec {
  int64_t id;
  std::string name;
  std::string planted;
  // Five terms; the planted expression is one of their ordered subsets,
  // or the class name itself.
  std::vector<std::string> terms;
};

inline const std::vector<ClassSpec>& AlignmentClasses() {
  static const std::vector<ClassSpec> kClasses = {
      {1, "car", "car", {"sedan", "automobile", "passenger vehicle", "hatchback", "coupe"}},
      {2, "truck", "lorry", {"lorry", "heavy", "cargo hauler", "freight", "cab"}},
      {3, "construction vehicle", "lift shovel excavator",
       {"lift", "shovel", "excavator", "yellow", "tracked"}},
      {4, "bus", "bus", {"coach", "transit", "double decker", "shuttle", "long"}},
      {5, "trailer", "large cargo box on the trailer",
       {"large", "cargo box", "on the trailer", "towed", "flatbed"}},
      {6, "emergency", "emergency police wagon",
       {"emergency", "police", "wagon", "siren", "ambulance"}},
      {7, "motorcycle", "narrow motorcycle",
       {"narrow", "motorcycle", "motorbike", "rider", "scooter"}},
      {8, "bicycle", "bicycle bike", {"bicycle", "bike", "pedal", "cycle", "two wheeler"}},
      {9, "adult", "adult people", {"adult", "people", "grown", "pedestrian", "walking"}},
      {10, "child", "single little short youth children",
       {"single", "little", "short", "youth", "children"}},
      {11, "police officer", "traffic policeman",
       {"traffic", "policeman", "uniform", "officer", "cop"}},
      {12, "construction worker", "construction workman people",
       {"construction", "workman", "people", "helmet", "vest"}},
      {13, "personal mobility", "small kick scooter",
       {"small", "kick", "scooter", "electric", "rider"}},
      {14, "stroller", "stroller", {"pram", "baby carriage", "buggy", "pushchair", "infant"}},
      {15, "pushable pullable", "pushable pullable garbage container",
       {"pushable", "pullable", "garbage", "container", "bin"}},
      {16, "barrier", "single short tarp barrier",
       {"single", "short", "tarp", "barrier", "fence"}},
      {17, "traffic cone", "traffic cone", {"cone", "orange", "pylon", "road marker", "striped"}},
      {18, "debris", "indicator warning board with wooden frame",
       {"indicator", "warning board", "with", "wooden frame", "debris pile"}},
  };
  return kClasses;
}

inline ResponsePolicy Jittered(double floor) {
  ResponsePolicy p;
  p.kind = PolicyKind::kJitteredOracle;
  p.iou_floor = floor;
  p.score_min = 0.5;
  p.score_max = 0.99;
  return p;
}

struct SyntheticOptions {
  int labeled_per_class = 10;
  int unlabeled_per_class = 4;
  int test_per_class = 4;
  uint64_t seed = 1;
  // Drop classes whose planted expression is the class name itself.
  bool only_renamed = false;
  // Mock stages for the planted expression of every class.
  std::vector<ResponsePolicy> stages = {Jittered(0.7)};
};

struct SyntheticFixture {
  std::vector<ClassSpec> classes;
  Dataset truth;   // every image and box, known only to the mock
  Dataset train;   // labeled images with boxes plus unlabeled images without
  Dataset test;    // held-out images with boxes
  MockScript script;

  nlohmann::json TermsJson() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& c : classes) j[std::to_string(c.id)] = c.terms;
    return j;
  }

  // Writes truth.json, train.json, test.json, terms.json and mock.json.
  void WriteTo(const std::filesystem::path& dir) const {
    WriteCoco(truth, dir / "truth.json");
    WriteCoco(train, dir / "train.json");
    WriteCoco(test, dir / "test.json");
    WriteJsonFile(dir / "terms.json", TermsJson());
    nlohmann::json mock = script.ToJson();
    mock["truth"] = "truth.json";
    WriteJsonFile(dir / "mock.json", mock);
  }
};

inline SyntheticFixture MakeSynthetic(const SyntheticOptions& options = {}) {
  SyntheticFixture f;
  for (const auto& c : AlignmentClasses()) {
    if (options.only_renamed && c.planted == c.name) continue;
    f.classes.push_back(c);
    f.truth.categories.push_back({c.id, c.name});
  }
  f.train.categories = f.test.categories = f.truth.categories;

  std::set<int64_t> all_ids;
  for (const auto& c : f.classes) all_ids.insert(c.id);

  std::mt19937_64 gen(options.seed);
  int64_t image_id = 1, box_id = 1;
  auto add_image = [&](const ClassSpec& c, Dataset* split, bool labeled) {
    ImageRecord im{image_id, "img_" + std::to_string(image_id) + ".jpg", 640, 480, all_ids};
    ++image_id;
    std::uniform_int_distribution<int> size(40, 200);
    const int w = size(gen), h = size(gen);
    const int x = std::uniform_int_distribution<int>(0, 640 - w)(gen);
    const int y = std::uniform_int_distribution<int>(0, 480 - h)(gen);
    GroundTruthBox box{box_id++, im.id, c.id, BBox::FromXywh(x, y, w, h),
                       LabelSource::kHuman, std::nullopt};
    f.truth.images.push_back(im);
    f.truth.annotations.push_back(box);
    split->images.push_back(im);
    if (labeled) split->annotations.push_back(box);
  };
  for (const auto& c : f.classes) {
    for (int i = 0; i < options.labeled_per_class; ++i) add_image(c, &f.train, true);
    for (int i = 0; i < options.unlabeled_per_class; ++i) add_image(c, &f.train, false);
    for (int i = 0; i < options.test_per_class; ++i) add_image(c, &f.test, true);
  }

  f.script.seed = options.seed;
  f.script.truth = f.truth;
  for (const auto& c : f.classes) {
    f.script.rules.push_back({c.id, c.planted, options.stages});
  }
  return f;
}

}  // namespace groundalign::testing

#endif  // GROUNDALIGN_TESTS_SYNTHETIC_H_
