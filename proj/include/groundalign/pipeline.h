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
#ifndef GROUNDALIGN_PIPELINE_H_
#define GROUNDALIGN_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/detector_client.h"
#include "groundalign/evaluation.h"
#include "groundalign/expressions.h"
#include "groundalign/pseudolabel.h"
#include "groundalign/reports.h"
#include "json.hpp"

namespace groundalign {

inline constexpr const char* kToolVersion = "1.0.0";
// Overrides the detector adapter spec when set.
inline constexpr const char* kDetectorEnvVar = "GROUNDALIGN_DETECTOR";

struct RunConfig {
  // Relative paths below resolve against workdir.
  std::filesystem::path workdir = ".";
  std::filesystem::path dataset;
  std::filesystem::path sidecar;
  std::filesystem::path terms;
  std::filesystem::path selection;
  std::filesystem::path out;

  std::string detector;
  std::string model = "m0";

  int n_candidates = kDefaultCandidateCount;
  int shots_k = 10;
  double eta = kDefaultEta;
  std::map<int64_t, double> eta_per_category;
  double iou_threshold = kDefaultMatchIou;
  double dedup_iou = kDefaultDedupIou;

  int max_iterations = 3;
  double plateau_epsilon = 0.0;
  int plateau_patience = 1;
  double holdout_fraction = 0.0;

  double focal_weight = 1.0;
  double l1_weight = 5.0;
  double giou_weight = 2.0;
  int epochs = 1;

  // Use raw class names instead of selected expressions.
  bool use_class_names = false;
  // Also pseudo-label images that carry human boxes.
  bool pseudo_on_labeled = false;
  uint64_t seed = 0;
  size_t batch_size = 32;

  std::filesystem::path Resolve(const std::filesystem::path& p) const;
  // Throws ConfigError on out-of-range values.
  void Validate() const;
  FinetuneConfig Finetune() const;
  EtaConfig Eta() const;
  StoppingRule Stopping() const;
  nlohmann::json ToJson() const;
};

// Config spec with the environment override applied. A relative mock script
// path resolves against workdir.
std::string EffectiveDetectorSpec(const RunConfig& config);

// Loads the dataset (and sidecar, when configured).
Dataset LoadTrainingData(const RunConfig& config);

struct AlignOutput {
  std::vector<SelectionResult> results;
  ReportDocument report;
  std::filesystem::path out_dir;
};

// Few-shot sets, candidate generation, detection, scoring and selection for
// every category. Writes selection.json, alignment_report.{md,json} and
// align_manifest.json under out (default "align"). On failure the completed
// categories are saved before the error propagates.
AlignOutput RunAlign(const RunConfig& config, DetectorClient& client);

// category id -> expression text from a selection file, falling back to the
// class name; or class names only when config.use_class_names.
std::map<int64_t, std::string> ResolveExpressions(const RunConfig& config,
                                                  const Dataset& dataset);

// One pseudo-label batch from config.model. Writes pseudo_labels.json,
// dataset.json (merged) and gen_pseudo_manifest.json under out.
PseudoLabelBatch RunGenPseudo(const RunConfig& config, DetectorClient& client);

// Full loop. Writes iter_<k>/ artifacts and run_manifest.json under out
// (default "iterate"). Loop failures are reported in the returned state.
IterationState RunIterate(const RunConfig& config, DetectorClient& client);

// Detections for every verified (image, category) of the dataset, written as
// COCO results to out/results.json.
std::vector<Detection> RunPredict(const RunConfig& config, DetectorClient& client);

// "0.5" -> {0.5}; "0.5:0.95" -> COCO thresholds; "lo:hi:step" -> range.
std::vector<double> ParseIouSpec(const std::string& spec);

struct EvalCommand {
  std::filesystem::path results;
  std::filesystem::path gt;
  std::filesystem::path sidecar;
  std::string iou = "0.5:0.95";
  std::filesystem::path out;  // directory; empty = do not write
};

EvalReport RunEval(const RunConfig& config, const EvalCommand& command,
                   ReportDocument* rendered = nullptr);

}  // namespace groundalign

#endif  // GROUNDALIGN_PIPELINE_H_
