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
#ifndef GROUNDALIGN_PSEUDOLABEL_H_
#define GROUNDALIGN_PSEUDOLABEL_H_

// Iterative pseudo-labelling: label unlabeled images with the current model,
// merge with human labels, fine-tune, regenerate labels with the new model,
// and repeat until the stopping rule fires.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/detector_client.h"
#include "groundalign/errors.h"
#include "groundalign/protocol.h"
#include "json.hpp"

namespace groundalign {

inline constexpr double kDefaultEta = 0.3;

// Confidence threshold a detection must exceed (strictly) to become a
// pseudo label, with optional per-category overrides.
struct EtaConfig {
  double eta = kDefaultEta;
  std::map<int64_t, double> per_category;

  double For(int64_t category_id) const;
  // Throws ConfigError unless every threshold lies in [0, 1).
  void Validate() const;
};

struct PseudoLabelBatch {
  int iteration = 0;
  std::vector<GroundTruthBox> labels;  // all LabelSource::kPseudo
  ModelHandle generating_model;
  std::map<int64_t, std::string> expressions_used;

  std::map<int64_t, int> CountsByCategory() const;
  nlohmann::json ToJson() const;
};

// Raised when the detector fails part-way through a batch; `partial` holds
// the labels from the queries that completed.
class PartialBatchError : public Error {
 public:
  PartialBatchError(const std::string& message, ExitCode code,
                    PseudoLabelBatch partial)
      : Error(message), code_(code), partial_(std::move(partial)) {}
  ExitCode exit_code() const override { return code_; }
  const PseudoLabelBatch& partial() const { return partial_; }

 private:
  ExitCode code_;
  PseudoLabelBatch partial_;
};

// Queries every (image, category) pair whose category is verified on the
// image, one expression per query, and keeps detections with score > eta.
// Labels are clamped to the image and numbered from first_annotation_id.
PseudoLabelBatch GeneratePseudoLabels(
    DetectorClient& client, const ModelHandle& model,
    std::span<const ImageRecord> images,
    const std::map<int64_t, std::string>& expressions, const EtaConfig& eta,
    int iteration = 0, int64_t first_annotation_id = 1);

// Regenerates from scratch with `new_model`, which must descend from
// previous.generating_model (PreconditionError otherwise).
PseudoLabelBatch RefineBatch(const PseudoLabelBatch& previous,
                             const ModelHandle& new_model,
                             DetectorClient& client,
                             std::span<const ImageRecord> images,
                             const EtaConfig& eta,
                             int64_t first_annotation_id = 1);

struct StoppingRule {
  int max_iterations = 3;
  // Stop after `plateau_patience` consecutive iterations whose validation
  // metric improved by less than `plateau_epsilon`. 0 disables the rule.
  double plateau_epsilon = 0.0;
  int plateau_patience = 1;

  void Validate() const;
};

struct IterationRecord {
  int iteration = 0;
  std::string model_id;
  std::map<int64_t, int> label_counts;
  std::optional<double> validation_map;

  nlohmann::json ToJson() const;
};

struct IterationState {
  int iteration = 0;
  ModelHandle model;
  std::filesystem::path current_dataset;
  std::vector<IterationRecord> history;
  int finetune_calls = 0;
  // Set when the loop aborted; history holds the iterations that finished.
  std::optional<std::string> error;
  ExitCode error_code = ExitCode::kOk;
};

bool ShouldStop(const StoppingRule& rule, std::span<const IterationRecord> history);

// Held-out few-shot images and every human box on them.
struct ValidationSet {
  std::vector<ImageRecord> images;
  std::vector<GroundTruthBox> gts;

  bool empty() const { return images.empty(); }
};

// mAP@0.5 of `model` on the validation images; nullopt for an empty set.
std::optional<double> ValidationMap(DetectorClient& client,
                                    const ModelHandle& model,
                                    const ValidationSet& validation,
                                    const std::map<int64_t, std::string>& expressions);

struct LoopInputs {
  ModelHandle initial_model;
  std::vector<CategoryDef> categories;
  // Images written into every training dataset.
  std::vector<ImageRecord> train_images;
  std::vector<GroundTruthBox> human_labels;
  // Images that receive pseudo labels.
  std::vector<ImageRecord> unlabeled_images;
  std::map<int64_t, std::string> expressions;
  EtaConfig eta;
  StoppingRule stopping;
  FinetuneConfig finetune;
  ValidationSet validation;
  double dedup_iou = kDefaultDedupIou;
  // Receives iter_<k>/{dataset,pseudo_labels,metrics}.json.
  std::filesystem::path workdir;
};

IterationState RunIterationLoop(DetectorClient& client, const LoopInputs& inputs);

}  // namespace groundalign

#endif  // GROUNDALIGN_PSEUDOLABEL_H_
