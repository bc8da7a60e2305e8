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

#include <algorithm>

#include "groundalign/evaluation.h"
#include "groundalign/json_io.h"
#include "spdlog/spdlog.h"

namespace groundalign {
namespace {

using nlohmann::json;

// Queries per client call; a failure loses at most one chunk.
constexpr size_t kChunk = 128;

std::filesystem::path IterationDir(const std::filesystem::path& workdir, int k) {
  return workdir / ("iter_" + std::to_string(k));
}

int64_t NextAnnotationId(std::span<const GroundTruthBox> human) {
  int64_t max_id = 0;
  for (const auto& h : human) max_id = std::max(max_id, h.id);
  return max_id + 1;
}

}  // namespace

double EtaConfig::For(int64_t category_id) const {
  auto it = per_category.find(category_id);
  return it == per_category.end() ? eta : it->second;
}

void EtaConfig::Validate() const {
  auto check = [](double v) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw ConfigError("eta must lie in [0,1), got " + std::to_string(v));
    }
  };
  check(eta);
  for (const auto& [id, v] : per_category) check(v);
}

void StoppingRule::Validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (plateau_epsilon < 0.0) throw ConfigError("plateau_epsilon must be >= 0");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
}

std::map<int64_t, int> PseudoLabelBatch::CountsByCategory() const {
  std::map<int64_t, int> counts;
  for (const auto& [id, text] : expressions_used) counts[id] = 0;
  for (const auto& l : labels) ++counts[l.category_id];
  return counts;
}

json PseudoLabelBatch::ToJson() const {
  json exprs = json::object();
  for (const auto& [id, text] : expressions_used) exprs[std::to_string(id)] = text;
  json items = json::array();
  for (const auto& l : labels) {
    const auto xywh = l.bbox.ToXywh();
    items.push_back({{"id", l.id},
                     {"image_id", l.image_id},
                     {"category_id", l.category_id},
                     {"bbox", xywh},
                     {"score", l.score.value_or(0.0)},
                     {"source", "pseudo"}});
  }
  return {{"iteration", iteration},
          {"model", generating_model.id},
          {"expressions_used", std::move(exprs)},
          {"labels", std::move(items)}};
}

json IterationRecord::ToJson() const {
  json counts = json::object();
  for (const auto& [id, n] : label_counts) counts[std::to_string(id)] = n;
  return {{"iteration", iteration},
          {"model", model_id},
          {"label_counts", std::move(counts)},
          {"validation_map", validation_map ? json(*validation_map) : json(nullptr)},
          {"metric", "mAP@0.50 on held-out few-shot images"}};
}

PseudoLabelBatch GeneratePseudoLabels(
    DetectorClient& client, const ModelHandle& model,
    std::span<const ImageRecord> images,
    const std::map<int64_t, std::string>& expressions, const EtaConfig& eta,
    int iteration, int64_t first_annotation_id) {
  if (expressions.empty()) throw PreconditionError("no expressions to query");
  eta.Validate();

  PseudoLabelBatch batch;
  batch.iteration = iteration;
  batch.generating_model = model;
  batch.expressions_used = expressions;

  std::vector<DetectionQuery> queries;
  std::vector<const ImageRecord*> query_images;
  for (const auto& image : images) {
    for (const auto& [category_id, text] : expressions) {
      if (!image.IsVerified(category_id)) continue;
      queries.push_back({image.id, image.file_name, text, category_id});
      query_images.push_back(&image);
    }
  }

  int64_t next_id = first_annotation_id;
  for (size_t begin = 0; begin < queries.size(); begin += kChunk) {
    const size_t end = std::min(queries.size(), begin + kChunk);
    std::vector<std::vector<Detection>> groups;
    try {
      groups = client.Detect(
          model, std::span<const DetectionQuery>(queries).subspan(begin, end - begin));
    } catch (const Error& e) {
      throw PartialBatchError(
          "pseudo-label generation stopped after " + std::to_string(begin) + " of " +
              std::to_string(queries.size()) + " queries: " + e.what(),
          e.exit_code(), std::move(batch));
    }
    for (size_t i = begin; i < end; ++i) {
      const DetectionQuery& q = queries[i];
      const ImageRecord& image = *query_images[i];
      const double threshold = eta.For(q.category_id);
      for (const Detection& d : groups[i - begin]) {
        if (!(d.score > threshold)) continue;
        GroundTruthBox label;
        label.id = next_id++;
        label.image_id = image.id;
        label.category_id = q.category_id;
        label.bbox = d.bbox.ClampedTo(image.width, image.height);
        label.source = LabelSource::kPseudo;
        label.score = d.score;
        batch.labels.push_back(std::move(label));
      }
    }
  }
  return batch;
}

PseudoLabelBatch RefineBatch(const PseudoLabelBatch& previous,
                             const ModelHandle& new_model,
                             DetectorClient& client,
                             std::span<const ImageRecord> images,
                             const EtaConfig& eta, int64_t first_annotation_id) {
  if (!client.lineage().IsDescendant(new_model.id, previous.generating_model.id)) {
    throw PreconditionError("model " + new_model.id + " does not descend from " +
                            previous.generating_model.id);
  }
  return GeneratePseudoLabels(client, new_model, images, previous.expressions_used,
                              eta, previous.iteration + 1, first_annotation_id);
}

bool ShouldStop(const StoppingRule& rule, std::span<const IterationRecord> history) {
  if (history.empty()) return false;
  if (history.back().iteration >= rule.max_iterations) return true;
  if (rule.plateau_epsilon <= 0.0) return false;
  int flat = 0;
  for (size_t i = history.size(); i > 1; --i) {
    const auto& cur = history[i - 1].validation_map;
    const auto& prev = history[i - 2].validation_map;
    if (!cur || !prev || *cur - *prev >= rule.plateau_epsilon) break;
    ++flat;
  }
  return flat >= rule.plateau_patience;
}

std::optional<double> ValidationMap(DetectorClient& client,
                                    const ModelHandle& model,
                                    const ValidationSet& validation,
                                    const std::map<int64_t, std::string>& expressions) {
  if (validation.empty()) return std::nullopt;
  std::vector<DetectionQuery> queries;
  for (const auto& image : validation.images) {
    for (const auto& [category_id, text] : expressions) {
      if (!image.IsVerified(category_id)) continue;
      queries.push_back({image.id, image.file_name, text, category_id});
    }
  }
  std::vector<Detection> detections;
  for (auto& group : client.Detect(model, queries)) {
    for (auto& d : group) detections.push_back(std::move(d));
  }
  const std::vector<double> thresholds = {0.5};
  const Federation federation = FederationOf(validation.images);
  return MeanAp(detections, validation.gts, thresholds, &federation).map;
}

IterationState RunIterationLoop(DetectorClient& client, const LoopInputs& in) {
  in.eta.Validate();
  in.stopping.Validate();

  IterationState state;
  state.model = in.initial_model;
  const int64_t first_id = NextAnnotationId(in.human_labels);

  // Writes the merged dataset and bookkeeping for one finished iteration.
  auto record = [&](const PseudoLabelBatch& batch) {
    const auto dir = IterationDir(in.workdir, batch.iteration);
    Dataset merged{in.categories, in.train_images,
                   MergeAnnotations(in.human_labels, batch.labels, in.dedup_iou)};
    WriteCoco(merged, dir / "dataset.json");
    WriteJsonFile(dir / "pseudo_labels.json", batch.ToJson());

    IterationRecord rec;
    rec.iteration = batch.iteration;
    rec.model_id = batch.generating_model.id;
    rec.label_counts = batch.CountsByCategory();
    rec.validation_map =
        ValidationMap(client, batch.generating_model, in.validation, in.expressions);
    WriteJsonFile(dir / "metrics.json", rec.ToJson());
    spdlog::info("iteration {}: model {}, {} pseudo labels, val mAP@0.5 {}",
                 rec.iteration, rec.model_id, batch.labels.size(),
                 rec.validation_map ? std::to_string(*rec.validation_map) : "n/a");

    state.iteration = batch.iteration;
    state.current_dataset = dir / "dataset.json";
    state.history.push_back(std::move(rec));
  };

  try {
    PseudoLabelBatch batch = GeneratePseudoLabels(
        client, state.model, in.unlabeled_images, in.expressions, in.eta, 0, first_id);
    record(batch);
    while (!ShouldStop(in.stopping, state.history)) {
      ModelHandle next = client.Finetune(state.model, state.current_dataset, in.finetune);
      ++state.finetune_calls;
      state.model = next;
      batch = RefineBatch(batch, next, client, in.unlabeled_images, in.eta, first_id);
      record(batch);
    }
  } catch (const Error& e) {
    spdlog::error("iteration loop aborted: {}", e.what());
    state.error = e.what();
    state.error_code = e.exit_code();
  }
  return state;
}

}  // namespace groundalign
