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
#include "groundalign/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/rng.h"
#include "spdlog/spdlog.h"

namespace groundalign {
namespace {

using nlohmann::json;

std::filesystem::path OutDir(const RunConfig& config, const char* fallback) {
  return config.Resolve(config.out.empty() ? std::filesystem::path(fallback)
                                           : config.out);
}

json Manifest(const RunConfig& config, const std::string& command,
              const DetectorClient* client) {
  json m = {{"command", command},
            {"version", kToolVersion},
            {"seed", config.seed},
            {"config", config.ToJson()}};
  if (client) {
    m["detector"] = EffectiveDetectorSpec(config);
    m["model_lineage"] = client->lineage().ToJson();
  }
  return m;
}

std::vector<GroundTruthBox> HumanLabels(const Dataset& dataset) {
  std::vector<GroundTruthBox> out;
  for (const auto& a : dataset.annotations) {
    if (a.source == LabelSource::kHuman) out.push_back(a);
  }
  return out;
}

// Scores every candidate for one category against its few-shot set.
SelectionResult AlignCategory(const RunConfig& config, DetectorClient& client,
                              const ModelHandle& model, const CategoryDef& category,
                              const FewShotSet& shots, const PromptTermSet& terms) {
  const auto candidates =
      GenerateCandidates(category.name, terms, config.n_candidates, config.seed);

  // One query per distinct (image, expression).
  std::vector<DetectionQuery> queries;
  std::map<std::pair<std::string, std::string>, size_t> query_index;
  std::vector<std::vector<size_t>> slot(candidates.size(),
                                        std::vector<size_t>(shots.shots.size()));
  for (size_t c = 0; c < candidates.size(); ++c) {
    for (size_t j = 0; j < shots.shots.size(); ++j) {
      const ImageRecord& image = shots.shots[j].image;
      auto key = std::make_pair(image.file_name, candidates[c].text);
      auto [it, inserted] = query_index.emplace(key, queries.size());
      if (inserted) {
        queries.push_back({image.id, image.file_name, candidates[c].text, category.id});
      }
      slot[c][j] = it->second;
    }
  }
  const auto groups = client.Detect(model, queries);

  std::vector<std::vector<std::vector<Detection>>> detections(candidates.size());
  for (size_t c = 0; c < candidates.size(); ++c) {
    for (size_t j = 0; j < shots.shots.size(); ++j) {
      detections[c].push_back(groups[slot[c][j]]);
    }
  }
  return SelectBest(
      ScoreCandidates(candidates, shots, detections, config.iou_threshold));
}

json FewShotSummary(const FewShotSet& set) {
  json shots = json::array();
  for (const auto& s : set.shots) {
    shots.push_back({{"image_id", s.image.id}, {"annotation_id", s.box.id}});
  }
  return {{"shots", std::move(shots)},
          {"short", set.short_of_k},
          {"multi_instance_images", set.multi_instance_images}};
}

}  // namespace

std::filesystem::path RunConfig::Resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return workdir / p;
}

void RunConfig::Validate() const {
  if (n_candidates < 1) throw ConfigError("n_candidates must be >= 1");
  if (shots_k < 1) throw ConfigError("shots_k must be >= 1");
  if (!(iou_threshold >= 0.0 && iou_threshold < 1.0)) {
    throw ConfigError("iou_threshold must lie in [0,1)");
  }
  if (!(dedup_iou >= 0.0 && dedup_iou <= 1.0)) {
    throw ConfigError("dedup_iou must lie in [0,1]");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in [0,1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  Eta().Validate();
  Stopping().Validate();
  try {
    Finetune().Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

FinetuneConfig RunConfig::Finetune() const {
  FinetuneConfig f;
  f.focal_loss_weight = focal_weight;
  f.box_l1_weight = l1_weight;
  f.giou_weight = giou_weight;
  f.epochs = epochs;
  return f;
}

EtaConfig RunConfig::Eta() const { return {eta, eta_per_category}; }

StoppingRule RunConfig::Stopping() const {
  return {max_iterations, plateau_epsilon, plateau_patience};
}

json RunConfig::ToJson() const {
  json eta_overrides = json::object();
  for (const auto& [id, v] : eta_per_category) eta_overrides[std::to_string(id)] = v;
  return {{"workdir", workdir.string()},
          {"dataset", dataset.string()},
          {"sidecar", sidecar.string()},
          {"terms", terms.string()},
          {"selection", selection.string()},
          {"out", out.string()},
          {"detector", detector},
          {"model", model},
          {"n_candidates", n_candidates},
          {"shots_k", shots_k},
          {"eta", eta},
          {"eta_per_category", std::move(eta_overrides)},
          {"iou_threshold", iou_threshold},
          {"dedup_iou", dedup_iou},
          {"max_iterations", max_iterations},
          {"plateau_epsilon", plateau_epsilon},
          {"plateau_patience", plateau_patience},
          {"holdout_fraction", holdout_fraction},
          {"finetune", FinetuneConfigToJson(Finetune())},
          {"use_class_names", use_class_names},
          {"pseudo_on_labeled", pseudo_on_labeled},
          {"seed", seed},
          {"batch_size", batch_size}};
}

std::string EffectiveDetectorSpec(const RunConfig& config) {
  std::string spec = config.detector;
  if (const char* env = std::getenv(kDetectorEnvVar); env && *env) spec = env;
  constexpr std::string_view kMock = "mock:";
  if (spec.starts_with(kMock)) {
    return std::string(kMock) + config.Resolve(spec.substr(kMock.size())).string();
  }
  return spec;
}

Dataset LoadTrainingData(const RunConfig& config) {
  if (config.dataset.empty()) throw ConfigError("no dataset configured");
  Dataset dataset = LoadCoco(config.Resolve(config.dataset));
  if (!config.sidecar.empty()) {
    LoadFederatedSidecar(dataset, config.Resolve(config.sidecar));
  }
  return dataset;
}

AlignOutput RunAlign(const RunConfig& config, DetectorClient& client) {
  config.Validate();
  const Dataset dataset = LoadTrainingData(config);
  const auto human = HumanLabels(dataset);
  const auto sets = BuildFewShotSets(dataset.categories, dataset.images, human,
                                     config.shots_k, config.seed);
  std::map<int64_t, PromptTermSet> terms;
  if (!config.terms.empty()) terms = LoadTermSets(config.Resolve(config.terms));

  AlignOutput output;
  output.out_dir = OutDir(config, "align");
  const ModelHandle model = client.RootModel(config.model);

  json few_shot = json::object();
  auto write = [&](const char* status) {
    json results = json::array();
    for (const auto& r : output.results) results.push_back(SelectionToJson(r));
    WriteJsonFile(output.out_dir / "selection.json",
                  {{"status", status},
                   {"model", model.id},
                   {"model_stage", model.parent ? "fine-tuned" : "pre-trained"},
                   {"seed", config.seed},
                   {"iou_threshold", config.iou_threshold},
                   {"shots_k", config.shots_k},
                   {"n_candidates", config.n_candidates},
                   {"few_shot", few_shot},
                   {"results", std::move(results)}});
    output.report = RenderAlignmentReport(output.results);
    WriteTextFile(output.out_dir / "alignment_report.md", output.report.markdown);
    WriteJsonFile(output.out_dir / "alignment_report.json", output.report.data);
    WriteJsonFile(output.out_dir / "align_manifest.json",
                  Manifest(config, "align", &client));
  };

  for (const auto& category : dataset.categories) {
    const FewShotSet& set = sets.at(category.id);
    few_shot[std::to_string(category.id)] = FewShotSummary(set);
    PromptTermSet term_set{category.id, {}, TermSource::kFile};
    if (auto it = terms.find(category.id); it != terms.end()) {
      term_set = it->second;
    } else {
      spdlog::warn("no terms for category {} ({}); using the class name",
                   category.id, category.name);
    }
    try {
      output.results.push_back(
          AlignCategory(config, client, model, category, set, term_set));
    } catch (const Error& e) {
      write("partial");
      throw ContextError("category " + std::to_string(category.id) + " (" +
                             category.name + "): " + e.what(),
                         e.exit_code());
    }
  }
  write("complete");
  return output;
}

std::map<int64_t, std::string> ResolveExpressions(const RunConfig& config,
                                                  const Dataset& dataset) {
  std::map<int64_t, std::string> expressions;
  for (const auto& c : dataset.categories) expressions[c.id] = c.name;
  if (config.use_class_names) return expressions;
  if (config.selection.empty()) {
    throw ConfigError("no selection file given (use --expressions=classnames "
                      "to query raw class names)");
  }
  const json doc = ReadJsonFile(config.Resolve(config.selection));
  const json& results = doc.is_object() && doc.contains("results") ? doc["results"] : doc;
  if (!results.is_array()) throw ParseError("selection file has no results array");
  for (const json& r : results) {
    const SelectionResult s = SelectionFromJson(r);
    if (expressions.count(s.category_id)) expressions[s.category_id] = s.best.text;
  }
  return expressions;
}

PseudoLabelBatch RunGenPseudo(const RunConfig& config, DetectorClient& client) {
  config.Validate();
  const Dataset dataset = LoadTrainingData(config);
  const auto expressions = ResolveExpressions(config, dataset);
  const auto human = HumanLabels(dataset);

  std::set<int64_t> labeled;
  for (const auto& h : human) labeled.insert(h.image_id);
  std::vector<ImageRecord> targets;
  for (const auto& im : dataset.images) {
    if (config.pseudo_on_labeled || !labeled.count(im.id)) targets.push_back(im);
  }
  int64_t next_id = 1;
  for (const auto& a : dataset.annotations) next_id = std::max(next_id, a.id + 1);

  const ModelHandle model = client.RootModel(config.model);
  PseudoLabelBatch batch = GeneratePseudoLabels(client, model, targets, expressions,
                                                config.Eta(), 0, next_id);
  const auto dir = OutDir(config, "gen_pseudo");
  WriteJsonFile(dir / "pseudo_labels.json", batch.ToJson());
  WriteCoco(Dataset{dataset.categories, dataset.images,
                    MergeAnnotations(human, batch.labels, config.dedup_iou)},
            dir / "dataset.json");
  WriteJsonFile(dir / "gen_pseudo_manifest.json",
                Manifest(config, "gen-pseudo", &client));
  return batch;
}

IterationState RunIterate(const RunConfig& config, DetectorClient& client) {
  config.Validate();
  const Dataset dataset = LoadTrainingData(config);
  const auto human = HumanLabels(dataset);

  // Hold out whole labeled images so no validation box leaks into training.
  std::vector<int64_t> labeled_ids;
  for (const auto& h : human) {
    if (std::find(labeled_ids.begin(), labeled_ids.end(), h.image_id) ==
        labeled_ids.end()) {
      labeled_ids.push_back(h.image_id);
    }
  }
  std::sort(labeled_ids.begin(), labeled_ids.end());
  const auto holdout_count = static_cast<size_t>(
      std::llround(config.holdout_fraction * static_cast<double>(labeled_ids.size())));
  std::vector<int64_t> shuffled = labeled_ids;
  SeededRng rng(MixSeed(config.seed, HashString("holdout")));
  rng.Shuffle(shuffled);
  const std::set<int64_t> holdout(shuffled.begin(),
                                  shuffled.begin() + std::min(holdout_count, shuffled.size()));
  const std::set<int64_t> labeled(labeled_ids.begin(), labeled_ids.end());

  LoopInputs in;
  in.categories = dataset.categories;
  for (const auto& im : dataset.images) {
    if (holdout.count(im.id)) {
      in.validation.images.push_back(im);
      continue;
    }
    in.train_images.push_back(im);
    if (config.pseudo_on_labeled || !labeled.count(im.id)) {
      in.unlabeled_images.push_back(im);
    }
  }
  for (const auto& h : human) {
    (holdout.count(h.image_id) ? in.validation.gts : in.human_labels).push_back(h);
  }
  in.expressions = ResolveExpressions(config, dataset);
  in.eta = config.Eta();
  in.stopping = config.Stopping();
  in.finetune = config.Finetune();
  in.dedup_iou = config.dedup_iou;
  in.workdir = OutDir(config, "iterate");
  in.initial_model = client.RootModel(config.model);

  IterationState state = RunIterationLoop(client, in);

  json history = json::array();
  for (const auto& r : state.history) history.push_back(r.ToJson());
  json expressions = json::object();
  for (const auto& [id, text] : in.expressions) expressions[std::to_string(id)] = text;
  json manifest = Manifest(config, "iterate", &client);
  manifest["expressions_source"] = config.use_class_names ? "classnames" : "selection";
  if (!config.use_class_names) {
    const json sel = ReadJsonFile(config.Resolve(config.selection));
    if (sel.is_object() && sel.contains("model")) {
      manifest["selection_model"] = sel["model"];
    }
  }
  manifest["expressions"] = std::move(expressions);
  manifest["holdout_images"] = holdout;
  manifest["finetune_calls"] = state.finetune_calls;
  manifest["history"] = std::move(history);
  manifest["final_model"] = state.model.id;
  manifest["final_dataset"] = state.current_dataset.string();
  manifest["error"] = state.error ? json(*state.error) : json(nullptr);
  WriteJsonFile(in.workdir / "run_manifest.json", manifest);
  return state;
}

std::vector<Detection> RunPredict(const RunConfig& config, DetectorClient& client) {
  config.Validate();
  const Dataset dataset = LoadTrainingData(config);
  const auto expressions = ResolveExpressions(config, dataset);
  const ModelHandle model = client.RootModel(config.model);

  std::vector<DetectionQuery> queries;
  for (const auto& im : dataset.images) {
    for (const auto& [category_id, text] : expressions) {
      if (im.IsVerified(category_id)) {
        queries.push_back({im.id, im.file_name, text, category_id});
      }
    }
  }
  std::vector<Detection> detections;
  for (auto& group : client.Detect(model, queries)) {
    for (auto& d : group) detections.push_back(std::move(d));
  }
  const auto dir = OutDir(config, "predict");
  WriteJsonFile(dir / "results.json", CocoResultsJson(detections));
  WriteJsonFile(dir / "predict_manifest.json", Manifest(config, "predict", &client));
  return detections;
}

std::vector<double> ParseIouSpec(const std::string& spec) {
  auto number = [&spec](const std::string& s) {
    try {
      size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad IoU spec '" + spec + "'");
    }
  };
  std::vector<std::string> parts;
  size_t start = 0;
  for (;;) {
    const size_t colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return {number(parts[0])};
  const double lo = number(parts[0]);
  const double hi = number(parts[1]);
  const double step = parts.size() == 3 ? number(parts[2]) : 0.05;
  if (parts.size() > 3 || step <= 0.0 || hi < lo) {
    throw ConfigError("bad IoU spec '" + spec + "'");
  }
  // Work in hundredths so 0.5:0.95 yields exactly the COCO values.
  const long lo_c = std::lround(lo * 100), hi_c = std::lround(hi * 100),
             step_c = std::lround(step * 100);
  if (step_c <= 0) throw ConfigError("bad IoU spec '" + spec + "'");
  std::vector<double> out;
  for (long v = lo_c; v <= hi_c; v += step_c) out.push_back(static_cast<double>(v) / 100.0);
  return out;
}

EvalReport RunEval(const RunConfig& config, const EvalCommand& command,
                   ReportDocument* rendered) {
  if (command.results.empty() || command.gt.empty()) {
    throw ConfigError("eval needs --results and --gt");
  }
  const auto thresholds = ParseIouSpec(command.iou);
  Dataset gt = LoadCoco(config.Resolve(command.gt));
  if (!command.sidecar.empty()) {
    LoadFederatedSidecar(gt, config.Resolve(command.sidecar));
  }
  const auto detections = LoadCocoResults(config.Resolve(command.results));
  const Federation federation = FederationOf(gt.images);
  EvalReport report = MeanAp(detections, gt.annotations, thresholds, &federation);

  std::map<int64_t, std::string> names;
  for (const auto& c : gt.categories) names[c.id] = c.name;
  ReportDocument doc = RenderEvalReport(report, names);
  if (!command.out.empty()) {
    const auto dir = config.Resolve(command.out);
    WriteJsonFile(dir / "eval_report.json", doc.data);
    WriteTextFile(dir / "eval_report.md", doc.markdown);
    json manifest = Manifest(config, "eval", nullptr);
    manifest["results"] = command.results.string();
    manifest["gt"] = command.gt.string();
    manifest["iou"] = command.iou;
    WriteJsonFile(dir / "eval_manifest.json", manifest);
  }
  if (rendered) *rendered = std::move(doc);
  return report;
}

}  // namespace groundalign
