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
// groundalign: few-shot detector alignment and pseudo-label tooling.
//
//   groundalign align      --dataset d.json --terms t.json --detector SPEC
//   groundalign gen-pseudo --dataset d.json --selection s.json
//   groundalign iterate    --dataset d.json --selection s.json
//   groundalign predict    --dataset d.json --selection s.json
//   groundalign eval       --results r.json --gt g.json --iou 0.5:0.95
//   groundalign report     --selection s.json | --comparison c.json
//   groundalign mock-detector --script m.json [--http PORT]

#include <iostream>
#include <memory>
#include <mutex>
#include <string>

#include "CLI11.hpp"
#include "groundalign/detector_client.h"
#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/mock_detector.h"
#include "groundalign/pipeline.h"
#include "groundalign/reports.h"
#include "httplib.h"
#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace groundalign {
namespace {

std::unique_ptr<DetectorClient> Connect(const RunConfig& config) {
  const std::string spec = EffectiveDetectorSpec(config);
  if (spec.empty()) {
    throw ConfigError(std::string("no detector configured (--detector or ") +
                      kDetectorEnvVar + ")");
  }
  ClientOptions options;
  options.batch_size = config.batch_size;
  return ConnectDetector(spec, options);
}

int ServeMockStdio(MockDetector& mock) {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << mock.HandleLine(line) << '\n' << std::flush;
  }
  return 0;
}

int ServeMockHttp(MockDetector& mock, int port) {
  httplib::Server server;
  std::mutex mu;
  auto handler = [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard<std::mutex> lock(mu);
    res.set_content(mock.HandleLine(req.body) + "\n", "application/json");
  };
  server.Post("/detect", handler);
  server.Post("/finetune", handler);
  spdlog::info("mock detector listening on 127.0.0.1:{}", port);
  if (!server.listen("127.0.0.1", port)) {
    throw TransportError("cannot listen on port " + std::to_string(port), 1, false);
  }
  return 0;
}

std::vector<SelectionResult> SelectionResults(const std::filesystem::path& path) {
  const nlohmann::json doc = ReadJsonFile(path);
  const nlohmann::json& rows =
      doc.is_object() && doc.contains("results") ? doc["results"] : doc;
  if (!rows.is_array()) throw ParseError(path.string() + ": no results array");
  std::vector<SelectionResult> out;
  for (const auto& r : rows) out.push_back(SelectionFromJson(r));
  return out;
}

void WriteReport(const ReportDocument& doc, const std::filesystem::path& dir,
                 const std::string& stem) {
  if (dir.empty()) return;
  WriteTextFile(dir / (stem + ".md"), doc.markdown);
  WriteJsonFile(dir / (stem + ".json"), doc.data);
}

int Main(int argc, char** argv) {
  CLI::App app{"Few-shot detector alignment and pseudo-label tooling"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "Config file (key = value); flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig config;
  std::string expressions_mode = "selection";
  std::string log_level = "info";
  app.add_option("--workdir", config.workdir, "Base directory for relative paths");
  app.add_option("--dataset", config.dataset, "COCO dataset JSON");
  app.add_option("--sidecar", config.sidecar, "Federated verified-category sidecar");
  app.add_option("--terms", config.terms, "Descriptive term sets JSON");
  app.add_option("--selection", config.selection, "Selection JSON from align");
  app.add_option("--out", config.out, "Output directory");
  app.add_option("--detector", config.detector,
                 std::string("Detector adapter spec (env ") + kDetectorEnvVar +
                     " overrides)");
  app.add_option("--model", config.model, "Initial model id");
  app.add_option("--n-candidates", config.n_candidates, "Candidates per category");
  app.add_option("--shots", config.shots_k, "Few-shot images per category");
  app.add_option("--eta", config.eta, "Pseudo-label score threshold");
  app.add_option("--eta-category", config.eta_per_category,
                 "Per-category threshold override (id value)");
  app.add_option("--iou-threshold", config.iou_threshold, "ACC match IoU");
  app.add_option("--dedup-iou", config.dedup_iou, "Human/pseudo dedup IoU");
  app.add_option("--max-iterations", config.max_iterations, "Finetune rounds");
  app.add_option("--plateau-epsilon", config.plateau_epsilon,
                 "Stop when validation mAP gains less than this");
  app.add_option("--plateau-patience", config.plateau_patience,
                 "Consecutive small gains before stopping");
  app.add_option("--holdout", config.holdout_fraction,
                 "Fraction of labeled images held out for validation");
  app.add_option("--focal-weight", config.focal_weight, "Focal loss weight");
  app.add_option("--l1-weight", config.l1_weight, "Box L1 loss weight");
  app.add_option("--giou-weight", config.giou_weight, "GIoU loss weight");
  app.add_option("--epochs", config.epochs, "Epochs per finetune");
  app.add_option("--expressions", expressions_mode, "selection | classnames")
      ->check(CLI::IsMember({"selection", "classnames"}));
  app.add_flag("--pseudo-on-labeled", config.pseudo_on_labeled,
               "Also pseudo-label images with human boxes");
  app.add_option("--seed", config.seed, "Random seed");
  app.add_option("--batch-size", config.batch_size, "Queries per detect message");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  auto* align = app.add_subcommand("align", "Select a referential expression per class");
  auto* gen = app.add_subcommand("gen-pseudo", "Generate one pseudo-label batch");
  auto* iterate = app.add_subcommand("iterate", "Run the pseudo-label/finetune loop");
  auto* predict = app.add_subcommand("predict", "Write COCO detections for a dataset");

  EvalCommand eval_cmd;
  auto* eval = app.add_subcommand("eval", "COCO-style mAP of detections");
  eval->add_option("--results", eval_cmd.results, "COCO results JSON")->required();
  eval->add_option("--gt", eval_cmd.gt, "Ground-truth COCO JSON")->required();
  eval->add_option("--gt-sidecar", eval_cmd.sidecar, "Federated sidecar for the GT");
  eval->add_option("--iou", eval_cmd.iou, "0.5 | 0.5:0.95 | lo:hi:step");

  std::filesystem::path comparison;
  auto* report = app.add_subcommand("report", "Render a selection or comparison table");
  report->add_option("--comparison", comparison, "Comparison rows JSON");

  std::filesystem::path script;
  int http_port = 0;
  auto* mock = app.add_subcommand("mock-detector", "Serve the built-in mock detector");
  mock->add_option("--script", script, "Mock script JSON")->required();
  mock->add_option("--http", http_port, "Serve HTTP on this port instead of stdio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }
  // Logs go to stderr so stdout stays clean for the mock's wire protocol.
  spdlog::set_default_logger(spdlog::stderr_color_mt("groundalign"));
  spdlog::set_level(spdlog::level::from_str(log_level));
  config.use_class_names = expressions_mode == "classnames";

  try {
    if (align->parsed()) {
      auto client = Connect(config);
      AlignOutput out = RunAlign(config, *client);
      std::cout << out.report.markdown;
      return 0;
    }
    if (gen->parsed()) {
      auto client = Connect(config);
      const PseudoLabelBatch batch = RunGenPseudo(config, *client);
      std::cout << batch.labels.size() << " pseudo-labels\n";
      return 0;
    }
    if (iterate->parsed()) {
      auto client = Connect(config);
      const IterationState state = RunIterate(config, *client);
      if (state.error) {
        spdlog::error("loop aborted at iteration {}: {}", state.iteration, *state.error);
        return static_cast<int>(state.error_code);
      }
      std::cout << "final model " << state.model.id << " after "
                << state.finetune_calls << " finetune call(s)\n";
      return 0;
    }
    if (predict->parsed()) {
      auto client = Connect(config);
      const auto detections = RunPredict(config, *client);
      std::cout << detections.size() << " detections\n";
      return 0;
    }
    if (eval->parsed()) {
      ReportDocument doc;
      eval_cmd.out = config.out;
      RunEval(config, eval_cmd, &doc);
      std::cout << doc.markdown;
      return 0;
    }
    if (report->parsed()) {
      ReportDocument doc;
      std::string stem;
      if (!comparison.empty()) {
        doc = RenderComparisonReport(
            ParseComparisonEntries(ReadJsonFile(config.Resolve(comparison))));
        stem = "comparison_report";
      } else if (!config.selection.empty()) {
        doc = RenderAlignmentReport(SelectionResults(config.Resolve(config.selection)));
        stem = "alignment_report";
      } else {
        throw ConfigError("report needs --selection or --comparison");
      }
      WriteReport(doc, config.Resolve(config.out), stem);
      std::cout << doc.markdown;
      return 0;
    }
    if (mock->parsed()) {
      MockDetector detector(MockScript::Load(config.Resolve(script)));
      return http_port > 0 ? ServeMockHttp(detector, http_port)
                           : ServeMockStdio(detector);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kFailure);
  }
  return static_cast<int>(ExitCode::kConfig);
}

}  // namespace
}  // namespace groundalign

int main(int argc, char** argv) { return groundalign::Main(argc, argv); }
