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
#include "groundalign/expressions.h"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/rng.h"
#include "spdlog/spdlog.h"

namespace groundalign {
namespace {

using nlohmann::json;

// Collapses runs of whitespace and trims the ends.
std::string NormalizeSpaces(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

double HitRate(const std::vector<bool>& hits) {
  if (hits.empty()) return 0.0;
  const auto n = std::count(hits.begin(), hits.end(), true);
  return static_cast<double>(n) / static_cast<double>(hits.size());
}

}  // namespace

LlmRequest BuildLlmRequest(const Shot& shot) {
  return {shot.image.file_name, shot.box.bbox,
          std::string(kDescriptiveTermsPrompt)};
}

PromptTermSet MakeTermSet(int64_t category_id, std::vector<std::string> terms,
                          TermSource source) {
  std::set<std::string> seen;
  for (auto& term : terms) {
    term = NormalizeSpaces(term);
    if (term.empty()) {
      throw std::invalid_argument("blank term for category " +
                                  std::to_string(category_id));
    }
    if (!seen.insert(term).second) {
      throw std::invalid_argument("duplicate term '" + term + "' for category " +
                                  std::to_string(category_id));
    }
  }
  return {category_id, std::move(terms), source};
}

std::map<int64_t, PromptTermSet> ParseTermSets(const json& doc) {
  if (!doc.is_object()) {
    throw ParseError("term-set file must map category ids to term lists");
  }
  std::map<int64_t, PromptTermSet> out;
  for (const auto& [key, value] : doc.items()) {
    int64_t id = 0;
    try {
      size_t used = 0;
      id = std::stoll(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ParseError("term-set key '" + key + "' is not a category id");
    }
    if (!value.is_array() ||
        !std::all_of(value.begin(), value.end(),
                     [](const json& v) { return v.is_string(); })) {
      throw ParseError("term-set entry " + key + " must be a list of strings");
    }
    try {
      out[id] = MakeTermSet(id, value.get<std::vector<std::string>>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what());
    }
  }
  return out;
}

std::map<int64_t, PromptTermSet> LoadTermSets(const std::filesystem::path& path) {
  try {
    return ParseTermSets(ReadJsonFile(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<CandidateExpression> GenerateCandidates(std::string_view class_name,
                                                    const PromptTermSet& terms,
                                                    int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("candidate count n must be >= 1");
  const std::string name = NormalizeSpaces(class_name);
  if (name.empty()) throw std::invalid_argument("class name is blank");
  std::vector<CandidateExpression> out;
  out.push_back({terms.category_id, 0, name, {}});
  const size_t k = terms.terms.size();
  if (k == 0) {
    spdlog::warn("category {} ({}) has no terms; only the class name is tried",
                 terms.category_id, name);
    return out;
  }
  if (k > 20) {
    throw std::invalid_argument("at most 20 terms per category are supported");
  }

  std::vector<uint32_t> masks((1u << k) - 1);
  for (uint32_t m = 1; m < (1u << k); ++m) masks[m - 1] = m;
  SeededRng rng(MixSeed(seed, static_cast<uint64_t>(terms.category_id)));
  rng.Shuffle(masks);

  std::set<std::string> seen = {name};
  for (uint32_t mask : masks) {
    if (static_cast<int>(out.size()) > n) break;
    CandidateExpression c;
    c.category_id = terms.category_id;
    std::string text;
    for (size_t t = 0; t < k; ++t) {
      if (!(mask & (1u << t))) continue;
      if (!text.empty()) text.push_back(' ');
      text += terms.terms[t];
      c.term_indices.push_back(static_cast<int>(t));
    }
    c.text = NormalizeSpaces(text);
    if (!seen.insert(c.text).second) continue;
    c.index = static_cast<int>(out.size());
    out.push_back(std::move(c));
  }
  return out;
}

ExpressionScore ScoreCandidate(const CandidateExpression& candidate,
                               const FewShotSet& shots,
                               std::span<const std::vector<Detection>> detections,
                               double iou_threshold) {
  ExpressionScore score{candidate, std::vector<bool>(shots.shots.size(), false), 0.0};
  for (size_t j = 0; j < shots.shots.size() && j < detections.size(); ++j) {
    double best = 0.0;
    for (const auto& d : detections[j]) {
      best = std::max(best, Iou(d.bbox, shots.shots[j].box.bbox));
    }
    score.per_shot_hit[j] = !detections[j].empty() && best > iou_threshold;
  }
  score.acc = HitRate(score.per_shot_hit);
  return score;
}

std::vector<ExpressionScore> ScoreCandidates(
    std::span<const CandidateExpression> candidates, const FewShotSet& shots,
    std::span<const std::vector<std::vector<Detection>>> detections,
    double iou_threshold) {
  if (detections.size() != candidates.size()) {
    throw std::invalid_argument("one detection table per candidate required");
  }
  std::vector<ExpressionScore> out(candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    out[c] = ScoreCandidate(candidates[c], shots, detections[c], iou_threshold);
  }
  return out;
}

namespace serial {

std::vector<ExpressionScore> ScoreCandidates(
    std::span<const CandidateExpression> candidates, const FewShotSet& shots,
    std::span<const std::vector<std::vector<Detection>>> detections,
    double iou_threshold) {
  if (detections.size() != candidates.size()) {
    throw std::invalid_argument("one detection table per candidate required");
  }
  std::vector<ExpressionScore> out;
  for (size_t c = 0; c < candidates.size(); ++c) {
    out.push_back(ScoreCandidate(candidates[c], shots, detections[c], iou_threshold));
  }
  return out;
}

}  // namespace serial

const std::string& SelectionResult::class_name() const {
  for (const auto& s : all_scores) {
    if (s.candidate.index == 0) return s.candidate.text;
  }
  return best.text;
}

SelectionResult SelectBest(std::vector<ExpressionScore> scores) {
  if (scores.empty()) throw std::invalid_argument("no scores to select from");
  const ExpressionScore* raw = nullptr;
  for (const auto& s : scores) {
    if (s.candidate.index == 0) raw = &s;
  }
  if (!raw) throw std::invalid_argument("scores lack candidate 0 (class name)");

  const ExpressionScore* best = raw;
  for (const auto& s : scores) {
    if (s.acc > best->acc ||
        (s.acc == best->acc && best->candidate.index != 0 &&
         s.candidate.index < best->candidate.index)) {
      best = &s;
    }
  }
  SelectionResult result;
  result.category_id = raw->candidate.category_id;
  result.best = best->candidate;
  result.acc_before = raw->acc;
  result.acc_after = best->acc;
  result.all_scores = std::move(scores);
  return result;
}

json SelectionToJson(const SelectionResult& result) {
  json scores = json::array();
  for (const auto& s : result.all_scores) {
    scores.push_back({{"index", s.candidate.index},
                      {"text", s.candidate.text},
                      {"term_indices", s.candidate.term_indices},
                      {"acc", s.acc},
                      {"hits", s.per_shot_hit}});
  }
  return {{"category_id", result.category_id},
          {"class_name", result.class_name()},
          {"best",
           {{"index", result.best.index},
            {"text", result.best.text},
            {"term_indices", result.best.term_indices}}},
          {"acc_before", result.acc_before},
          {"acc_after", result.acc_after},
          {"scores", std::move(scores)}};
}

SelectionResult SelectionFromJson(const json& j) {
  try {
    SelectionResult r;
    r.category_id = j.at("category_id").get<int64_t>();
    const json& best = j.at("best");
    r.best = {r.category_id, best.at("index").get<int>(),
              best.at("text").get<std::string>(),
              best.value("term_indices", std::vector<int>{})};
    r.acc_before = j.at("acc_before").get<double>();
    r.acc_after = j.at("acc_after").get<double>();
    for (const json& s : j.value("scores", json::array())) {
      ExpressionScore e;
      e.candidate = {r.category_id, s.at("index").get<int>(),
                     s.at("text").get<std::string>(),
                     s.value("term_indices", std::vector<int>{})};
      e.acc = s.at("acc").get<double>();
      e.per_shot_hit = s.value("hits", std::vector<bool>{});
      r.all_scores.push_back(std::move(e));
    }
    if (r.all_scores.empty() && j.contains("class_name")) {
      // Report-only fixtures may omit the per-candidate scores.
      ExpressionScore raw;
      raw.candidate = {r.category_id, 0, j["class_name"].get<std::string>(), {}};
      raw.acc = r.acc_before;
      r.all_scores.push_back(std::move(raw));
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("selection record: ") + e.what());
  }
}

}  // namespace groundalign
