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
#ifndef GROUNDALIGN_EXPRESSIONS_H_
#define GROUNDALIGN_EXPRESSIONS_H_

// Referential expression selection: turn per-class descriptive terms into
// candidate text prompts, score each prompt's detections against the
// few-shot boxes, and keep the prompt with the best hit rate.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundalign/dataset.h"
#include "groundalign/protocol.h"
#include "json.hpp"

namespace groundalign {

// Instruction sent to the multimodal model along with an image on which the
// annotation box is drawn in red.
inline constexpr std::string_view kDescriptiveTermsPrompt =
    "Please provide five descriptive terms for the object within the red box.";

inline constexpr double kDefaultMatchIou = 0.5;
inline constexpr int kDefaultCandidateCount = 31;

struct LlmRequest {
  std::string image_ref;
  BBox box;
  std::string prompt;
};

LlmRequest BuildLlmRequest(const Shot& shot);

enum class TermSource { kFile, kLlmClient };

struct PromptTermSet {
  int64_t category_id = 0;
  std::vector<std::string> terms;
  TermSource source = TermSource::kFile;
};

// Trims terms and rejects blank or duplicate ones (std::invalid_argument).
PromptTermSet MakeTermSet(int64_t category_id, std::vector<std::string> terms,
                          TermSource source = TermSource::kFile);

// Term-set file: {"<category_id>": ["term", ...], ...}.
std::map<int64_t, PromptTermSet> ParseTermSets(const nlohmann::json& doc);
std::map<int64_t, PromptTermSet> LoadTermSets(const std::filesystem::path& path);

struct CandidateExpression {
  int64_t category_id = 0;
  int index = 0;  // 0 is the raw class name
  std::string text;
  std::vector<int> term_indices;  // positions in the term set; empty for index 0

  friend bool operator==(const CandidateExpression&,
                         const CandidateExpression&) = default;
};

// Candidate 0 is the class name. The rest are distinct non-empty subsets of
// the terms, each joined with single spaces in term-set order; the sequence
// of subsets is a seeded shuffle of all of them, truncated to `n`. Subsets
// whose text repeats an earlier candidate are skipped. An empty term set
// yields only candidate 0. More than 20 terms is rejected.
std::vector<CandidateExpression> GenerateCandidates(std::string_view class_name,
                                                    const PromptTermSet& terms,
                                                    int n, uint64_t seed);

struct ExpressionScore {
  CandidateExpression candidate;
  std::vector<bool> per_shot_hit;
  double acc = 0.0;
};

// Shot j is a hit when the best IoU between any detection for that shot and
// the shot's box is strictly greater than `iou_threshold`. Scores are ignored.
// detections[j] belongs to shot j; missing trailing entries count as empty.
ExpressionScore ScoreCandidate(const CandidateExpression& candidate,
                               const FewShotSet& shots,
                               std::span<const std::vector<Detection>> detections,
                               double iou_threshold = kDefaultMatchIou);

// Scores several candidates against the same shots. detections[c][j] holds
// candidate c's detections for shot j. Runs candidates in parallel.
std::vector<ExpressionScore> ScoreCandidates(
    std::span<const CandidateExpression> candidates, const FewShotSet& shots,
    std::span<const std::vector<std::vector<Detection>>> detections,
    double iou_threshold = kDefaultMatchIou);

namespace serial {
std::vector<ExpressionScore> ScoreCandidates(
    std::span<const CandidateExpression> candidates, const FewShotSet& shots,
    std::span<const std::vector<std::vector<Detection>>> detections,
    double iou_threshold = kDefaultMatchIou);
}  // namespace serial

struct SelectionResult {
  int64_t category_id = 0;
  CandidateExpression best;
  double acc_before = 0.0;
  double acc_after = 0.0;
  std::vector<ExpressionScore> all_scores;

  // The raw class name, i.e. the text of candidate 0.
  const std::string& class_name() const;
};

// Highest accuracy wins; ties go to candidate 0, then to the lowest index.
// Throws std::invalid_argument if `scores` is empty or lacks candidate 0.
SelectionResult SelectBest(std::vector<ExpressionScore> scores);

nlohmann::json SelectionToJson(const SelectionResult& result);
SelectionResult SelectionFromJson(const nlohmann::json& j);

}  // namespace groundalign

#endif  // GROUNDALIGN_EXPRESSIONS_H_
