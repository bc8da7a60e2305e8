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
#ifndef GROUNDALIGN_REPORTS_H_
#define GROUNDALIGN_REPORTS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "groundalign/evaluation.h"
#include "groundalign/expressions.h"
#include "json.hpp"

namespace groundalign {

// A report rendered twice: as a markdown table and as JSON.
struct ReportDocument {
  std::string markdown;
  nlohmann::json data;
};

// Shortest decimal rendering with at least one fractional digit and at most
// four: 0.7 -> "0.7", 1 -> "1.0", 1/3 -> "0.3333".
std::string FormatScore(double value);

// Columns: class index, class name, referential expression, ACC before,
// ACC after, improved. A row is flagged improved when ACC after > ACC before.
ReportDocument RenderAlignmentReport(std::span<const SelectionResult> results);

struct ComparisonEntry {
  std::string method;
  double map = 0.0;
};

// Rows in the given order, duplicates kept.
ReportDocument RenderComparisonReport(std::span<const ComparisonEntry> entries);
std::vector<ComparisonEntry> ParseComparisonEntries(const nlohmann::json& doc);

ReportDocument RenderEvalReport(const EvalReport& report,
                                const std::map<int64_t, std::string>& class_names);

}  // namespace groundalign

#endif  // GROUNDALIGN_REPORTS_H_
