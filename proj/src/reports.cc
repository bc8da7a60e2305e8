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
#include "groundalign/reports.h"

#include <cmath>

#include "fmt/format.h"
#include "groundalign/errors.h"

namespace groundalign {
namespace {

using nlohmann::json;

std::string EscapeCell(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out += "\\|";
    else out.push_back(c);
  }
  return out;
}

}  // namespace

std::string FormatScore(double value) {
  for (int digits = 1; digits < 4; ++digits) {
    const double scale = std::pow(10.0, digits);
    if (std::fabs(std::round(value * scale) / scale - value) < 1e-12) {
      return fmt::format("{:.{}f}", value, digits);
    }
  }
  return fmt::format("{:.4f}", value);
}

ReportDocument RenderAlignmentReport(std::span<const SelectionResult> results) {
  ReportDocument doc;
  doc.markdown =
      "| Class index | Class name | Referential expression | ACC (before) | "
      "ACC (after) | Improved |\n"
      "|---:|---|---|---:|---:|:---:|\n";
  json rows = json::array();
  for (const auto& r : results) {
    const bool improved = r.acc_after > r.acc_before;
    doc.markdown += fmt::format("| {} | {} | {} | {} | {} | {} |\n", r.category_id,
                                EscapeCell(r.class_name()), EscapeCell(r.best.text),
                                FormatScore(r.acc_before), FormatScore(r.acc_after),
                                improved ? "yes" : "");
    rows.push_back({{"category_id", r.category_id},
                    {"class_name", r.class_name()},
                    {"expression", r.best.text},
                    {"acc_before", r.acc_before},
                    {"acc_after", r.acc_after},
                    {"improved", improved}});
  }
  doc.data = {{"rows", std::move(rows)}};
  return doc;
}

ReportDocument RenderComparisonReport(std::span<const ComparisonEntry> entries) {
  ReportDocument doc;
  doc.markdown = "| Method | mAP |\n|---|---:|\n";
  json rows = json::array();
  for (const auto& e : entries) {
    doc.markdown += fmt::format("| {} | {:.2f} |\n", EscapeCell(e.method), e.map);
    rows.push_back({{"method", e.method}, {"map", e.map}});
  }
  doc.data = {{"rows", std::move(rows)}};
  return doc;
}

std::vector<ComparisonEntry> ParseComparisonEntries(const json& doc) {
  const json& rows = doc.is_object() && doc.contains("rows") ? doc["rows"] : doc;
  if (!rows.is_array()) {
    throw ParseError("comparison input must be an array of {method, map}");
  }
  std::vector<ComparisonEntry> out;
  for (size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back({rows[i].at("method").get<std::string>(),
                     rows[i].at("map").get<double>()});
    } catch (const json::exception& e) {
      throw ParseError("comparison[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

ReportDocument RenderEvalReport(const EvalReport& report,
                                const std::map<int64_t, std::string>& class_names) {
  ReportDocument doc;
  doc.markdown = fmt::format("Mode: {} ({})\n\n| Class index | Class name | AP |\n"
                             "|---:|---|---:|\n",
                             report.ModeLabel(), report.matching);
  for (const auto& [id, ap] : report.per_class_ap) {
    auto it = class_names.find(id);
    doc.markdown += fmt::format("| {} | {} | {:.4f} |\n", id,
                                it == class_names.end() ? "" : EscapeCell(it->second),
                                ap);
  }
  doc.markdown += fmt::format("| | **mAP** | **{:.4f}** |\n", report.map);
  doc.data = report.ToJson();
  return doc;
}

}  // namespace groundalign
