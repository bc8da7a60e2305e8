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
#ifndef GROUNDALIGN_DATASET_H_
#define GROUNDALIGN_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "groundalign/geometry.h"
#include "json.hpp"

namespace groundalign {

struct CategoryDef {
  int64_t id = 0;
  std::string name;

  friend bool operator==(const CategoryDef&, const CategoryDef&) = default;
};

struct ImageRecord {
  int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  // Categories exhaustively annotated on this image. Empty means no category
  // is verified (a fully federated image).
  std::set<int64_t> verified_categories;

  bool IsVerified(int64_t category_id) const {
    return verified_categories.count(category_id) > 0;
  }

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class LabelSource { kHuman, kPseudo };

struct GroundTruthBox {
  int64_t id = 0;  // COCO annotation id
  int64_t image_id = 0;
  int64_t category_id = 0;
  BBox bbox;
  LabelSource source = LabelSource::kHuman;
  std::optional<double> score;  // present iff source == kPseudo

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

struct Dataset {
  std::vector<CategoryDef> categories;
  std::vector<ImageRecord> images;
  std::vector<GroundTruthBox> annotations;

  const ImageRecord* FindImage(int64_t image_id) const;
  const CategoryDef* FindCategory(int64_t category_id) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// image id -> verified category ids.
using Federation = std::map<int64_t, std::set<int64_t>>;

Federation FederationOf(std::span<const ImageRecord> images);

// Parses a COCO annotation document. bbox [x,y,w,h] is converted to corner
// form and clamped to the image bounds. Images carry every category as
// verified unless the document has a per-image "verified_category_ids" list.
// Throws ParseError naming the offending record, IntegrityError for dangling
// references or duplicate ids.
Dataset ParseCoco(const nlohmann::json& doc);
Dataset LoadCoco(const std::filesystem::path& path);

// Applies a sidecar document {"<image_id>": [category ids...]}. Listed images
// get exactly those categories plus any with human annotations on them;
// unlisted images are left unchanged.
void ApplyFederatedSidecar(Dataset& dataset, const nlohmann::json& sidecar);
void LoadFederatedSidecar(Dataset& dataset, const std::filesystem::path& path);

// Throws IntegrityError if any annotation references an unknown image or
// category, or if ids repeat.
void CheckIntegrity(const Dataset& dataset);

// Pseudo labels carry the extension keys "source":"pseudo" and "score".
nlohmann::json ToCocoJson(const Dataset& dataset);
void WriteCoco(const Dataset& dataset, const std::filesystem::path& path);

struct Shot {
  ImageRecord image;
  GroundTruthBox box;
};

struct FewShotSet {
  int64_t category_id = 0;
  std::vector<Shot> shots;
  // Fewer than k annotations were available.
  bool short_of_k = false;
  // Shot images holding more than one instance of the category.
  std::vector<int64_t> multi_instance_images;

  bool empty() const { return shots.empty(); }
};

// Picks min(k, available) human annotations per category by seeded sampling.
// Every category gets an entry; categories without annotations get an empty
// set with short_of_k = true.
std::map<int64_t, FewShotSet> BuildFewShotSets(
    std::span<const CategoryDef> categories,
    std::span<const ImageRecord> images,
    std::span<const GroundTruthBox> annotations, int k, uint64_t seed);

inline constexpr double kDefaultDedupIou = 0.5;

// Returns every human box followed by the pseudo boxes that do not overlap a
// same-image, same-category human box with IoU >= dedup_iou.
std::vector<GroundTruthBox> MergeAnnotations(
    std::span<const GroundTruthBox> human,
    std::span<const GroundTruthBox> pseudo,
    double dedup_iou = kDefaultDedupIou);

}  // namespace groundalign

#endif  // GROUNDALIGN_DATASET_H_
