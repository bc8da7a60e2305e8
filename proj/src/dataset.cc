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
#include "groundalign/dataset.h"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "groundalign/errors.h"
#include "groundalign/json_io.h"
#include "groundalign/rng.h"
#include "spdlog/spdlog.h"

namespace groundalign {
namespace {

using nlohmann::json;

const json& Field(const json& record, const char* key,
                  const std::string& where) {
  if (!record.is_object()) throw ParseError(where + ": expected an object");
  auto it = record.find(key);
  if (it == record.end()) {
    throw ParseError(where + ": missing key '" + key + "'");
  }
  return *it;
}

int64_t IntField(const json& record, const char* key, const std::string& where) {
  const json& v = Field(record, key, where);
  if (!v.is_number_integer()) {
    throw ParseError(where + ": '" + key + "' must be an integer");
  }
  return v.get<int64_t>();
}

std::string StringField(const json& record, const char* key,
                        const std::string& where) {
  const json& v = Field(record, key, where);
  if (!v.is_string()) throw ParseError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

const json& ArrayField(const json& doc, const char* key) {
  const json& v = Field(doc, key, "document");
  if (!v.is_array()) throw ParseError(std::string("'") + key + "' must be an array");
  return v;
}

}  // namespace

const ImageRecord* Dataset::FindImage(int64_t image_id) const {
  for (const auto& image : images) {
    if (image.id == image_id) return &image;
  }
  return nullptr;
}

const CategoryDef* Dataset::FindCategory(int64_t category_id) const {
  for (const auto& category : categories) {
    if (category.id == category_id) return &category;
  }
  return nullptr;
}

Federation FederationOf(std::span<const ImageRecord> images) {
  Federation federation;
  for (const auto& image : images) {
    federation[image.id] = image.verified_categories;
  }
  return federation;
}

void CheckIntegrity(const Dataset& dataset) {
  std::unordered_set<int64_t> category_ids, image_ids, annotation_ids;
  for (const auto& c : dataset.categories) {
    if (c.id <= 0) {
      throw IntegrityError("category id must be positive: " + std::to_string(c.id));
    }
    if (!category_ids.insert(c.id).second) {
      throw IntegrityError("duplicate category id " + std::to_string(c.id));
    }
  }
  for (const auto& im : dataset.images) {
    if (!image_ids.insert(im.id).second) {
      throw IntegrityError("duplicate image id " + std::to_string(im.id));
    }
  }
  for (const auto& a : dataset.annotations) {
    if (!image_ids.count(a.image_id)) {
      throw IntegrityError("annotation " + std::to_string(a.id) +
                           " references unknown image_id " +
                           std::to_string(a.image_id));
    }
    if (!category_ids.count(a.category_id)) {
      throw IntegrityError("annotation " + std::to_string(a.id) +
                           " references unknown category_id " +
                           std::to_string(a.category_id));
    }
    if (!annotation_ids.insert(a.id).second) {
      throw IntegrityError("duplicate annotation id " + std::to_string(a.id));
    }
    if (a.source == LabelSource::kHuman && a.score.has_value()) {
      throw IntegrityError("human annotation " + std::to_string(a.id) +
                           " carries a score");
    }
    if (a.source == LabelSource::kPseudo && (!a.score || *a.score <= 0.0)) {
      throw IntegrityError("pseudo annotation " + std::to_string(a.id) +
                           " needs a positive score");
    }
  }
}

Dataset ParseCoco(const json& doc) {
  if (!doc.is_object()) throw ParseError("COCO document must be an object");
  Dataset out;

  const json& categories = ArrayField(doc, "categories");
  for (size_t i = 0; i < categories.size(); ++i) {
    const std::string where = "categories[" + std::to_string(i) + "]";
    out.categories.push_back({IntField(categories[i], "id", where),
                              StringField(categories[i], "name", where)});
  }

  std::set<int64_t> all_categories;
  for (const auto& c : out.categories) all_categories.insert(c.id);

  const json& images = ArrayField(doc, "images");
  for (size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    ImageRecord image;
    image.id = IntField(images[i], "id", where);
    image.file_name = StringField(images[i], "file_name", where);
    const int64_t width = IntField(images[i], "width", where);
    const int64_t height = IntField(images[i], "height", where);
    if (width <= 0 || height <= 0) {
      throw ParseError(where + ": width and height must be positive");
    }
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    if (auto it = images[i].find("verified_category_ids");
        it != images[i].end()) {
      if (!it->is_array()) {
        throw ParseError(where + ": 'verified_category_ids' must be an array");
      }
      for (const json& v : *it) {
        if (!v.is_number_integer()) {
          throw ParseError(where + ": verified category ids must be integers");
        }
        image.verified_categories.insert(v.get<int64_t>());
      }
    } else {
      image.verified_categories = all_categories;
    }
    out.images.push_back(std::move(image));
  }

  std::unordered_map<int64_t, size_t> image_index;
  for (size_t i = 0; i < out.images.size(); ++i) image_index[out.images[i].id] = i;

  const json& annotations = ArrayField(doc, "annotations");
  for (size_t i = 0; i < annotations.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    const json& record = annotations[i];
    GroundTruthBox box;
    box.id = IntField(record, "id", where);
    box.image_id = IntField(record, "image_id", where);
    box.category_id = IntField(record, "category_id", where);
    const json& bbox = Field(record, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(),
                     [](const json& v) { return v.is_number(); })) {
      throw ParseError(where + ": 'bbox' must be four numbers [x,y,w,h]");
    }
    try {
      box.bbox = BBox::FromXywh(bbox[0].get<double>(), bbox[1].get<double>(),
                                bbox[2].get<double>(), bbox[3].get<double>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (auto it = record.find("source"); it != record.end()) {
      if (*it == "pseudo") {
        box.source = LabelSource::kPseudo;
      } else if (*it != "human") {
        throw ParseError(where + ": 'source' must be \"human\" or \"pseudo\"");
      }
    }
    if (auto it = record.find("score"); it != record.end()) {
      if (!it->is_number()) throw ParseError(where + ": 'score' must be a number");
      box.score = it->get<double>();
    }
    if (box.source == LabelSource::kHuman) box.score.reset();

    auto image_it = image_index.find(box.image_id);
    if (image_it == image_index.end()) {
      throw IntegrityError(where + ": image_id " + std::to_string(box.image_id) +
                           " not present in images");
    }
    const ImageRecord& image = out.images[image_it->second];
    const BBox clamped = box.bbox.ClampedTo(image.width, image.height);
    if (!(clamped == box.bbox)) {
      spdlog::warn("{}: bbox exceeds image {} bounds, clamped", where, image.id);
      box.bbox = clamped;
    }
    out.annotations.push_back(std::move(box));
  }

  CheckIntegrity(out);
  return out;
}

Dataset LoadCoco(const std::filesystem::path& path) {
  try {
    return ParseCoco(ReadJsonFile(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void ApplyFederatedSidecar(Dataset& dataset, const json& sidecar) {
  if (!sidecar.is_object()) {
    throw ParseError("federated sidecar must map image_id -> [category ids]");
  }
  std::map<int64_t, std::set<int64_t>> listed;
  for (const auto& [key, value] : sidecar.items()) {
    int64_t image_id = 0;
    try {
      size_t used = 0;
      image_id = std::stoll(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ParseError("federated sidecar key '" + key + "' is not an image id");
    }
    if (!value.is_array()) {
      throw ParseError("federated sidecar entry " + key + " must be an array");
    }
    auto& ids = listed[image_id];
    for (const json& v : value) {
      if (!v.is_number_integer()) {
        throw ParseError("federated sidecar entry " + key +
                         " must hold integer category ids");
      }
      ids.insert(v.get<int64_t>());
    }
  }
  for (auto& image : dataset.images) {
    auto it = listed.find(image.id);
    if (it == listed.end()) continue;
    image.verified_categories = it->second;
  }
  // A human annotation is itself evidence that its category was checked.
  std::unordered_map<int64_t, ImageRecord*> by_id;
  for (auto& image : dataset.images) by_id[image.id] = &image;
  for (const auto& a : dataset.annotations) {
    if (a.source != LabelSource::kHuman) continue;
    if (auto it = by_id.find(a.image_id); it != by_id.end()) {
      it->second->verified_categories.insert(a.category_id);
    }
  }
}

void LoadFederatedSidecar(Dataset& dataset, const std::filesystem::path& path) {
  ApplyFederatedSidecar(dataset, ReadJsonFile(path));
}

json ToCocoJson(const Dataset& dataset) {
  std::set<int64_t> all_categories;
  for (const auto& c : dataset.categories) all_categories.insert(c.id);

  json categories = json::array();
  for (const auto& c : dataset.categories) {
    categories.push_back({{"id", c.id}, {"name", c.name}});
  }
  json images = json::array();
  for (const auto& im : dataset.images) {
    json record = {{"id", im.id},
                   {"file_name", im.file_name},
                   {"width", im.width},
                   {"height", im.height}};
    if (im.verified_categories != all_categories) {
      record["verified_category_ids"] = im.verified_categories;
    }
    images.push_back(std::move(record));
  }
  json annotations = json::array();
  for (const auto& a : dataset.annotations) {
    const auto xywh = a.bbox.ToXywh();
    json record = {{"id", a.id},
                   {"image_id", a.image_id},
                   {"category_id", a.category_id},
                   {"bbox", {xywh[0], xywh[1], xywh[2], xywh[3]}},
                   {"area", Area(a.bbox)},
                   {"iscrowd", 0}};
    if (a.source == LabelSource::kPseudo) {
      record["source"] = "pseudo";
      record["score"] = a.score.value_or(0.0);
    }
    annotations.push_back(std::move(record));
  }
  return {{"images", std::move(images)},
          {"annotations", std::move(annotations)},
          {"categories", std::move(categories)}};
}

void WriteCoco(const Dataset& dataset, const std::filesystem::path& path) {
  CheckIntegrity(dataset);
  WriteJsonFile(path, ToCocoJson(dataset));
}

std::map<int64_t, FewShotSet> BuildFewShotSets(
    std::span<const CategoryDef> categories,
    std::span<const ImageRecord> images,
    std::span<const GroundTruthBox> annotations, int k, uint64_t seed) {
  if (k <= 0) throw std::invalid_argument("shot count k must be positive");
  std::unordered_map<int64_t, const ImageRecord*> image_by_id;
  for (const auto& im : images) image_by_id[im.id] = &im;

  std::map<int64_t, std::vector<size_t>> by_category;
  for (const auto& c : categories) by_category[c.id];
  for (size_t i = 0; i < annotations.size(); ++i) {
    if (annotations[i].source != LabelSource::kHuman) continue;
    by_category[annotations[i].category_id].push_back(i);
  }

  std::map<int64_t, FewShotSet> sets;
  for (auto& [category_id, indices] : by_category) {
    FewShotSet set;
    set.category_id = category_id;
    set.short_of_k = indices.size() < static_cast<size_t>(k);

    std::map<int64_t, int> instances_per_image;
    for (size_t i : indices) ++instances_per_image[annotations[i].image_id];

    SeededRng rng(MixSeed(seed, static_cast<uint64_t>(category_id)));
    std::vector<size_t> chosen = indices;
    rng.Shuffle(chosen);
    chosen.resize(std::min(chosen.size(), static_cast<size_t>(k)));
    std::sort(chosen.begin(), chosen.end());

    for (size_t i : chosen) {
      const GroundTruthBox& box = annotations[i];
      auto it = image_by_id.find(box.image_id);
      if (it == image_by_id.end()) {
        throw IntegrityError("annotation " + std::to_string(box.id) +
                             " references unknown image_id " +
                             std::to_string(box.image_id));
      }
      set.shots.push_back({*it->second, box});
      if (instances_per_image[box.image_id] > 1 &&
          std::find(set.multi_instance_images.begin(),
                    set.multi_instance_images.end(),
                    box.image_id) == set.multi_instance_images.end()) {
        set.multi_instance_images.push_back(box.image_id);
      }
    }
    if (set.empty()) {
      spdlog::warn("category {} has no annotations; few-shot set is empty",
                   category_id);
    } else if (set.short_of_k) {
      spdlog::warn("category {} has {} annotations, fewer than k={}",
                   category_id, set.shots.size(), k);
    }
    sets.emplace(category_id, std::move(set));
  }
  return sets;
}

std::vector<GroundTruthBox> MergeAnnotations(
    std::span<const GroundTruthBox> human,
    std::span<const GroundTruthBox> pseudo, double dedup_iou) {
  std::map<std::pair<int64_t, int64_t>, std::vector<const BBox*>> human_index;
  for (const auto& h : human) {
    human_index[{h.image_id, h.category_id}].push_back(&h.bbox);
  }
  std::vector<GroundTruthBox> merged(human.begin(), human.end());
  for (const auto& p : pseudo) {
    bool duplicate = false;
    if (auto it = human_index.find({p.image_id, p.category_id});
        it != human_index.end()) {
      for (const BBox* h : it->second) {
        if (Iou(*h, p.bbox) >= dedup_iou) {
          duplicate = true;
          break;
        }
      }
    }
    if (!duplicate) merged.push_back(p);
  }
  return merged;
}

}  // namespace groundalign
