// Copyright 2026 The T2I Audit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef T2I_INGEST_HPP
#define T2I_INGEST_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace t2i {

enum class ManifestAxis { face, motion, bias, other };

std::string_view to_string(ManifestAxis axis);
ManifestAxis parse_manifest_axis(std::string_view text);

// Orders ids naturally: two all-digit ids compare as numbers, anything else
// compares bytewise.
struct IdLess {
  bool operator()(std::string_view a, std::string_view b) const;
  using is_transparent = void;
};

struct ManifestEntry {
  std::string id;
  std::string image_path;  // relative to ImageManifest::root
  std::vector<std::string> captions;
  std::vector<std::string> tags;

  bool operator==(const ManifestEntry&) const = default;
};

struct ImageManifest {
  std::string source_name;
  ManifestAxis axis = ManifestAxis::other;
  std::string root;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
  const ManifestEntry* find(std::string_view id) const;
  bool operator==(const ImageManifest&) const = default;
};

// Unique ids, root-relative paths, and (when caption_bearing) at least one
// nonempty caption per entry. Throws Error{validation}.
void validate_manifest(const ImageManifest& manifest, bool caption_bearing);

std::string manifest_to_jsonl(const ImageManifest& manifest);
ImageManifest manifest_from_jsonl(std::string_view text,
                                  std::string_view origin = "<manifest>");
void write_manifest(const std::filesystem::path& path,
                    const ImageManifest& manifest);
// A relative root is resolved against the manifest file's directory.
ImageManifest read_manifest(const std::filesystem::path& path);

// In-memory view of a COCO-style or Flickr-style annotation file.
struct CaptionIndex {
  std::map<std::string, std::vector<std::string>, IdLess> records;
  std::map<std::string, std::vector<std::string>, IdLess> category_map;
  std::map<std::string, std::string, IdLess> image_paths;

  std::size_t size() const { return records.size(); }
  void merge(const CaptionIndex& other);
};

enum class CaptionFormat { coco_json, flickr_tsv };

CaptionFormat parse_caption_format(std::string_view text);

// COCO files may carry caption annotations, instance annotations with
// category ids, or both. Flickr tables are `image_name<TAB>caption` rows;
// a `#k` suffix on the image name is dropped.
CaptionIndex load_caption_index(const std::filesystem::path& path,
                                CaptionFormat format);
CaptionIndex parse_coco_json(std::string_view text, std::string_view origin);
CaptionIndex parse_flickr_tsv(std::string_view text, std::string_view origin);

// Treats manifest tags as categories, so filtering composes.
CaptionIndex index_from_manifest(const ImageManifest& manifest);

ImageManifest filter_by_category(const CaptionIndex& index,
                                 const std::vector<std::string>& categories,
                                 std::size_t target_count,
                                 std::string source_name = "filtered",
                                 ManifestAxis axis = ManifestAxis::other);

ImageManifest filter_by_keywords(const CaptionIndex& index,
                                 const std::vector<std::string>& keywords,
                                 std::size_t target_count,
                                 std::string source_name = "filtered",
                                 ManifestAxis axis = ManifestAxis::other);

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize_words(std::string_view text);

// Case-insensitive whole-word match; multi-word keywords match consecutive
// tokens.
bool caption_has_keyword(std::string_view caption, std::string_view keyword);

const std::vector<std::string>& coco_sport_categories();
const std::vector<std::string>& keyword_preset(std::string_view name);

}  // namespace t2i

#endif  // T2I_INGEST_HPP
