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
#include "t2i/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "t2i/error.hpp"
#include "t2i/fileio.hpp"

namespace t2i {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ManifestAxis axis) {
  switch (axis) {
    case ManifestAxis::face: return "face";
    case ManifestAxis::motion: return "motion";
    case ManifestAxis::bias: return "bias";
    case ManifestAxis::other: return "other";
  }
  return "other";
}

ManifestAxis parse_manifest_axis(std::string_view text) {
  if (text == "face") return ManifestAxis::face;
  if (text == "motion") return ManifestAxis::motion;
  if (text == "bias") return ManifestAxis::bias;
  if (text == "other") return ManifestAxis::other;
  throw Error(ErrorKind::usage, "unknown manifest axis '" + std::string(text) +
                                    "' (expected face|motion|bias|other)");
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

std::string_view strip_leading_zeros(std::string_view s) {
  const auto p = s.find_first_not_of('0');
  return p == std::string_view::npos ? s.substr(s.size() - 1) : s.substr(p);
}

}  // namespace

bool IdLess::operator()(std::string_view a, std::string_view b) const {
  if (all_digits(a) && all_digits(b)) {
    const auto na = strip_leading_zeros(a);
    const auto nb = strip_leading_zeros(b);
    if (na.size() != nb.size()) return na.size() < nb.size();
    if (na != nb) return na < nb;
  }
  return a < b;
}

fs::path ImageManifest::resolve(const ManifestEntry& entry) const {
  if (root.empty()) return fs::path(entry.image_path);
  return fs::path(root) / entry.image_path;
}

const ManifestEntry* ImageManifest::find(std::string_view id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

void validate_manifest(const ImageManifest& manifest, bool caption_bearing) {
  std::set<std::string_view> seen;
  for (const auto& e : manifest.entries) {
    if (e.id.empty()) throw Error(ErrorKind::validation, "entry with empty id");
    if (!seen.insert(e.id).second) {
      throw Error(ErrorKind::validation, "duplicate manifest id '" + e.id + "'");
    }
    if (fs::path(e.image_path).is_absolute()) {
      throw Error(ErrorKind::validation,
                  "image path for '" + e.id + "' must be relative to the root");
    }
    if (caption_bearing) {
      const bool ok = std::any_of(e.captions.begin(), e.captions.end(),
                                  [](const std::string& c) { return !c.empty(); });
      if (!ok) {
        throw Error(ErrorKind::validation, "entry '" + e.id + "' has no caption");
      }
    }
  }
}

std::string manifest_to_jsonl(const ImageManifest& manifest) {
  std::string out;
  json header = {{"manifest",
                  {{"source_name", manifest.source_name},
                   {"axis", to_string(manifest.axis)},
                   {"root", manifest.root},
                   {"warnings", manifest.warnings}}}};
  out += header.dump();
  out += '\n';
  for (const auto& e : manifest.entries) {
    json line = {{"id", e.id},
                 {"image_path", e.image_path},
                 {"captions", e.captions},
                 {"tags", e.tags}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

ImageManifest manifest_from_jsonl(std::string_view text,
                                  std::string_view origin) {
  ImageManifest m;
  std::size_t n = 0;
  for (const json& rec : parse_json_lines(text, origin)) {
    ++n;
    try {
      if (rec.contains("manifest")) {
        const json& h = rec.at("manifest");
        m.source_name = h.value("source_name", "");
        m.axis = parse_manifest_axis(h.value("axis", "other"));
        m.root = h.value("root", "");
        m.warnings = h.value("warnings", std::vector<std::string>{});
        continue;
      }
      ManifestEntry e;
      e.id = rec.at("id").get<std::string>();
      e.image_path = rec.value("image_path", "");
      e.captions = rec.value("captions", std::vector<std::string>{});
      e.tags = rec.value("tags", std::vector<std::string>{});
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::format, std::string(origin) + ": record " +
                                         std::to_string(n) + ": " + ex.what());
    }
  }
  validate_manifest(m, false);
  return m;
}

void write_manifest(const fs::path& path, const ImageManifest& manifest) {
  write_file_atomic(path, manifest_to_jsonl(manifest));
}

ImageManifest read_manifest(const fs::path& path) {
  ImageManifest m = manifest_from_jsonl(read_file(path), path.string());
  // A relative root is relative to the manifest file, so run directories
  // can be moved as a unit.
  if (fs::path(m.root).is_relative()) {
    m.root = (fs::absolute(path).parent_path() / m.root).lexically_normal().string();
  }
  return m;
}

void CaptionIndex::merge(const CaptionIndex& other) {
  for (const auto& [id, caps] : other.records) {
    auto& dst = records[id];
    dst.insert(dst.end(), caps.begin(), caps.end());
  }
  for (const auto& [id, cats] : other.category_map) {
    auto& dst = category_map[id];
    for (const auto& c : cats) {
      if (std::find(dst.begin(), dst.end(), c) == dst.end()) dst.push_back(c);
    }
    std::sort(dst.begin(), dst.end());
  }
  for (const auto& [id, path] : other.image_paths) {
    image_paths.emplace(id, path);
  }
}

CaptionFormat parse_caption_format(std::string_view text) {
  if (text == "coco_json" || text == "coco") return CaptionFormat::coco_json;
  if (text == "flickr_tsv" || text == "flickr") return CaptionFormat::flickr_tsv;
  throw Error(ErrorKind::usage, "unknown annotation format '" +
                                    std::string(text) +
                                    "' (expected coco_json|flickr_tsv)");
}

namespace {

std::string id_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorKind::format, "image id must be a string or integer");
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

}  // namespace

CaptionIndex parse_coco_json(std::string_view text, std::string_view origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::format,
                std::string(origin) + ": line " +
                    std::to_string(line_of_offset(text, e.byte)) + ", offset " +
                    std::to_string(e.byte) + ": malformed JSON");
  }
  if (!doc.is_object()) {
    throw Error(ErrorKind::format,
                std::string(origin) + ": expected a top-level object");
  }

  CaptionIndex index;
  try {
    std::map<long long, std::string> category_names;
    for (const json& c : doc.value("categories", json::array())) {
      category_names[c.at("id").get<long long>()] = c.at("name").get<std::string>();
    }
    for (const json& img : doc.value("images", json::array())) {
      const std::string id = id_text(img.at("id"));
      index.records[id];
      index.category_map[id];
      index.image_paths[id] = img.value("file_name", id);
    }
    for (const json& ann : doc.value("annotations", json::array())) {
      const std::string id = id_text(ann.at("image_id"));
      auto& caps = index.records[id];
      auto& cats = index.category_map[id];
      index.image_paths.emplace(id, id);
      if (ann.contains("caption")) {
        caps.push_back(ann.at("caption").get<std::string>());
      }
      if (ann.contains("category_id")) {
        const long long cid = ann.at("category_id").get<long long>();
        auto it = category_names.find(cid);
        const std::string name =
            it == category_names.end() ? std::to_string(cid) : it->second;
        if (std::find(cats.begin(), cats.end(), name) == cats.end()) {
          cats.push_back(name);
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string(origin) + ": " + e.what());
  }
  for (auto& [id, cats] : index.category_map) std::sort(cats.begin(), cats.end());
  return index;
}

CaptionIndex parse_flickr_tsv(std::string_view text, std::string_view origin) {
  CaptionIndex index;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorKind::format, std::string(origin) + ": line " +
                                         std::to_string(line_no) +
                                         ": expected image_name<TAB>caption");
    }
    std::string_view name = line.substr(0, tab);
    std::string_view caption = line.substr(tab + 1);
    if (line_no == 1 && name == "image_name") continue;  // header row
    if (const auto hash = name.find('#'); hash != std::string_view::npos) {
      name = name.substr(0, hash);
    }
    if (name.empty()) {
      throw Error(ErrorKind::format, std::string(origin) + ": line " +
                                         std::to_string(line_no) +
                                         ": empty image name");
    }
    const std::string id = fs::path(std::string(name)).stem().string();
    index.records[id].emplace_back(caption);
    index.category_map[id];
    index.image_paths.emplace(id, std::string(name));
  }
  return index;
}

CaptionIndex load_caption_index(const fs::path& path, CaptionFormat format) {
  const std::string text = read_file(path);
  switch (format) {
    case CaptionFormat::coco_json: return parse_coco_json(text, path.string());
    case CaptionFormat::flickr_tsv: return parse_flickr_tsv(text, path.string());
  }
  throw Error(ErrorKind::usage, "unknown annotation format");
}

CaptionIndex index_from_manifest(const ImageManifest& manifest) {
  CaptionIndex index;
  for (const auto& e : manifest.entries) {
    index.records[e.id] = e.captions;
    index.category_map[e.id] = e.tags;
    index.image_paths[e.id] = e.image_path;
  }
  return index;
}

namespace {

ManifestEntry make_entry(const CaptionIndex& index, const std::string& id,
                         std::vector<std::string> tags) {
  ManifestEntry e;
  e.id = id;
  auto p = index.image_paths.find(id);
  e.image_path = p == index.image_paths.end() ? id : p->second;
  auto c = index.records.find(id);
  if (c != index.records.end()) e.captions = c->second;
  e.tags = std::move(tags);
  return e;
}

void finish(ImageManifest& m, std::string_view what) {
  if (m.entries.empty()) {
    m.warnings.push_back("no images matched " + std::string(what));
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

ImageManifest filter_by_category(const CaptionIndex& index,
                                 const std::vector<std::string>& categories,
                                 std::size_t target_count,
                                 std::string source_name, ManifestAxis axis) {
  if (categories.empty()) {
    throw Error(ErrorKind::usage, "filter_by_category needs at least one category");
  }
  const std::set<std::string> wanted(categories.begin(), categories.end());
  ImageManifest m;
  m.source_name = std::move(source_name);
  m.axis = axis;
  for (const auto& [id, cats] : index.category_map) {
    if (m.entries.size() >= target_count) break;
    const bool hit = std::any_of(cats.begin(), cats.end(), [&](const auto& c) {
      return wanted.count(c) != 0;
    });
    if (hit) m.entries.push_back(make_entry(index, id, cats));
  }
  finish(m, "categories [" + join(categories) + "]");
  return m;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

bool contains_sequence(const std::vector<std::string>& tokens,
                       const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), needle.begin(),
                     needle.end()) != tokens.end();
}

}  // namespace

bool caption_has_keyword(std::string_view caption, std::string_view keyword) {
  return contains_sequence(tokenize_words(caption), tokenize_words(keyword));
}

ImageManifest filter_by_keywords(const CaptionIndex& index,
                                 const std::vector<std::string>& keywords,
                                 std::size_t target_count,
                                 std::string source_name, ManifestAxis axis) {
  if (keywords.empty()) {
    throw Error(ErrorKind::usage, "filter_by_keywords needs at least one keyword");
  }
  std::vector<std::vector<std::string>> needles;
  for (const auto& k : keywords) needles.push_back(tokenize_words(k));

  ImageManifest m;
  m.source_name = std::move(source_name);
  m.axis = axis;
  for (const auto& [id, caps] : index.records) {
    if (m.entries.size() >= target_count) break;
    std::vector<std::string> matched;
    for (const auto& cap : caps) {
      const auto tokens = tokenize_words(cap);
      for (std::size_t k = 0; k < keywords.size(); ++k) {
        if (contains_sequence(tokens, needles[k]) &&
            std::find(matched.begin(), matched.end(), keywords[k]) ==
                matched.end()) {
          matched.push_back(keywords[k]);
        }
      }
    }
    if (!matched.empty()) {
      std::sort(matched.begin(), matched.end());
      m.entries.push_back(make_entry(index, id, std::move(matched)));
    }
  }
  finish(m, "keywords [" + join(keywords) + "]");
  return m;
}

const std::vector<std::string>& coco_sport_categories() {
  static const std::vector<std::string> kSports = {
      "frisbee",      "skis",       "snowboard",    "sports ball",
      "kite",         "baseball bat", "baseball glove", "skateboard",
      "surfboard",    "tennis racket"};
  return kSports;
}

const std::vector<std::string>& keyword_preset(std::string_view name) {
  static const std::vector<std::string> kFace = {
      "face",  "faces",  "smiling", "smile",  "portrait", "man",
      "woman", "boy",    "girl",    "person", "child",    "people"};
  static const std::vector<std::string> kMotion = {
      "running", "swimming", "jumping", "dancing", "climbing",
      "skiing",  "surfing",  "cycling", "riding",  "playing"};
  if (name == "face") return kFace;
  if (name == "motion") return kMotion;
  if (name == "sport") return coco_sport_categories();
  throw Error(ErrorKind::usage, "unknown keyword preset '" + std::string(name) +
                                    "' (expected face|motion|sport)");
}

}  // namespace t2i
