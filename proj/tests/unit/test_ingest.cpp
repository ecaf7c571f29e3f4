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
#include <algorithm>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"
#include "t2i/ingest.hpp"
#include "t2i/rng.hpp"

namespace t2i {
namespace {

using nlohmann::json;
using testing::error_kind_of;
using testing::TempDir;

std::string coco_captions_3x5() {
  json doc = {{"images", json::array()}, {"annotations", json::array()}};
  int ann = 0;
  for (int img : {3, 1, 2}) {
    doc["images"].push_back({{"id", img}, {"file_name", "img" + std::to_string(img) + ".jpg"}});
    for (int k = 0; k < 5; ++k) {
      doc["annotations"].push_back(
          {{"id", ++ann}, {"image_id", img}, {"caption", "Caption " + std::to_string(k)}});
    }
  }
  return doc.dump();
}

// Ten images; categories by id: 1,4,7,9 person; 4,5 tennis racket; 6 kite.
CaptionIndex category_index() {
  json doc = {{"images", json::array()},
              {"annotations", json::array()},
              {"categories", {{{"id", 1}, {"name", "person"}},
                              {{"id", 43}, {"name", "tennis racket"}},
                              {{"id", 38}, {"name", "kite"}}}}};
  for (int i = 1; i <= 10; ++i) {
    doc["images"].push_back({{"id", i}, {"file_name", std::to_string(i) + ".jpg"}});
    doc["annotations"].push_back({{"image_id", i}, {"caption", "image " + std::to_string(i)}});
  }
  for (int i : {1, 4, 7, 9}) doc["annotations"].push_back({{"image_id", i}, {"category_id", 1}});
  for (int i : {4, 5}) doc["annotations"].push_back({{"image_id", i}, {"category_id", 43}});
  doc["annotations"].push_back({{"image_id", 6}, {"category_id", 38}});
  return parse_coco_json(doc.dump(), "categories.json");
}

std::vector<std::string> ids_of(const ImageManifest& m) {
  std::vector<std::string> out;
  for (const auto& e : m.entries) out.push_back(e.id);
  return out;
}

TEST(IngestTest, CocoIndexKeepsEveryImageAndCaption) {
  const CaptionIndex idx = parse_coco_json(coco_captions_3x5(), "x.json");
  ASSERT_EQ(idx.records.size(), 3u);
  for (const auto& [id, caps] : idx.records) EXPECT_EQ(caps.size(), 5u) << id;
  EXPECT_EQ(idx.image_paths.at("2"), "img2.jpg");
}

TEST(IngestTest, CaptionsPreservedVerbatim) {
  json doc = {{"images", {{{"id", 1}}}},
              {"annotations", {{{"image_id", 1}, {"caption", "  A MAN Running,  fast "}}}}};
  const CaptionIndex idx = parse_coco_json(doc.dump(), "x");
  EXPECT_EQ(idx.records.at("1").front(), "  A MAN Running,  fast ");
}

TEST(IngestTest, EmptyAnnotationListGivesEmptyIndex) {
  const CaptionIndex idx = parse_coco_json(R"({"images": [], "annotations": []})", "x");
  EXPECT_TRUE(idx.records.empty());
}

TEST(IngestTest, TruncatedFileIsFormatErrorWithPosition) {
  const std::string text = coco_captions_3x5();
  const std::string cut = text.substr(0, text.size() / 2);
  EXPECT_EQ(error_kind_of([&] { parse_coco_json(cut, "cut.json"); }), ErrorKind::format);
  const auto msg = testing::error_message_of([&] { parse_coco_json("{\n\"images\": [\n", "c"); });
  EXPECT_NE(msg.find("line"), std::string::npos) << msg;
  EXPECT_NE(msg.find("offset"), std::string::npos) << msg;
}

TEST(IngestTest, UnknownFormatTagIsUsageError) {
  EXPECT_EQ(error_kind_of([] { parse_caption_format("yaml"); }), ErrorKind::usage);
  EXPECT_EQ(parse_caption_format("coco_json"), CaptionFormat::coco_json);
  EXPECT_EQ(parse_caption_format("flickr_tsv"), CaptionFormat::flickr_tsv);
}

TEST(IngestTest, FlickrTableStripsCaptionIndexAndHeader) {
  const CaptionIndex idx = parse_flickr_tsv(
      "image_name\tcaption\n1000.jpg#0\tA dog running .\n1000.jpg#1\tA brown dog .\n"
      "2000.jpg#0\tTwo people swimming .\n",
      "captions.tsv");
  ASSERT_EQ(idx.records.size(), 2u);
  EXPECT_EQ(idx.records.at("1000").size(), 2u);
  EXPECT_EQ(idx.image_paths.at("2000"), "2000.jpg");
  EXPECT_EQ(error_kind_of([] { parse_flickr_tsv("no tab here\n", "bad.tsv"); }),
            ErrorKind::format);
}

TEST(IngestTest, LoadFromFileDispatchesOnFormat) {
  TempDir dir;
  write_file_atomic(dir / "c.json", coco_captions_3x5());
  EXPECT_EQ(load_caption_index(dir / "c.json", CaptionFormat::coco_json).records.size(), 3u);
  EXPECT_EQ(error_kind_of([&] { load_caption_index(dir / "missing.json", CaptionFormat::coco_json); }),
            ErrorKind::input);
}

TEST(IngestTest, CategoryFilterSelectsSubset) {
  const ImageManifest m = filter_by_category(category_index(), {"person"}, 10000);
  EXPECT_EQ(ids_of(m), (std::vector<std::string>{"1", "4", "7", "9"}));
  EXPECT_TRUE(m.warnings.empty());
  for (const auto& e : m.entries) {
    EXPECT_FALSE(e.tags.empty());
    EXPECT_EQ(e.captions.size(), 1u);
  }
}

TEST(IngestTest, CategoryFilterTruncatesByAscendingId) {
  const ImageManifest m = filter_by_category(category_index(), {"person", "tennis racket"}, 2);
  EXPECT_EQ(ids_of(m), (std::vector<std::string>{"1", "4"}));
}

TEST(IngestTest, CategoryFilterUsesNumericOrderForNumericIds) {
  CaptionIndex idx;
  for (const char* id : {"10", "9", "100", "2"}) {
    idx.records[id] = {"c"};
    idx.category_map[id] = {"person"};
  }
  EXPECT_EQ(ids_of(filter_by_category(idx, {"person"}, 10)),
            (std::vector<std::string>{"2", "9", "10", "100"}));
}

TEST(IngestTest, NoMatchesGivesEmptyManifestAndWarning) {
  const ImageManifest m = filter_by_category(category_index(), {"unicorn"}, 10);
  EXPECT_TRUE(m.entries.empty());
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_NE(m.warnings[0].find("unicorn"), std::string::npos);
}

TEST(IngestTest, EmptyCategoryListIsRejected) {
  EXPECT_EQ(error_kind_of([] { filter_by_category(category_index(), {}, 10); }), ErrorKind::usage);
  EXPECT_EQ(error_kind_of([] { filter_by_keywords(category_index(), {}, 10); }), ErrorKind::usage);
}

TEST(IngestTest, KeywordMatchingIsWholeWord) {
  EXPECT_TRUE(caption_has_keyword("A man running in a park", "running"));
  EXPECT_FALSE(caption_has_keyword("A man running", "run"));
  EXPECT_FALSE(caption_has_keyword("Sunday brunch", "run"));
  EXPECT_TRUE(caption_has_keyword("RUNNING!", "running"));
  EXPECT_TRUE(caption_has_keyword("a tennis racket on grass", "tennis racket"));
  EXPECT_FALSE(caption_has_keyword("a tennis court with a racket", "tennis racket"));
}

TEST(IngestTest, KeywordFilterTagsMatchedKeywords) {
  CaptionIndex idx;
  idx.records["1"] = {"A man running in a park"};
  idx.records["2"] = {"A man running", "Kids swimming"};
  idx.records["3"] = {"A cat sleeping"};
  const ImageManifest m = filter_by_keywords(idx, {"swimming", "running"}, 10);
  ASSERT_EQ(ids_of(m), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(m.entries[1].tags, (std::vector<std::string>{"running", "swimming"}));
  EXPECT_EQ(m.entries[1].captions.size(), 2u);
}

TEST(IngestTest, KeywordFilterReturnsExactlyTheRequestedCount) {
  CaptionIndex idx;
  for (int i = 0; i < 6000; ++i) idx.records[std::to_string(i)] = {"people swimming in a lake"};
  EXPECT_EQ(filter_by_keywords(idx, {"swimming"}, 5000).entries.size(), 5000u);
}

TEST(IngestTest, FilteringIsIdempotent) {
  const CaptionIndex idx = category_index();
  const ImageManifest once = filter_by_category(idx, {"person", "kite"}, 10, "s", ManifestAxis::motion);
  const ImageManifest twice =
      filter_by_category(index_from_manifest(once), {"person", "kite"}, 10, "s", ManifestAxis::motion);
  EXPECT_EQ(once, twice);

  CaptionIndex cap;
  cap.records["a"] = {"girl swimming"};
  cap.records["b"] = {"boy running fast"};
  cap.records["c"] = {"still life"};
  const ImageManifest k1 = filter_by_keywords(cap, {"running", "swimming"}, 10);
  EXPECT_EQ(k1, filter_by_keywords(index_from_manifest(k1), {"running", "swimming"}, 10));
}

TEST(IngestTest, KeywordUnionIsSupersetProperty) {
  Rng rng(3);
  const std::vector<std::string> vocab = {"run", "running", "swim", "swimming", "dog", "a",
                                          "park", "brunch", "face", "smiling"};
  for (int trial = 0; trial < 50; ++trial) {
    CaptionIndex idx;
    for (int i = 0; i < 40; ++i) {
      std::string cap;
      for (int w = 0; w < 5; ++w) cap += vocab[rng.below(vocab.size())] + " ";
      idx.records[std::to_string(i)] = {cap};
    }
    const std::vector<std::string> k1 = {vocab[rng.below(vocab.size())]};
    std::vector<std::string> k12 = k1;
    k12.push_back(vocab[rng.below(vocab.size())]);
    const auto a = ids_of(filter_by_keywords(idx, k1, 1000));
    const auto b = ids_of(filter_by_keywords(idx, k12, 1000));
    const std::set<std::string> bs(b.begin(), b.end());
    for (const auto& id : a) EXPECT_TRUE(bs.count(id)) << id;
  }
}

TEST(IngestTest, ManifestRoundTripsThroughFile) {
  TempDir dir;
  ImageManifest m = filter_by_category(category_index(), {"person"}, 3, "coco-face", ManifestAxis::face);
  m.root = dir.path().string();
  write_manifest(dir / "m.jsonl", m);
  EXPECT_EQ(read_manifest(dir / "m.jsonl"), m);
  // Repeated runs are byte-identical.
  EXPECT_EQ(manifest_to_jsonl(m), manifest_to_jsonl(read_manifest(dir / "m.jsonl")));
}

TEST(IngestTest, ManifestLinesCarryTheDocumentedFields) {
  ImageManifest m;
  m.entries.push_back({"7", "a/7.jpg", {"cap"}, {"person"}});
  const std::string text = manifest_to_jsonl(m);
  const auto lines = parse_json_lines(text, "m");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1], (json{{"id", "7"}, {"image_path", "a/7.jpg"}, {"captions", {"cap"}}, {"tags", {"person"}}}));
}

TEST(IngestTest, RelativeRootResolvesAgainstManifestDirectory) {
  TempDir dir;
  ImageManifest m;
  m.root = "images";
  m.entries.push_back({"1", "1.png", {}, {}});
  write_manifest(dir / "sub/m.jsonl", m);
  const ImageManifest back = read_manifest(dir / "sub/m.jsonl");
  EXPECT_EQ(back.resolve(back.entries[0]), dir / "sub/images/1.png");
}

TEST(IngestTest, ManifestValidation) {
  ImageManifest dup;
  dup.entries = {{"1", "a.jpg", {"x"}, {}}, {"1", "b.jpg", {"y"}, {}}};
  EXPECT_EQ(error_kind_of([&] { validate_manifest(dup, false); }), ErrorKind::validation);
  ImageManifest abs;
  abs.entries = {{"1", "/etc/passwd", {"x"}, {}}};
  EXPECT_EQ(error_kind_of([&] { validate_manifest(abs, false); }), ErrorKind::validation);
  ImageManifest nocap;
  nocap.entries = {{"1", "a.jpg", {""}, {}}};
  EXPECT_EQ(error_kind_of([&] { validate_manifest(nocap, true); }), ErrorKind::validation);
  EXPECT_NO_THROW(validate_manifest(nocap, false));
}

TEST(IngestTest, PresetsCoverSportCategories) {
  const auto& sports = coco_sport_categories();
  EXPECT_EQ(sports.size(), 10u);
  EXPECT_NE(std::find(sports.begin(), sports.end(), "tennis racket"), sports.end());
  const auto& motion = keyword_preset("motion");
  EXPECT_NE(std::find(motion.begin(), motion.end(), "running"), motion.end());
  EXPECT_NE(std::find(motion.begin(), motion.end(), "swimming"), motion.end());
  EXPECT_EQ(error_kind_of([] { keyword_preset("nope"); }), ErrorKind::usage);
}

}  // namespace
}  // namespace t2i
