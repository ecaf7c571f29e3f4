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
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "../common/threshold_cases.hpp"
#include "support.hpp"
#include "t2i/adapters.hpp"
#include "t2i/extract.hpp"
#include "t2i/image.hpp"

namespace t2i {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::error_kind_of;
using testing::passing_detection;
using testing::TempDir;

Raster gradient(int w, int h) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* p = r.pixel(x, y);
      p[0] = static_cast<std::uint8_t>(x * 255 / std::max(1, w - 1));
      p[1] = static_cast<std::uint8_t>(y * 255 / std::max(1, h - 1));
      p[2] = static_cast<std::uint8_t>((x + y) % 256);
    }
  }
  return r;
}

PixelRect rect_of(const CropRegion& r) {
  const auto* p = std::get_if<PixelRect>(&r);
  if (!p) {
    ADD_FAILURE() << "expected a rectangle, got reason " << to_string(std::get<CropReason>(r));
    return {};
  }
  return *p;
}

CropReason reason_of(const CropRegion& r) {
  const auto* p = std::get_if<CropReason>(&r);
  return p ? *p : CropReason::ok;
}

// --- image ------------------------------------------------------------------

TEST(ImageTest, ClampAndCrop) {
  EXPECT_EQ(clamp_to({-5, -5, 10, 10}, 8, 6), (PixelRect{0, 0, 8, 6}));
  EXPECT_TRUE(clamp_to({20, 20, 30, 30}, 8, 6).empty());
  const Raster g = gradient(10, 10);
  const Raster c = crop(g, {2, 3, 5, 7});
  ASSERT_EQ(c.width, 3);
  ASSERT_EQ(c.height, 4);
  EXPECT_EQ(c.pixel(0, 0)[0], g.pixel(2, 3)[0]);
  EXPECT_EQ(c.pixel(2, 3)[1], g.pixel(4, 6)[1]);
}

TEST(ImageTest, BilinearResizeUsesPixelCenters) {
  Raster src(2, 1);
  src.pixel(1, 0)[0] = 100;
  const Raster out = resize_bilinear(src, 4, 1);
  std::vector<int> red;
  for (int x = 0; x < 4; ++x) red.push_back(out.pixel(x, 0)[0]);
  EXPECT_EQ(red, (std::vector<int>{0, 25, 75, 100}));
}

TEST(ImageTest, ResizePreservesConstantImages) {
  Raster src(7, 5);
  for (auto& v : src.rgb) v = 77;
  const Raster out = resize_bilinear(src, 160, 160);
  for (auto v : out.rgb) ASSERT_EQ(v, 77);
  EXPECT_EQ(resize_bilinear(gradient(9, 9), 9, 9), gradient(9, 9));
}

TEST(ImageTest, PngRoundTripIsLossless) {
  const Raster g = gradient(33, 17);
  EXPECT_EQ(decode_png(encode_png(g)), g);
  EXPECT_EQ(encode_png(g), encode_png(g));
}

TEST(ImageTest, UndecodableBytesAreInputError) {
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
  EXPECT_EQ(error_kind_of([&] { decode_png(junk); }), ErrorKind::input);
  TempDir dir;
  write_file_atomic(dir / "bad.png", "not a png");
  EXPECT_EQ(error_kind_of([&] { read_png(dir / "bad.png"); }), ErrorKind::input);
}

// --- gates and geometry -------------------------------------------------------

TEST(ExtractTest, FaceGateExamples) {
  DetectionRecord d = passing_detection();
  d.bbox = {10, 20, 100, 120};
  EXPECT_EQ(rect_of(face_region(d)), (PixelRect{10, 20, 110, 140}));
  d.bbox.height = 110;
  EXPECT_EQ(reason_of(face_region(d)), CropReason::too_narrow);
  EXPECT_EQ(reason_of(face_region(std::nullopt)), CropReason::no_face);
}

TEST(ExtractTest, FaceOriginIsReflectedNotClamped) {
  DetectionRecord d = passing_detection();
  d.bbox = {-12, -7, 100, 130};
  EXPECT_EQ(rect_of(face_region(d)), (PixelRect{12, 7, 112, 137}));
}

TEST(ExtractTest, EyeGateExamples) {
  const CropSpec spec;
  DetectionRecord d = passing_detection();
  d.landmarks.left_eye = Point{60, 100};
  d.landmarks.right_eye = Point{170, 104};
  EXPECT_EQ(rect_of(eyes_region(d, spec)), (PixelRect{50, 85, 180, 119}));
  d.landmarks.right_eye = Point{150, 104};
  EXPECT_EQ(reason_of(eyes_region(d, spec)), CropReason::eyes_geometry);
  d.landmarks.right_eye = Point{170, 110};
  EXPECT_EQ(reason_of(eyes_region(d, spec)), CropReason::eyes_geometry);
  d.landmarks.right_eye.reset();
  EXPECT_EQ(reason_of(eyes_region(d, spec)), CropReason::eyes_geometry);
}

TEST(ExtractTest, MouthGateExamples) {
  const CropSpec spec;
  DetectionRecord d = passing_detection();
  d.landmarks.mouth_left = Point{80, 180};
  d.landmarks.mouth_right = Point{120, 182};
  // Width 40: x padded by 8, height 0.6 * 40 = 24 centered on y = 181.
  EXPECT_EQ(rect_of(mouth_region(d, spec)), (PixelRect{72, 169, 128, 193}));
  d.landmarks.mouth_right = Point{110, 182};
  EXPECT_EQ(reason_of(mouth_region(d, spec)), CropReason::mouth_too_small);
  d.landmarks.mouth_right = d.landmarks.mouth_left;
  EXPECT_EQ(reason_of(mouth_region(d, spec)), CropReason::mouth_too_small);
}

TEST(ExtractTest, NoseSquareMatchesHandComputedGeometry) {
  const CropSpec spec;  // nose_scale 0.35
  DetectionRecord d = passing_detection();
  d.bbox.width = 100;
  d.landmarks.nose = Point{115, 140};
  // Side 0.35 * 100 = 35; pixels 98..132 and 123..157 put (115, 140) in the
  // middle of a 35-pixel run on each axis.
  const PixelRect r = rect_of(nose_region(d, spec));
  EXPECT_EQ(r, (PixelRect{98, 123, 133, 158}));
  EXPECT_EQ(r.width(), 35);
  EXPECT_EQ(r.height(), 35);
  EXPECT_EQ((r.x0 + r.x1 - 1) / 2, 115);
  EXPECT_EQ((r.y0 + r.y1 - 1) / 2, 140);
  EXPECT_EQ(reason_of(nose_region(std::nullopt, spec)), CropReason::no_face);
}

TEST(ExtractTest, NoseSideHasAFloor) {
  const CropSpec spec;
  DetectionRecord d = passing_detection();
  d.bbox.width = 20;
  EXPECT_EQ(rect_of(nose_region(d, spec)).width(), kNoseMinSide);
}

TEST(ExtractTest, ThresholdBoundarySweep) {
  const CropSpec spec;
  for (const auto& c : testing::threshold_cases()) {
    CropRegion region;
    switch (c.feature) {
      case Feature::face: region = face_region(c.det); break;
      case Feature::eyes: region = eyes_region(c.det, spec); break;
      case Feature::mouth: region = mouth_region(c.det, spec); break;
      case Feature::nose: region = nose_region(c.det, spec); break;
    }
    EXPECT_EQ(reason_of(region), c.expected) << c.name;
  }
}

TEST(ExtractTest, ThresholdsAreConfigurable) {
  DetectionRecord d = passing_detection();
  d.bbox.height = d.bbox.width + 10;
  EXPECT_EQ(reason_of(face_region(d, 15)), CropReason::too_narrow);
  EXPECT_EQ(reason_of(face_region(d, 10)), CropReason::ok);
}

// --- extractors writing files -----------------------------------------------

TEST(ExtractTest, AcceptedCropsHaveRequiredSizeAndAreDeterministic) {
  TempDir a, b;
  const Raster img = gradient(400, 400);
  CropSpec spec;
  spec.required_width = 64;
  spec.required_height = 48;
  const DetectionRecord d = passing_detection("im1");
  for (Feature f : kAllFeatures) {
    const CropOutcome o1 = extract_feature(f, img, d, spec, a.path());
    const CropOutcome o2 = extract_feature(f, img, d, spec, b.path());
    ASSERT_TRUE(o1.accepted) << to_string(f);
    ASSERT_TRUE(o1.crop_path.has_value());
    EXPECT_EQ(*o1.crop_path, std::string(to_string(f)) + "/im1.png");
    const Raster crop = read_png(a / *o1.crop_path);
    EXPECT_EQ(crop.width, 64);
    EXPECT_EQ(crop.height, 48);
    EXPECT_EQ(read_file(a / *o1.crop_path), read_file(b / *o2.crop_path));
  }
}

TEST(ExtractTest, RejectionWritesNothing) {
  TempDir dir;
  const CropOutcome o = extract_face(gradient(50, 50), std::nullopt, CropSpec{}, dir.path());
  EXPECT_FALSE(o.accepted);
  EXPECT_EQ(o.reason, CropReason::no_face);
  EXPECT_FALSE(o.crop_path.has_value());
  EXPECT_FALSE(fs::exists(dir / "face"));
}

TEST(ExtractTest, CropFullyOutsideImageIsOutOfBounds) {
  TempDir dir;
  DetectionRecord d = passing_detection();
  d.bbox = {500, 500, 100, 130};
  const CropOutcome o = extract_face(gradient(100, 100), d, CropSpec{}, dir.path());
  EXPECT_EQ(o.reason, CropReason::out_of_bounds);
  EXPECT_FALSE(o.accepted);
}

TEST(ExtractTest, NoseAtCornerIsClampedAndAccepted) {
  TempDir dir;
  DetectionRecord d = passing_detection();
  d.landmarks.nose = Point{0, 0};
  const CropOutcome o = extract_nose(gradient(100, 100), d, CropSpec{}, dir.path());
  EXPECT_TRUE(o.accepted);
  EXPECT_EQ(read_png(dir / *o.crop_path).width, CropSpec{}.required_width);
}

TEST(ExtractTest, CropSpecValidation) {
  CropSpec s;
  s.required_width = 0;
  EXPECT_EQ(error_kind_of([&] { s.validate(); }), ErrorKind::validation);
  CropSpec m;
  m.mouth_pad = -1;
  EXPECT_EQ(error_kind_of([&] { m.validate(); }), ErrorKind::validation);
}

// --- detection records ----------------------------------------------------------

TEST(DetectionTest, JsonRoundTrip) {
  const DetectionRecord d = passing_detection("42");
  const json j = detection_to_json(d, "42");
  EXPECT_EQ(j.at("id"), "42");
  EXPECT_EQ(j.at("bbox").at("width"), 160);
  EXPECT_EQ(j.at("landmarks").at("left_eye"), json::array({130, 150}));
  EXPECT_EQ(detection_from_json(j), d);
  const json none = detection_to_json(std::nullopt, "43");
  EXPECT_TRUE(none.at("no_face").get<bool>());
  EXPECT_FALSE(detection_from_json(none).has_value());
}

TEST(DetectionTest, ContractViolationsAreValidationErrors) {
  DetectionRecord swapped = passing_detection();
  std::swap(swapped.landmarks.left_eye, swapped.landmarks.right_eye);
  EXPECT_EQ(error_kind_of([&] { validate_detection(swapped); }), ErrorKind::validation);
  DetectionRecord flat = passing_detection();
  flat.bbox.width = 0;
  EXPECT_EQ(error_kind_of([&] { validate_detection(flat); }), ErrorKind::validation);
  DetectionRecord conf = passing_detection();
  conf.confidence = 1.5;
  EXPECT_EQ(error_kind_of([&] { validate_detection(conf); }), ErrorKind::validation);
}

TEST(DetectionTest, FileKeepsFirstRecordPerId) {
  TempDir dir;
  DetectionRecord first = passing_detection("a");
  DetectionRecord second = passing_detection("a");
  second.confidence = 0.5;
  write_file_atomic(dir / "d.jsonl", detection_to_json(first, "a").dump() + "\n" +
                                         detection_to_json(second, "a").dump() + "\n");
  const DetectionMap m = read_detections(dir / "d.jsonl");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m.at("a")->confidence, 0.99);
  write_detections(dir / "out.jsonl", m);
  EXPECT_EQ(read_detections(dir / "out.jsonl"), m);
}

// --- run_extraction ---------------------------------------------------------------

struct Corpus {
  TempDir dir;
  ImageManifest manifest;
  DetectionMap dets;
};

void add_image(Corpus& c, const std::string& id, std::optional<DetectionRecord> det) {
  write_png(c.dir / ("img/" + id + ".png"), gradient(400, 400));
  c.manifest.entries.push_back({id, "img/" + id + ".png", {"caption " + id}, {}});
  if (det) det->image_id = id;
  c.dets[id] = det;
}

TEST(RunExtractionTest, AllPassingImages) {
  Corpus c;
  c.manifest.root = c.dir.path().string();
  for (const char* id : {"1", "2", "3"}) add_image(c, id, passing_detection());
  const auto s = run_extraction(c.manifest, c.dets, CropSpec{}, {Feature::face}, c.dir / "out");
  const FeatureResult& face = s.features.at(Feature::face);
  EXPECT_EQ(face.manifest.entries.size(), 3u);
  EXPECT_EQ(face.counts.at(CropReason::ok), 3u);
  EXPECT_EQ(face.total(), 3u);
  EXPECT_EQ(face.manifest.entries[0].captions, (std::vector<std::string>{"caption 1"}));
}

TEST(RunExtractionTest, CountsPartitionTheInput) {
  Corpus c;
  c.manifest.root = c.dir.path().string();
  DetectionRecord narrow = passing_detection();
  narrow.bbox.height = narrow.bbox.width;
  DetectionRecord squint = passing_detection();
  squint.landmarks.right_eye->y += 20;
  add_image(c, "1", passing_detection());
  add_image(c, "2", narrow);
  add_image(c, "3", squint);
  add_image(c, "4", std::nullopt);
  c.manifest.entries.push_back({"5", "img/5.png", {"no detection record"}, {}});
  const auto s = run_extraction(c.manifest, c.dets, CropSpec{},
                                {kAllFeatures.begin(), kAllFeatures.end()}, c.dir / "out");
  for (const auto& [f, r] : s.features) {
    EXPECT_EQ(r.total(), 5u) << to_string(f);
    EXPECT_EQ(r.counts.size(), kAllCropReasons.size());
    EXPECT_EQ(r.counts.at(CropReason::ok), r.manifest.entries.size());
  }
  EXPECT_EQ(s.features.at(Feature::face).counts.at(CropReason::too_narrow), 1u);
  EXPECT_EQ(s.features.at(Feature::face).counts.at(CropReason::no_face), 2u);
  EXPECT_EQ(s.features.at(Feature::eyes).counts.at(CropReason::eyes_geometry), 1u);
  EXPECT_EQ(s.to_json().at("face").at("counts").at("ok"), 2);
}

TEST(RunExtractionTest, MissingEyeLandmarks) {
  Corpus c;
  c.manifest.root = c.dir.path().string();
  DetectionRecord d = passing_detection();
  d.landmarks.left_eye.reset();
  d.landmarks.right_eye.reset();
  add_image(c, "1", d);
  add_image(c, "2", std::nullopt);
  const auto s = run_extraction(c.manifest, c.dets, CropSpec{}, {Feature::eyes}, c.dir / "out");
  const auto& r = s.features.at(Feature::eyes);
  EXPECT_EQ(r.counts.at(CropReason::eyes_geometry) + r.counts.at(CropReason::no_face), 2u);
  EXPECT_TRUE(r.manifest.entries.empty());
}

TEST(RunExtractionTest, ParallelRunMatchesSerialRun) {
  Corpus c;
  c.manifest.root = c.dir.path().string();
  for (int i = 0; i < 12; ++i) {
    DetectionRecord d = passing_detection();
    d.bbox.height = d.bbox.width + 10 + i;  // first five fail the face gate
    add_image(c, std::to_string(i), d);
  }
  const std::vector<Feature> all(kAllFeatures.begin(), kAllFeatures.end());
  const auto serial = run_extraction(c.manifest, c.dets, CropSpec{}, all, c.dir / "s", {}, 1);
  const auto parallel = run_extraction(c.manifest, c.dets, CropSpec{}, all, c.dir / "p", {}, 4);
  EXPECT_EQ(serial.to_json(), parallel.to_json());
  for (Feature f : all) {
    const auto& a = serial.features.at(f).manifest.entries;
    const auto& b = parallel.features.at(f).manifest.entries;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].id, b[i].id);
      EXPECT_EQ(read_file(c.dir / ("s/" + a[i].image_path)), read_file(c.dir / ("p/" + b[i].image_path)));
    }
  }
  EXPECT_EQ(serial.features.at(Feature::face).counts.at(CropReason::too_narrow), 5u);
}

TEST(RunExtractionTest, UndecodableImageSurfacesAsInputError) {
  Corpus c;
  c.manifest.root = c.dir.path().string();
  write_file_atomic(c.dir / "img/bad.png", "garbage");
  c.manifest.entries.push_back({"bad", "img/bad.png", {"x"}, {}});
  c.dets["bad"] = passing_detection("bad");
  EXPECT_EQ(error_kind_of([&] {
              run_extraction(c.manifest, c.dets, CropSpec{}, {Feature::face}, c.dir / "out", {}, 2);
            }),
            ErrorKind::input);
}

TEST(RunExtractionTest, MockDetectorRatesReproduceExactly) {
  Corpus c;
  c.manifest.root = c.dir.path().string();
  std::vector<AdapterItem> items;
  for (int i = 0; i < 40; ++i) {
    const std::string id = std::to_string(i);
    Raster r = mock_image("face " + id, static_cast<std::size_t>(i), 1, 256);
    write_png(c.dir / ("img/" + id + ".png"), r);
    c.manifest.entries.push_back({id, "img/" + id + ".png", {"x"}, {}});
    items.push_back({id, (c.dir / ("img/" + id + ".png")).string()});
  }
  MockAdapter detector(std::map<std::string, std::string>{{"too_narrow_rate", "0.5"}});
  const DetectionMap dets = detect_items(detector, items, 3);
  const auto s = run_extraction(c.manifest, dets, CropSpec{}, {Feature::face}, c.dir / "out");
  EXPECT_EQ(s.features.at(Feature::face).counts.at(CropReason::too_narrow), 20u);
  EXPECT_EQ(s.features.at(Feature::face).counts.at(CropReason::ok), 20u);
}

}  // namespace
}  // namespace t2i
