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
#ifndef T2I_EXTRACT_HPP
#define T2I_EXTRACT_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "t2i/image.hpp"
#include "t2i/ingest.hpp"

namespace t2i {

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const BoundingBox&) const = default;
};

// Five-point landmarks. A detector may omit any of them.
struct Landmarks {
  std::optional<Point> left_eye;
  std::optional<Point> right_eye;
  std::optional<Point> nose;
  std::optional<Point> mouth_left;
  std::optional<Point> mouth_right;
  bool operator==(const Landmarks&) const = default;
};

struct DetectionRecord {
  std::string image_id;
  double confidence = 0.0;
  BoundingBox bbox;
  Landmarks landmarks;
  bool operator==(const DetectionRecord&) const = default;
};

// Positive box and left_eye.x <= right_eye.x; throws Error{validation}.
void validate_detection(const DetectionRecord& det);

// Line schema: {"id", "confidence", "bbox":{x,y,width,height},
// "landmarks":{"left_eye":[x,y], ...}}. A no-face line is {"id", "no_face":true}.
nlohmann::json detection_to_json(const std::optional<DetectionRecord>& det,
                                 std::string_view id);
// Returns nullopt for a no_face record. Sets image_id from "id" when given.
std::optional<DetectionRecord> detection_from_json(const nlohmann::json& j);

using DetectionMap = std::map<std::string, std::optional<DetectionRecord>, IdLess>;

// Keeps the first record seen per id.
DetectionMap read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, const DetectionMap& dets);

struct CropSpec {
  int required_width = 160;
  int required_height = 160;
  int eye_margin_x = 10;
  int eye_margin_y = 15;
  int mouth_pad = 8;
  double nose_scale = 0.35;

  void validate() const;
};

inline constexpr double kMouthHeightRatio = 0.6;
inline constexpr int kNoseMinSide = 24;

struct GateThresholds {
  int face_min_elongation = 15;  // height - width
  int eye_min_x_diff = 100;
  int eye_max_y_diff = 8;  // strict: |dy| < max
  int mouth_min_width = 35;
};

enum class CropReason { ok, no_face, too_narrow, eyes_geometry, mouth_too_small, out_of_bounds };
inline constexpr std::array<CropReason, 6> kAllCropReasons = {
    CropReason::ok,            CropReason::no_face,         CropReason::too_narrow,
    CropReason::eyes_geometry, CropReason::mouth_too_small, CropReason::out_of_bounds};

std::string_view to_string(CropReason reason);

enum class Feature { face, eyes, mouth, nose };
inline constexpr std::array<Feature, 4> kAllFeatures = {Feature::face, Feature::eyes,
                                                        Feature::mouth, Feature::nose};

std::string_view to_string(Feature feature);
Feature parse_feature(std::string_view text);

struct CropOutcome {
  bool accepted = false;
  CropReason reason = CropReason::no_face;
  std::optional<std::string> crop_path;  // set iff accepted
};

// Crop geometry per feature: either the (unclamped) source rectangle or the
// reason the gate rejected it. No image access.
using CropRegion = std::variant<PixelRect, CropReason>;

CropRegion face_region(const std::optional<DetectionRecord>& det,
                       int min_elongation = 15);
CropRegion eyes_region(const std::optional<DetectionRecord>& det, const CropSpec& spec,
                       int min_x_diff = 100, int max_y_diff = 8);
CropRegion mouth_region(const std::optional<DetectionRecord>& det, const CropSpec& spec,
                        int min_width = 35);
CropRegion nose_region(const std::optional<DetectionRecord>& det, const CropSpec& spec);

// Each extractor applies its gate, clamps the rectangle to the image, resizes
// to spec.required_* and writes `<out_root>/<feature>/<image_id>.png`.
// crop_path in the outcome is relative to out_root.
CropOutcome extract_face(const Raster& image, const std::optional<DetectionRecord>& det,
                         const CropSpec& spec, const std::filesystem::path& out_root,
                         int min_elongation = 15);
CropOutcome extract_eyes(const Raster& image, const std::optional<DetectionRecord>& det,
                         const CropSpec& spec, const std::filesystem::path& out_root,
                         int min_x_diff = 100, int max_y_diff = 8);
CropOutcome extract_mouth(const Raster& image, const std::optional<DetectionRecord>& det,
                          const CropSpec& spec, const std::filesystem::path& out_root,
                          int min_width = 35);
CropOutcome extract_nose(const Raster& image, const std::optional<DetectionRecord>& det,
                         const CropSpec& spec, const std::filesystem::path& out_root);

CropOutcome extract_feature(Feature feature, const Raster& image,
                            const std::optional<DetectionRecord>& det, const CropSpec& spec,
                            const std::filesystem::path& out_root,
                            const GateThresholds& gates = {});

struct FeatureResult {
  ImageManifest manifest;                  // accepted crops, root = out_root
  std::map<CropReason, std::size_t> counts;  // every reason present, zero or not
  std::size_t total() const;
};

struct ExtractionSummary {
  std::map<Feature, FeatureResult> features;
  nlohmann::json to_json() const;
};

// Missing detections count as no_face. Images are decoded once each; work is
// spread over `jobs` threads and assembled in manifest order.
ExtractionSummary run_extraction(const ImageManifest& manifest, const DetectionMap& detections,
                                 const CropSpec& spec, const std::vector<Feature>& features,
                                 const std::filesystem::path& out_root,
                                 const GateThresholds& gates = {}, unsigned jobs = 1);

}  // namespace t2i

#endif  // T2I_EXTRACT_HPP
