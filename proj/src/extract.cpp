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
#include "t2i/extract.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "t2i/error.hpp"
#include "t2i/fileio.hpp"

namespace t2i {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_detection(const DetectionRecord& det) {
  if (det.bbox.width <= 0 || det.bbox.height <= 0) {
    throw Error(ErrorKind::validation,
                "detection for '" + det.image_id + "' has a non-positive box");
  }
  if (det.confidence < 0.0 || det.confidence > 1.0) {
    throw Error(ErrorKind::validation,
                "detection for '" + det.image_id + "' has confidence outside [0,1]");
  }
  const auto& lm = det.landmarks;
  if (lm.left_eye && lm.right_eye && lm.left_eye->x > lm.right_eye->x) {
    throw Error(ErrorKind::validation,
                "detection for '" + det.image_id + "' has left_eye right of right_eye");
  }
}

namespace {

json point_json(const std::optional<Point>& p) {
  if (!p) return nullptr;
  return json::array({p->x, p->y});
}

std::optional<Point> point_from(const json& landmarks, const char* key) {
  if (!landmarks.contains(key) || landmarks.at(key).is_null()) return std::nullopt;
  const json& v = landmarks.at(key);
  if (v.is_array() && v.size() == 2) {
    return Point{static_cast<int>(std::lround(v[0].get<double>())),
                 static_cast<int>(std::lround(v[1].get<double>()))};
  }
  return Point{static_cast<int>(std::lround(v.at("x").get<double>())),
               static_cast<int>(std::lround(v.at("y").get<double>()))};
}

}  // namespace

json detection_to_json(const std::optional<DetectionRecord>& det, std::string_view id) {
  if (!det) return json{{"id", id}, {"no_face", true}};
  const auto& lm = det->landmarks;
  json landmarks = json::object();
  auto put = [&](const char* key, const std::optional<Point>& p) {
    if (p) landmarks[key] = point_json(p);
  };
  put("left_eye", lm.left_eye);
  put("right_eye", lm.right_eye);
  put("nose", lm.nose);
  put("mouth_left", lm.mouth_left);
  put("mouth_right", lm.mouth_right);
  return json{{"id", id},
              {"confidence", det->confidence},
              {"bbox",
               {{"x", det->bbox.x},
                {"y", det->bbox.y},
                {"width", det->bbox.width},
                {"height", det->bbox.height}}},
              {"landmarks", landmarks}};
}

std::optional<DetectionRecord> detection_from_json(const json& j) {
  try {
    if (j.value("no_face", false)) return std::nullopt;
    DetectionRecord det;
    if (j.contains("id")) det.image_id = j.at("id").get<std::string>();
    det.confidence = j.at("confidence").get<double>();
    const json& b = j.at("bbox");
    det.bbox = {static_cast<int>(std::lround(b.at("x").get<double>())),
                static_cast<int>(std::lround(b.at("y").get<double>())),
                static_cast<int>(std::lround(b.at("width").get<double>())),
                static_cast<int>(std::lround(b.at("height").get<double>()))};
    const json lm = j.value("landmarks", json::object());
    det.landmarks.left_eye = point_from(lm, "left_eye");
    det.landmarks.right_eye = point_from(lm, "right_eye");
    det.landmarks.nose = point_from(lm, "nose");
    det.landmarks.mouth_left = point_from(lm, "mouth_left");
    det.landmarks.mouth_right = point_from(lm, "mouth_right");
    validate_detection(det);
    return det;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad detection record: ") + e.what());
  }
}

DetectionMap read_detections(const fs::path& path) {
  DetectionMap out;
  for (const json& rec : read_json_lines(path)) {
    const std::string id = rec.at("id").get<std::string>();
    if (out.count(id)) continue;
    out.emplace(id, detection_from_json(rec));
  }
  return out;
}

void write_detections(const fs::path& path, const DetectionMap& dets) {
  std::string text;
  for (const auto& [id, det] : dets) {
    text += detection_to_json(det, id).dump();
    text += '\n';
  }
  write_file_atomic(path, text);
}

void CropSpec::validate() const {
  if (required_width <= 0 || required_height <= 0) {
    throw Error(ErrorKind::validation, "required_size must be positive");
  }
  if (eye_margin_x < 0 || eye_margin_y < 0 || mouth_pad < 0 || nose_scale < 0) {
    throw Error(ErrorKind::validation, "crop margins must be non-negative");
  }
}

std::string_view to_string(CropReason reason) {
  switch (reason) {
    case CropReason::ok: return "ok";
    case CropReason::no_face: return "no_face";
    case CropReason::too_narrow: return "too_narrow";
    case CropReason::eyes_geometry: return "eyes_geometry";
    case CropReason::mouth_too_small: return "mouth_too_small";
    case CropReason::out_of_bounds: return "out_of_bounds";
  }
  return "unknown";
}

std::string_view to_string(Feature feature) {
  switch (feature) {
    case Feature::face: return "face";
    case Feature::eyes: return "eyes";
    case Feature::mouth: return "mouth";
    case Feature::nose: return "nose";
  }
  return "unknown";
}

Feature parse_feature(std::string_view text) {
  for (Feature f : kAllFeatures) {
    if (to_string(f) == text) return f;
  }
  throw Error(ErrorKind::usage,
              "unknown feature '" + std::string(text) + "' (expected face|eyes|mouth|nose)");
}

CropRegion face_region(const std::optional<DetectionRecord>& det, int min_elongation) {
  if (!det) return CropReason::no_face;
  const BoundingBox& b = det->bbox;
  if (b.height - b.width < min_elongation) return CropReason::too_narrow;
  // Negative detector coordinates are reflected, not clamped.
  const int x1 = std::abs(b.x);
  const int y1 = std::abs(b.y);
  return PixelRect{x1, y1, x1 + b.width, y1 + b.height};
}

CropRegion eyes_region(const std::optional<DetectionRecord>& det, const CropSpec& spec,
                       int min_x_diff, int max_y_diff) {
  if (!det) return CropReason::no_face;
  const auto& lm = det->landmarks;
  if (!lm.left_eye || !lm.right_eye) return CropReason::eyes_geometry;
  const Point l = *lm.left_eye;
  const Point r = *lm.right_eye;
  const int x_diff = r.x - l.x;
  const int y_diff = std::abs(r.y - l.y);
  if (x_diff < min_x_diff || y_diff >= max_y_diff) return CropReason::eyes_geometry;
  return PixelRect{l.x - spec.eye_margin_x, std::min(l.y, r.y) - spec.eye_margin_y,
                   r.x + spec.eye_margin_x, std::max(l.y, r.y) + spec.eye_margin_y};
}

CropRegion mouth_region(const std::optional<DetectionRecord>& det, const CropSpec& spec,
                        int min_width) {
  if (!det) return CropReason::no_face;
  const auto& lm = det->landmarks;
  if (!lm.mouth_left || !lm.mouth_right) return CropReason::mouth_too_small;
  const Point l = *lm.mouth_left;
  const Point r = *lm.mouth_right;
  const int width = r.x - l.x;
  if (width < min_width) return CropReason::mouth_too_small;
  const double cy = (l.y + r.y) / 2.0;
  const double half = kMouthHeightRatio * width / 2.0;
  return PixelRect{l.x - spec.mouth_pad, static_cast<int>(std::lround(cy - half)),
                   r.x + spec.mouth_pad, static_cast<int>(std::lround(cy + half))};
}

CropRegion nose_region(const std::optional<DetectionRecord>& det, const CropSpec& spec) {
  if (!det || !det->landmarks.nose) return CropReason::no_face;
  const Point n = *det->landmarks.nose;
  const int side = std::max(
      kNoseMinSide, static_cast<int>(std::lround(spec.nose_scale * det->bbox.width)));
  const int x0 = n.x - side / 2;
  const int y0 = n.y - side / 2;
  return PixelRect{x0, y0, x0 + side, y0 + side};
}

namespace {

CropOutcome finish_crop(const CropRegion& region, const Raster& image,
                        const std::optional<DetectionRecord>& det, const CropSpec& spec,
                        Feature feature, const fs::path& out_root) {
  CropOutcome out;
  if (const auto* reason = std::get_if<CropReason>(&region)) {
    out.reason = *reason;
    return out;
  }
  const PixelRect rect = clamp_to(std::get<PixelRect>(region), image.width, image.height);
  if (rect.empty()) {
    out.reason = CropReason::out_of_bounds;
    return out;
  }
  const Raster resized =
      resize_bilinear(crop(image, rect), spec.required_width, spec.required_height);
  const std::string rel = std::string(to_string(feature)) + "/" + det->image_id + ".png";
  write_png(out_root / rel, resized);
  out.accepted = true;
  out.reason = CropReason::ok;
  out.crop_path = rel;
  return out;
}

}  // namespace

CropOutcome extract_face(const Raster& image, const std::optional<DetectionRecord>& det,
                         const CropSpec& spec, const fs::path& out_root,
                         int min_elongation) {
  return finish_crop(face_region(det, min_elongation), image, det, spec, Feature::face,
                     out_root);
}

CropOutcome extract_eyes(const Raster& image, const std::optional<DetectionRecord>& det,
                         const CropSpec& spec, const fs::path& out_root, int min_x_diff,
                         int max_y_diff) {
  return finish_crop(eyes_region(det, spec, min_x_diff, max_y_diff), image, det, spec,
                     Feature::eyes, out_root);
}

CropOutcome extract_mouth(const Raster& image, const std::optional<DetectionRecord>& det,
                          const CropSpec& spec, const fs::path& out_root, int min_width) {
  return finish_crop(mouth_region(det, spec, min_width), image, det, spec, Feature::mouth,
                     out_root);
}

CropOutcome extract_nose(const Raster& image, const std::optional<DetectionRecord>& det,
                         const CropSpec& spec, const fs::path& out_root) {
  return finish_crop(nose_region(det, spec), image, det, spec, Feature::nose, out_root);
}

CropOutcome extract_feature(Feature feature, const Raster& image,
                            const std::optional<DetectionRecord>& det, const CropSpec& spec,
                            const fs::path& out_root, const GateThresholds& gates) {
  switch (feature) {
    case Feature::face:
      return extract_face(image, det, spec, out_root, gates.face_min_elongation);
    case Feature::eyes:
      return extract_eyes(image, det, spec, out_root, gates.eye_min_x_diff,
                          gates.eye_max_y_diff);
    case Feature::mouth:
      return extract_mouth(image, det, spec, out_root, gates.mouth_min_width);
    case Feature::nose:
      return extract_nose(image, det, spec, out_root);
  }
  return {};
}

std::size_t FeatureResult::total() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : counts) n += count;
  return n;
}

json ExtractionSummary::to_json() const {
  json out = json::object();
  for (const auto& [feature, result] : features) {
    json counts = json::object();
    for (const auto& [reason, n] : result.counts) counts[std::string(to_string(reason))] = n;
    out[std::string(to_string(feature))] = {{"accepted", result.manifest.entries.size()},
                                            {"total", result.total()},
                                            {"counts", counts}};
  }
  return out;
}

ExtractionSummary run_extraction(const ImageManifest& manifest, const DetectionMap& detections,
                                 const CropSpec& spec, const std::vector<Feature>& features,
                                 const fs::path& out_root, const GateThresholds& gates,
                                 unsigned jobs) {
  spec.validate();
  const std::size_t n = manifest.entries.size();
  std::vector<std::vector<CropOutcome>> outcomes(n);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const ManifestEntry& entry = manifest.entries[i];
        std::optional<DetectionRecord> det;
        if (auto it = detections.find(entry.id); it != detections.end() && it->second) {
          det = it->second;
          det->image_id = entry.id;
        }
        Raster image;
        if (det) image = read_png(manifest.resolve(entry));
        auto& slot = outcomes[i];
        for (Feature f : features) {
          slot.push_back(extract_feature(f, image, det, spec, out_root, gates));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExtractionSummary summary;
  for (std::size_t k = 0; k < features.size(); ++k) {
    const Feature f = features[k];
    FeatureResult& result = summary.features[f];
    for (CropReason r : kAllCropReasons) result.counts[r] = 0;
    result.manifest.source_name = manifest.source_name + "/" + std::string(to_string(f));
    result.manifest.axis = manifest.axis;
    result.manifest.root = out_root.string();
    for (std::size_t i = 0; i < n; ++i) {
      const CropOutcome& o = outcomes[i][k];
      ++result.counts[o.reason];
      if (o.accepted) {
        const ManifestEntry& src = manifest.entries[i];
        result.manifest.entries.push_back(
            {src.id, *o.crop_path, src.captions, {std::string(to_string(f))}});
      }
    }
    std::stable_sort(result.manifest.entries.begin(), result.manifest.entries.end(),
                     [](const ManifestEntry& a, const ManifestEntry& b) { return IdLess{}(a.id, b.id); });
  }
  return summary;
}

}  // namespace t2i
