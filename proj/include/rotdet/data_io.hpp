#pragma once

// On-disk formats. All files are UTF-8 JSON with a "format" tag and an integer
// "version"; angles are stored in degrees in [-90, 90) and held in radians in memory.
//
// Annotations (format "rotdet-annotations", version 1):
//
//   {"format": "rotdet-annotations", "version": 1, "angle_unit": "degrees",
//    "videos": [{"name": "v0", "image_width": 608, "image_height": 608,
//                "frames": [{"frame": 0,
//                            "objects": [{"person_id": 3, "cx": 301.5, "cy": 122.0,
//                                         "w": 38.0, "h": 96.0, "angle": -12.5}]}]}]}
//
// Predictions (format "rotdet-predictions", version 1): same nesting, with
// "detections": [{"cx", "cy", "w", "h", "angle", "conf"}] instead of "objects".
//
// Boxes are validated and canonicalized on load. Saved angles are rounded to 1e-10 degree,
// so save(load(save(x))) is byte-identical to save(x).

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rotdet/dataset.hpp"
#include "rotdet/metrics.hpp"

namespace rotdet {

inline constexpr int kSchemaVersion = 1;

double degrees_to_radians(double degrees);
double radians_to_degrees(double radians);

AnnotationSet parse_annotations(std::string_view text);
AnnotationSet load_annotations(const std::filesystem::path& path);
std::string annotations_to_string(const AnnotationSet& set);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

PredictionSet parse_predictions(std::string_view text);
PredictionSet load_predictions(const std::filesystem::path& path);
std::string predictions_to_string(const PredictionSet& set);
void save_predictions(const PredictionSet& set, const std::filesystem::path& path);

/// Best-effort import of a COCO-style rotated-box file ("images" with id/width/height,
/// "annotations" with image_id, "bbox": [cx, cy, w, h, degrees] and optional "person_id")
/// into a single video. Frames are numbered by image id.
AnnotationSet import_coco_rotated(std::string_view text, const std::string& video_name);

/// Evaluation report as JSON (all numbers at full precision).
nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);
/// "recall,precision,threshold" rows at full precision.
std::string pr_curve_csv(const std::vector<PrPoint>& curve);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace rotdet
