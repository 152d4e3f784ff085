#pragma once

// Seeded synthetic overhead-fisheye scenes. People stand inside the circular field of
// view, oriented along the image radius plus Gaussian pose noise, and drift slowly
// between frames while keeping their ids. An optional corruption model turns the ground
// truth into detector-like output with known error statistics.

#include <cstdint>
#include <filesystem>
#include <optional>

#include "rotdet/dataset.hpp"
#include "rotdet/kv_config.hpp"
#include "rotdet/rng.hpp"

namespace rotdet {

struct CorruptionModel {
  double center_jitter_px = 2.0;   // stddev of the center offset
  double size_jitter = 0.05;       // stddev of the relative size change
  double angle_jitter = 0.05;      // stddev in radians
  double drop_rate = 0.1;          // probability a person is missed
  double spurious_per_frame = 0.5; // Poisson mean of false detections
  double tp_conf_mean = 0.8;
  double tp_conf_stddev = 0.1;
  double fp_conf_max = 0.6;        // false detections draw conf uniformly in [0, fp_conf_max]

  void validate() const;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int videos = 1;
  int frames = 10;
  int people_min = 2;
  int people_max = 8;
  int image_size = 608;
  double fov_fraction = 0.95;  // radius of the circular field of view / half the image size
  double person_height_min = 40.0;
  double person_height_max = 120.0;
  double aspect_min = 1.5;  // h / w, must exceed 1
  double aspect_max = 3.5;
  double pose_noise = 0.1;  // radians
  double motion_px = 3.0;   // per-frame step stddev
  bool with_predictions = true;
  CorruptionModel corruption;

  void validate() const;
  /// Overrides the defaults with any keys present (same names as the fields, corruption
  /// keys prefixed with "corruption.").
  static SynthConfig from_config(const KeyValueConfig& cfg);
};

struct SyntheticScene {
  AnnotationSet annotations;
  std::optional<PredictionSet> predictions;
};

SyntheticScene generate_scene(const SynthConfig& cfg);

/// Detector-like copy of `gts`: jittered boxes with confidences, dropped boxes and
/// spurious boxes inside each video's image.
PredictionSet corrupt(const AnnotationSet& gts, const CorruptionModel& model, Rng& rng);

}  // namespace rotdet
