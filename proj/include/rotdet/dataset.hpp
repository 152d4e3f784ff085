#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rotdet/detection.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

/// One annotated person. The id is stable across the frames of a video.
struct Annotation {
  std::int64_t person_id = 0;
  RotatedBoxd box;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotatedFrame {
  std::int64_t index = 0;
  std::vector<Annotation> objects;

  std::vector<RotatedBoxd> boxes() const;
  friend bool operator==(const AnnotatedFrame&, const AnnotatedFrame&) = default;
};

struct AnnotatedVideo {
  std::string name;
  int image_width = 0;
  int image_height = 0;
  std::vector<AnnotatedFrame> frames;

  friend bool operator==(const AnnotatedVideo&, const AnnotatedVideo&) = default;
};

struct AnnotationSet {
  std::vector<AnnotatedVideo> videos;

  std::size_t object_count() const;
  const AnnotatedVideo* find(const std::string& name) const;
  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

struct PredictedFrame {
  std::int64_t index = 0;
  std::vector<Detection> detections;

  friend bool operator==(const PredictedFrame&, const PredictedFrame&) = default;
};

struct PredictedVideo {
  std::string name;
  std::vector<PredictedFrame> frames;

  friend bool operator==(const PredictedVideo&, const PredictedVideo&) = default;
};

struct PredictionSet {
  std::vector<PredictedVideo> videos;

  std::size_t detection_count() const;
  const PredictedVideo* find(const std::string& name) const;
  /// Every detection of every frame, in file order.
  std::vector<Detection> all_detections() const;
  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

}  // namespace rotdet
