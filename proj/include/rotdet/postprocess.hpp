#pragma once

#include <span>
#include <vector>

#include "rotdet/detection.hpp"

namespace rotdet {

struct NmsConfig {
  double conf_threshold = 0.3;
  double iou_threshold = 0.45;

  void validate() const;
};

/// Detections with conf >= threshold, in their original order.
std::vector<Detection> confidence_filter(std::span<const Detection> dets, double threshold);

/// Strict weak order used to rank detections: confidence descending, then
/// (cy, cx, w, h, theta) ascending.
bool ranks_before(const Detection& a, const Detection& b);

/// Class-agnostic greedy rotated NMS: walk detections best-first and drop every later one whose
/// IoU with a kept detection exceeds cfg.iou_threshold. The output is ranked best-first.
/// Confidence filtering is a separate step (see confidence_filter / postprocess).
std::vector<Detection> nms(std::span<const Detection> dets, const NmsConfig& cfg);

/// Inference-side pipeline: confidence filter, then NMS.
std::vector<Detection> postprocess(std::span<const Detection> dets, const NmsConfig& cfg);

}  // namespace rotdet
