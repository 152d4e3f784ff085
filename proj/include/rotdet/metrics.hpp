#pragma once

// Detection evaluation at a single IoU threshold: greedy matching, the
// precision-recall curve, AP (area under the precision envelope, all-point),
// precision/recall/F at a fixed confidence, and per-video averaging.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rotdet/dataset.hpp"
#include "rotdet/detection.hpp"

namespace rotdet {

inline constexpr double kEvalIouThreshold = 0.5;
inline constexpr double kEvalConfThreshold = 0.3;

struct Match {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

/// Matching result for one frame. Indices refer to the caller's prediction and gt order.
struct FrameEval {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
  std::vector<double> pred_conf;  // confidence of every prediction, by index
  std::size_t num_gts = 0;

  /// True-positive flag per prediction index.
  std::vector<bool> true_positive_flags() const;
};

/// Greedy matching: predictions are visited best-first (see ranks_before); each takes the
/// unmatched ground truth with the highest IoU, provided that IoU >= iou_threshold.
/// Predictions are canonicalized first.
FrameEval match_frame(std::span<const Detection> preds, std::span<const RotatedBoxd> gts,
                      double iou_threshold = kEvalIouThreshold);

struct PrPoint {
  double threshold = 0.0;  // confidence at which this point is reached
  double recall = 0.0;
  double precision = 0.0;
};

/// One point per distinct confidence, from the highest confidence down.
std::vector<PrPoint> pr_curve(std::span<const FrameEval> frames);

/// Area under the monotone precision envelope. Throws ValidationError without ground truth.
double average_precision(std::span<const FrameEval> frames);

struct OperatingPoint {
  double precision = 1.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

/// Precision, recall and F over predictions with conf >= `conf`. With no such prediction
/// precision is 1 and recall 0. Throws ValidationError without ground truth.
OperatingPoint fixed_threshold_metrics(std::span<const FrameEval> frames, double conf = kEvalConfThreshold);

double f_measure(double precision, double recall);

struct VideoReport {
  std::string name;
  double ap50 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::size_t num_gts = 0;
  std::size_t num_preds = 0;

  friend bool operator==(const VideoReport&, const VideoReport&) = default;
};

struct EvalReport {
  double ap50 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::vector<PrPoint> pr_curve;
  std::vector<VideoReport> per_video;
  bool pooled = false;
  double iou_threshold = kEvalIouThreshold;
  double conf_threshold = kEvalConfThreshold;
};

struct EvalOptions {
  double iou_threshold = kEvalIouThreshold;
  double conf_threshold = kEvalConfThreshold;
  /// Pool all frames instead of averaging per-video metrics.
  bool pooled = false;
};

/// Dataset metrics. By default each metric is the mean of the per-video metrics, so the
/// dataset F is not in general the harmonic mean of the dataset P and R. The PR curve is
/// always computed over all frames pooled.
EvalReport evaluate(const AnnotationSet& gts, const PredictionSet& preds, const EvalOptions& options = {});

/// Frames of one video, matched; frames missing from `preds` count as having no detections.
std::vector<FrameEval> match_video(const AnnotatedVideo& gt, const PredictedVideo* preds, double iou_threshold);

struct AspectRatioHistogram {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  /// Share of detections with h / w >= 1; absent for empty input.
  std::optional<double> fraction_at_least_one;

  double bin_width() const { return counts.empty() ? 0.0 : (upper - lower) / static_cast<double>(counts.size()); }
};

/// Histogram of h / w of the detections exactly as given (no canonicalization), over
/// [0, max(2, floor(max ratio) + 1)) in `bins` equal bins. With an even bin count the
/// ratio 1 sits on a bin edge.
AspectRatioHistogram aspect_ratio_histogram(std::span<const Detection> dets, std::size_t bins);

}  // namespace rotdet
