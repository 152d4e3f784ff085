#pragma once

// Gradient-descent fitting of raw prediction slots directly against ground truth. There is
// no network: each slot's six raw values are the parameters, so the runs isolate the
// behaviour of the loss surface (angle range, periodic vs plain angle loss).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rotdet/codec.hpp"
#include "rotdet/loss.hpp"
#include "rotdet/postprocess.hpp"
#include "rotdet/rng.hpp"
#include "rotdet/synth.hpp"

namespace rotdet {

inline constexpr double kDefaultLearningRate = 0.005;
inline constexpr int kDefaultSteps = 600;
inline constexpr int kAblationSteps = 400;
/// Objectness logit of background slots at initialization (sig(-6) ~ 0.0025).
inline constexpr double kBackgroundLogit = -6.0;

enum class LrSchedule {
  kConstant,
  kLinearDecay,  // lr * (1 - k / steps) at update k; settles the L1 limit cycle
};

struct FitConfig {
  HeadLayout layout;
  LossOptions loss{AngleLossKind::kPeriodicL1, CodecParams::full_turn(), SizeLossForm::kLogSpace};
  double learning_rate = kDefaultLearningRate;
  int steps = kDefaultSteps;
  double ignore_iou = kDefaultIgnoreIou;
  /// Starting parameters; one row per layout slot.
  RawPredictions init;
  LrSchedule schedule = LrSchedule::kLinearDecay;

  void validate() const;
};

struct TrajectoryStep {
  LossBreakdown loss;
  RotatedBoxd box;  // decoded box of the tracked ground truth's positive slot
  double conf = 0.0;
  double angular_error = 0.0;  // radians, in [0, pi/2]
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;  // initial state plus one entry per update
  bool diverged = false;
  double final_angular_error = 0.0;
  RotatedBoxd final_box;
  RawPredictions final_raw;
};

/// Plain full-batch gradient descent on every raw component, no momentum. Deterministic.
/// A non-finite loss stops the run and marks the trajectory as diverged.
Trajectory fit(const FitConfig& cfg, std::span<const RotatedBoxd> gts, std::size_t tracked_gt = 0);
Trajectory fit(const FitConfig& cfg, const RotatedBoxd& gt);

struct InitNoise {
  double center_px = 0.0;  // stddev
  double size_rel = 0.0;   // stddev of log size
};

/// Background slots at (0, 0, 0, 0, 0, kBackgroundLogit); each ground truth's positive slot
/// starts at the ground truth with its angle offset by angle_offsets[g] and folded into
/// [-pi/2, pi/2), optional center/size noise, and objectness 0.5.
RawPredictions initial_predictions(const HeadLayout& layout, std::span<const RotatedBoxd> gts,
                                   std::span<const double> angle_offsets, const CodecParams& params,
                                   const InitNoise& noise = {}, Rng* rng = nullptr);

/// Single-object scene used by the convergence demos: a 64x64 image, one stride-32 level,
/// and a ground truth of 20x50 px at (40, 36) with the given angle.
struct FitDemo {
  FitConfig config;
  RotatedBoxd gt;
};

FitDemo make_fit_demo(AngleLossKind kind, const CodecParams& params, double gt_theta, double angle_offset,
                      double learning_rate = kDefaultLearningRate, int steps = kDefaultSteps);

/// Ground-truth angle of the demo scene used for the bounded-range comparison. Offsets up to
/// 0.95 pi keep the initial angle inside (-pi/2, pi/2).
inline constexpr double kDemoGtAngle = -1.45;

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t worst_row = 0;
  Eigen::Index worst_col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the analytic gradient of total_loss with central differences over every raw
/// component. Relative error is |a - n| / max(|a|, |n|, scale_floor).
GradientCheck finite_diff_check(const RawPredictions& raw, std::span<const RotatedBoxd> gts,
                                const Assignment& assignment, const HeadLayout& layout, const LossOptions& options,
                                double step = 1e-6, double scale_floor = 1e-3);

struct AblationVariant {
  CodecParams codec;
  AngleLossKind kind = AngleLossKind::kPeriodicL1;

  std::string label() const;
};

/// The six range/loss combinations of the angle-loss comparison table.
std::vector<AblationVariant> angle_table_variants();

struct AblationConfig {
  SynthConfig scene;
  std::vector<AblationVariant> variants = angle_table_variants();
  double learning_rate = kDefaultLearningRate;
  /// Smallest budget at which every variant converges when |initial offset| < pi/2.
  int steps = kAblationSteps;
  /// Initial angles are uniform over [-pi/2, pi/2) conditioned on
  /// min_abs_offset <= |theta0 - theta| < max_abs_offset, so offsets span (-pi, pi).
  double min_abs_offset = 0.0;
  double max_abs_offset = 3.141592653589793;
  InitNoise init_noise{1.0, 0.05};
  double prefilter_conf = 0.01;
  double nms_iou = 0.45;

  /// Small scenes: 256 px images, 6 frames, 2-5 people.
  static AblationConfig defaults(std::uint64_t seed = 0);
  void validate() const;
};

struct AblationRow {
  AblationVariant variant;
  double ap50 = 0.0;
  double mean_angular_error = 0.0;  // over all ground truths, radians
  double converged_fraction = 0.0;  // share of ground truths with final IoU >= 0.5
  std::vector<Detection> detections;  // post-NMS detections of all frames
};

/// Fits every frame of the synthetic scene once per variant from identical initial states,
/// decodes, filters, runs NMS and scores AP50.
std::vector<AblationRow> synthetic_ablation(const AblationConfig& cfg);

}  // namespace rotdet
