#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rotdet/codec.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

enum class AngleLossKind { kPlainL1, kPlainL2, kPeriodicL1, kPeriodicL2 };

std::string_view to_string(AngleLossKind kind);
/// Accepts "plain-l1", "plain-l2", "periodic-l1", "periodic-l2".
AngleLossKind parse_angle_loss_kind(std::string_view name);
bool is_periodic(AngleLossKind kind);

/// Folds an angle difference into [-pi/2, pi/2): mod(d - pi/2, pi) - pi/2.
double wrap_angle_difference(double difference);

/// Angle regression loss. Periodic kinds evaluate f(mod(theta_hat - theta - pi/2, pi) - pi/2),
/// which is pi-periodic in either argument; plain kinds evaluate f(theta_hat - theta).
double angle_loss(double theta_hat, double theta, AngleLossKind kind);

/// d angle_loss / d theta_hat. At the kinks the L1 kinds return 0 for a zero residual;
/// a periodic residual sitting exactly on -pi/2 uses the derivative from the left (+pi/2) side.
double angle_loss_grad(double theta_hat, double theta, AngleLossKind kind);

enum class SlotRole : std::uint8_t { kNegative = 0, kPositive = 1, kIgnored = 2 };

struct PositiveSample {
  SlotId slot;
  std::size_t slot_index = 0;
  std::size_t gt_index = 0;
};

/// Partition of all prediction slots into positives, negatives and ignored slots.
struct Assignment {
  std::vector<PositiveSample> positives;
  std::vector<SlotRole> roles;  // one per slot

  std::size_t count(SlotRole role) const;
};

inline constexpr double kDefaultIgnoreIou = 0.7;

/// Width/height IoU of two co-centered axis-aligned boxes.
double shape_iou(double w1, double h1, double w2, double h2);

/// YOLO-style assignment. Each ground truth takes the (level, anchor) whose shape IoU is
/// highest, at the cell containing its center; if that slot already belongs to another
/// ground truth the next best anchor is used. Remaining slots whose decoded box overlaps
/// any ground truth with rotated IoU above `ignore_iou` are ignored; the rest are negatives.
Assignment assign(std::span<const RotatedBoxd> gts, const HeadLayout& layout, const RawPredictions& raw,
                  const CodecParams& params, double ignore_iou = kDefaultIgnoreIou);

/// How the size term compares predictions to log-space targets.
enum class SizeLossForm {
  kSigmoidAsPrinted,  // (sig(tw_hat) - tw)^2, the published form
  kLogSpace,          // (tw_hat - tw)^2, consistent with the exponential decode
};

struct LossOptions {
  AngleLossKind angle = AngleLossKind::kPeriodicL1;
  CodecParams codec = CodecParams::full_turn();
  SizeLossForm size = SizeLossForm::kSigmoidAsPrinted;
};

struct LossBreakdown {
  double xy = 0.0;
  double wh = 0.0;
  double angle = 0.0;
  double conf_pos = 0.0;
  double conf_neg = 0.0;
  double total = 0.0;
};

struct LossResult {
  LossBreakdown parts;
  RawPredictions gradient;  // d total / d raw, same shape as the predictions
};

/// Binary cross-entropy with the logs clamped at 1e-12.
double bce(double p, double target);

/// Single-class detection loss: BCE on sig(tx), sig(ty) and the objectness, the size term,
/// and the angle term on the decoded angle, summed in slot order.
LossResult total_loss(const RawPredictions& raw, std::span<const RotatedBoxd> gts, const Assignment& assignment,
                      const HeadLayout& layout, const LossOptions& options);

}  // namespace rotdet
