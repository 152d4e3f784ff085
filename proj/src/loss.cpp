#include "rotdet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rotdet/errors.hpp"

namespace rotdet {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogEpsilon = 1e-12;

double residual(double theta_hat, double theta, AngleLossKind kind) {
  const double d = theta_hat - theta;
  return is_periodic(kind) ? wrap_angle_difference(d) : d;
}

bool is_l1(AngleLossKind kind) { return kind == AngleLossKind::kPlainL1 || kind == AngleLossKind::kPeriodicL1; }

double sign(double x) { return static_cast<double>((x > 0) - (x < 0)); }

}  // namespace

std::string_view to_string(AngleLossKind kind) {
  switch (kind) {
    case AngleLossKind::kPlainL1: return "plain-l1";
    case AngleLossKind::kPlainL2: return "plain-l2";
    case AngleLossKind::kPeriodicL1: return "periodic-l1";
    case AngleLossKind::kPeriodicL2: return "periodic-l2";
  }
  return "unknown";
}

AngleLossKind parse_angle_loss_kind(std::string_view name) {
  for (auto kind : {AngleLossKind::kPlainL1, AngleLossKind::kPlainL2, AngleLossKind::kPeriodicL1,
                    AngleLossKind::kPeriodicL2}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown angle loss '" + std::string(name) + "'");
}

bool is_periodic(AngleLossKind kind) {
  return kind == AngleLossKind::kPeriodicL1 || kind == AngleLossKind::kPeriodicL2;
}

double wrap_angle_difference(double difference) {
  const double shifted = difference - kPi / 2;
  double m = shifted - kPi * std::floor(shifted / kPi);
  if (m >= kPi) m -= kPi;
  if (m < 0) m += kPi;
  return m - kPi / 2;
}

double angle_loss(double theta_hat, double theta, AngleLossKind kind) {
  const double r = residual(theta_hat, theta, kind);
  return is_l1(kind) ? std::abs(r) : r * r;
}

double angle_loss_grad(double theta_hat, double theta, AngleLossKind kind) {
  double r = residual(theta_hat, theta, kind);
  if (is_periodic(kind) && r == -kPi / 2) r = kPi / 2;
  return is_l1(kind) ? sign(r) : 2 * r;
}

std::size_t Assignment::count(SlotRole role) const {
  return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), role));
}

double shape_iou(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  const double uni = w1 * h1 + w2 * h2 - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Assignment assign(std::span<const RotatedBoxd> gts, const HeadLayout& layout, const RawPredictions& raw,
                  const CodecParams& params, double ignore_iou) {
  if (static_cast<std::size_t>(raw.rows()) != layout.slot_count()) {
    throw ValidationError("prediction rows do not match the head layout");
  }
  Assignment out;
  out.roles.assign(layout.slot_count(), SlotRole::kNegative);

  struct Candidate {
    double score;
    std::size_t level;
    std::size_t anchor;
  };
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const RotatedBoxd& gt = gts[g];
    std::vector<Candidate> candidates;
    for (std::size_t k = 0; k < layout.num_levels(); ++k) {
      for (std::size_t n = 0; n < kAnchorsPerLevel; ++n) {
        const AnchorShape& a = layout.anchor(k, n);
        candidates.push_back({shape_iou(gt.w, gt.h, a.w, a.h), k, n});
      }
    }
    // Ties keep the earlier (smaller) anchor.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    bool placed = false;
    for (const Candidate& c : candidates) {
      const EncodedTarget t = encode_targets(gt, layout.grid(c.level), layout.anchor(c.level, c.anchor));
      const SlotId slot{c.level, c.anchor, t.row, t.col};
      const std::size_t index = layout.slot_index(slot);
      if (out.roles[index] == SlotRole::kPositive) continue;
      out.roles[index] = SlotRole::kPositive;
      out.positives.push_back({slot, index, g});
      placed = true;
      break;
    }
    if (!placed) throw ValidationError("ground truth " + std::to_string(g) + " has no free anchor slot");
  }

  if (gts.empty()) return out;
  for (std::size_t i = 0; i < layout.slot_count(); ++i) {
    if (out.roles[i] == SlotRole::kPositive) continue;
    const Detection det = decode(raw.row(static_cast<Eigen::Index>(i)), layout.slot_at(i), layout, params);
    for (const RotatedBoxd& gt : gts) {
      if (iou(det.box, gt) > ignore_iou) {
        out.roles[i] = SlotRole::kIgnored;
        break;
      }
    }
  }
  return out;
}

double bce(double p, double target) {
  return -(target * std::log(std::max(p, kLogEpsilon)) + (1 - target) * std::log(std::max(1 - p, kLogEpsilon)));
}

LossResult total_loss(const RawPredictions& raw, std::span<const RotatedBoxd> gts, const Assignment& assignment,
                      const HeadLayout& layout, const LossOptions& options) {
  const auto slots = layout.slot_count();
  if (static_cast<std::size_t>(raw.rows()) != slots || assignment.roles.size() != slots) {
    throw ValidationError("predictions, assignment and head layout disagree on the number of slots");
  }
  LossResult result;
  result.gradient = RawPredictions::Zero(raw.rows(), kRawFields);
  LossBreakdown& parts = result.parts;

  for (const PositiveSample& pos : assignment.positives) {
    if (pos.gt_index >= gts.size() || pos.slot_index >= slots || assignment.roles[pos.slot_index] != SlotRole::kPositive ||
        layout.slot_index(pos.slot) != pos.slot_index) {
      throw ValidationError("assignment is inconsistent with the ground truth or layout");
    }
    const RotatedBoxd& gt = gts[pos.gt_index];
    const auto row = static_cast<Eigen::Index>(pos.slot_index);
    const EncodedTarget t = encode_targets(gt, layout.grid(pos.slot.level), layout.anchor(pos.slot.level, pos.slot.anchor));
    auto grad = result.gradient.row(row);

    const double px = sigmoid(raw(row, kTx));
    const double py = sigmoid(raw(row, kTy));
    parts.xy += bce(px, t.tx) + bce(py, t.ty);
    grad(kTx) += px - t.tx;
    grad(kTy) += py - t.ty;

    if (options.size == SizeLossForm::kSigmoidAsPrinted) {
      const double sw = sigmoid(raw(row, kTw));
      const double sh = sigmoid(raw(row, kTh));
      parts.wh += (sw - t.tw) * (sw - t.tw) + (sh - t.th) * (sh - t.th);
      grad(kTw) += 2 * (sw - t.tw) * sw * (1 - sw);
      grad(kTh) += 2 * (sh - t.th) * sh * (1 - sh);
    } else {
      const double dw = raw(row, kTw) - t.tw;
      const double dh = raw(row, kTh) - t.th;
      parts.wh += dw * dw + dh * dh;
      grad(kTw) += 2 * dw;
      grad(kTh) += 2 * dh;
    }

    const double theta_hat = decode_angle(raw(row, kTtheta), options.codec);
    parts.angle += angle_loss(theta_hat, gt.theta, options.angle);
    grad(kTtheta) +=
        angle_loss_grad(theta_hat, gt.theta, options.angle) * decode_angle_derivative(raw(row, kTtheta), options.codec);

    const double pc = sigmoid(raw(row, kTconf));
    parts.conf_pos += bce(pc, 1.0);
    grad(kTconf) += pc - 1.0;
  }

  for (std::size_t i = 0; i < slots; ++i) {
    if (assignment.roles[i] != SlotRole::kNegative) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const double pc = sigmoid(raw(row, kTconf));
    parts.conf_neg += bce(pc, 0.0);
    result.gradient(row, kTconf) += pc;
  }

  parts.total = parts.xy + parts.wh + parts.angle + parts.conf_pos + parts.conf_neg;
  return result;
}

}  // namespace rotdet
