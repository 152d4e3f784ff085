#pragma once

// Independent reference implementations used as test oracles. None of these call the
// library routine they are checking.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "rotdet/codec.hpp"
#include "rotdet/detection.hpp"
#include "rotdet/geometry.hpp"
#include "rotdet/loss.hpp"

namespace rotdet::testing {

inline constexpr double kPi = std::numbers::pi;

inline RotatedBoxd random_box(std::mt19937_64& gen, double extent = 100.0, double min_side = 2.0,
                              double max_side = 40.0) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> side(min_side, max_side);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  return {pos(gen), pos(gen), side(gen), side(gen), angle(gen)};
}

/// Box near `anchor` so that random pairs overlap often.
inline RotatedBoxd random_box_near(std::mt19937_64& gen, const RotatedBoxd& anchor) {
  std::uniform_real_distribution<double> shift(-20.0, 20.0);
  std::uniform_real_distribution<double> side(3.0, 40.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  return {anchor.cx + shift(gen), anchor.cy + shift(gen), side(gen), side(gen), angle(gen)};
}

inline bool point_in_box(double x, double y, const RotatedBoxd& b) {
  // Undo the clockwise rotation (y down): local = R(-theta) * (p - c).
  const double dx = x - b.cx;
  const double dy = y - b.cy;
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= b.w / 2 && std::abs(ly) <= b.h / 2;
}

inline void box_bounds(const RotatedBoxd& b, double& x0, double& y0, double& x1, double& y1) {
  const double ex = (std::abs(b.w * std::cos(b.theta)) + std::abs(b.h * std::sin(b.theta))) / 2;
  const double ey = (std::abs(b.w * std::sin(b.theta)) + std::abs(b.h * std::cos(b.theta))) / 2;
  x0 = b.cx - ex;
  x1 = b.cx + ex;
  y0 = b.cy - ey;
  y1 = b.cy + ey;
}

/// Monte-Carlo IoU with one jittered sample per cell of a side x side grid laid over the
/// union's bounding rectangle.
inline double monte_carlo_iou(const RotatedBoxd& a, const RotatedBoxd& b, std::mt19937_64& gen, int side = 1000) {
  double ax0, ay0, ax1, ay1, bx0, by0, bx1, by1;
  box_bounds(a, ax0, ay0, ax1, ay1);
  box_bounds(b, bx0, by0, bx1, by1);
  const double x0 = std::min(ax0, bx0), x1 = std::max(ax1, bx1);
  const double y0 = std::min(ay0, by0), y1 = std::max(ay1, by1);
  const double cw = (x1 - x0) / side;
  const double ch = (y1 - y0) / side;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long long in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double x = x0 + (j + u(gen)) * cw;
      const double y = y0 + (i + u(gen)) * ch;
      const bool pa = point_in_box(x, y, a);
      const bool pb = point_in_box(x, y, b);
      in_a += pa;
      in_b += pb;
      in_both += pa && pb;
    }
  }
  const long long uni = in_a + in_b - in_both;
  return uni == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(uni);
}

/// Same point set test: every corner of one box coincides with some corner of the other.
inline bool same_point_set(const RotatedBoxd& a, const RotatedBoxd& b, double tol = 1e-9) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  for (int i = 0; i < 4; ++i) {
    bool found = false;
    for (int j = 0; j < 4; ++j) found = found || (ca.col(i) - cb.col(j)).norm() < tol;
    if (!found) return false;
  }
  return true;
}

/// Greedy NMS by repeated arg-max.
inline std::vector<Detection> brute_nms(std::vector<Detection> dets, double iou_threshold) {
  std::vector<Detection> kept;
  while (!dets.empty()) {
    auto best = dets.begin();
    for (auto it = dets.begin(); it != dets.end(); ++it) {
      const auto key = [](const Detection& d) {
        return std::make_tuple(-d.conf, d.box.cy, d.box.cx, d.box.w, d.box.h, d.box.theta);
      };
      if (key(*it) < key(*best)) best = it;
    }
    const Detection top = *best;
    kept.push_back(top);
    std::vector<Detection> rest;
    for (auto it = dets.begin(); it != dets.end(); ++it) {
      if (it == best) continue;
      if (iou(it->box, top.box) <= iou_threshold) rest.push_back(*it);
    }
    dets = std::move(rest);
  }
  return kept;
}

struct OracleFrame {
  std::vector<Detection> preds;
  std::vector<RotatedBoxd> gts;
};

/// True positives among predictions with conf >= threshold, greedy in descending confidence.
inline int oracle_true_positives(const OracleFrame& frame, double threshold, double iou_thr) {
  std::vector<Detection> preds;
  for (const auto& p : frame.preds)
    if (p.conf >= threshold) preds.push_back(p);
  std::stable_sort(preds.begin(), preds.end(), [](const Detection& a, const Detection& b) { return a.conf > b.conf; });
  std::vector<bool> used(frame.gts.size(), false);
  int tp = 0;
  for (const auto& p : preds) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < frame.gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(canonicalize(p.box), frame.gts[g]);
      if (v >= iou_thr && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
  }
  return tp;
}

/// AP by sweeping every distinct confidence as a threshold; precision envelope, all points.
inline double oracle_average_precision(std::span<const OracleFrame> frames, double iou_thr = 0.5) {
  std::vector<double> thresholds;
  std::size_t num_gts = 0;
  for (const auto& f : frames) {
    num_gts += f.gts.size();
    for (const auto& p : f.preds) thresholds.push_back(p.conf);
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  for (double t : thresholds) {
    int tp = 0, n = 0;
    for (const auto& f : frames) {
      tp += oracle_true_positives(f, t, iou_thr);
      for (const auto& p : f.preds) n += p.conf >= t;
    }
    points.emplace_back(static_cast<double>(tp) / static_cast<double>(num_gts), static_cast<double>(tp) / n);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  std::sort(points.begin(), points.end());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double envelope = 0.0;
    for (std::size_t j = i; j < points.size(); ++j) envelope = std::max(envelope, points[j].second);
    ap += (points[i].first - prev_recall) * envelope;
    prev_recall = points[i].first;
  }
  return ap;
}

inline double plain_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double plain_bce(double p, double t) {
  const double lp = std::log(std::max(p, 1e-12));
  const double lq = std::log(std::max(1.0 - p, 1e-12));
  return -(t * lp + (1 - t) * lq);
}

/// Periodic loss as the minimum of f over the pi-translates of the difference.
inline double oracle_angle_loss(double theta_hat, double theta, AngleLossKind kind) {
  const bool l1 = kind == AngleLossKind::kPlainL1 || kind == AngleLossKind::kPeriodicL1;
  const auto f = [l1](double d) { return l1 ? std::abs(d) : d * d; };
  const double d = theta_hat - theta;
  if (kind == AngleLossKind::kPlainL1 || kind == AngleLossKind::kPlainL2) return f(d);
  double best = std::numeric_limits<double>::infinity();
  for (int k = -6; k <= 6; ++k) best = std::min(best, f(d + k * kPi));
  return best;
}

/// Straight-line evaluation of the detection loss for a given assignment.
inline double oracle_total_loss(const RawPredictions& raw, std::span<const RotatedBoxd> gts,
                                const Assignment& assignment, const HeadLayout& layout, const LossOptions& opt) {
  double total = 0.0;
  std::vector<bool> positive(layout.slot_count(), false);
  for (const auto& pos : assignment.positives) {
    positive[pos.slot_index] = true;
    const RotatedBoxd& gt = gts[pos.gt_index];
    const GridSpec grid = layout.grid(pos.slot.level);
    const AnchorShape& anchor = layout.anchor(pos.slot.level, pos.slot.anchor);
    const double s = grid.stride;
    const double tx = gt.cx / s - std::floor(gt.cx / s);
    const double ty = gt.cy / s - std::floor(gt.cy / s);
    const double tw = std::log(gt.w / anchor.w);
    const double th = std::log(gt.h / anchor.h);
    const auto r = raw.row(static_cast<Eigen::Index>(pos.slot_index));
    total += plain_bce(plain_sigmoid(r(0)), tx) + plain_bce(plain_sigmoid(r(1)), ty);
    if (opt.size == SizeLossForm::kSigmoidAsPrinted) {
      total += std::pow(plain_sigmoid(r(2)) - tw, 2) + std::pow(plain_sigmoid(r(3)) - th, 2);
    } else {
      total += std::pow(r(2) - tw, 2) + std::pow(r(3) - th, 2);
    }
    const double theta_hat = opt.codec.bounded() ? opt.codec.alpha * plain_sigmoid(r(4)) - opt.codec.beta : r(4);
    total += oracle_angle_loss(theta_hat, gt.theta, opt.angle);
    total += plain_bce(plain_sigmoid(r(5)), 1.0);
  }
  for (std::size_t i = 0; i < layout.slot_count(); ++i) {
    if (positive[i] || assignment.roles[i] != SlotRole::kNegative) continue;
    total += plain_bce(plain_sigmoid(raw(static_cast<Eigen::Index>(i), 5)), 0.0);
  }
  return total;
}

/// Small single-level layout for loss and gradient tests.
inline HeadLayout small_layout(int cells = 2, int stride = 32) {
  return HeadLayout(cells * stride, cells * stride, {stride},
                    {LevelAnchors{AnchorShape{10, 24}, AnchorShape{16, 40}, AnchorShape{24, 64}}});
}

}  // namespace rotdet::testing
