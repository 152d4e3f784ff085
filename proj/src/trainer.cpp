#include "rotdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

#include "rotdet/errors.hpp"
#include "rotdet/metrics.hpp"

namespace rotdet {
namespace {

constexpr double kPi = std::numbers::pi;

const PositiveSample& positive_for(const Assignment& a, std::size_t gt) {
  for (const auto& p : a.positives)
    if (p.gt_index == gt) return p;
  throw ValidationError("ground truth " + std::to_string(gt) + " has no positive slot");
}

TrajectoryStep record(const RawPredictions& raw, const PositiveSample& pos, const HeadLayout& layout,
                      const LossOptions& options, const RotatedBoxd& gt, const LossBreakdown& loss) {
  const Detection det = decode(raw.row(static_cast<Eigen::Index>(pos.slot_index)), pos.slot, layout, options.codec);
  return {loss, det.box, det.conf, angular_distance_mod_pi(det.box.theta, gt.theta)};
}

// Initial angle uniform over the annotation range, conditioned on
// min_abs <= |theta0 - theta| < max_abs.
double draw_initial_angle(double theta, double min_abs, double max_abs, Rng& rng) {
  const double lo = std::max(-kPi / 2, theta - max_abs);
  const double hi = std::min(kPi / 2, theta + max_abs);
  const double hole_lo = std::max(lo, theta - min_abs);
  const double hole_hi = std::min(hi, theta + min_abs);
  const double left = std::max(0.0, hole_lo - lo);
  const double right = std::max(0.0, hi - hole_hi);
  if (left + right <= 0.0) throw ConfigError("no initial angle satisfies the offset bounds");
  const double u = rng.uniform(0.0, left + right);
  return u < left ? lo + u : hole_hi + (u - left);
}

}  // namespace

void FitConfig::validate() const {
  if (!(learning_rate > 0) || steps <= 0) throw ConfigError("learning rate and steps must be positive");
  if (static_cast<std::size_t>(init.rows()) != layout.slot_count()) {
    throw ConfigError("initial predictions do not match the head layout");
  }
  loss.codec.validate();
}

Trajectory fit(const FitConfig& cfg, std::span<const RotatedBoxd> gts, std::size_t tracked_gt) {
  cfg.validate();
  if (tracked_gt >= gts.size()) throw ConfigError("tracked ground truth index out of range");
  RawPredictions raw = cfg.init;
  const Assignment assignment = assign(gts, cfg.layout, raw, cfg.loss.codec, cfg.ignore_iou);
  const PositiveSample& tracked = positive_for(assignment, tracked_gt);
  const RotatedBoxd& gt = gts[tracked_gt];

  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  for (int step = 0;; ++step) {
    const LossResult result = total_loss(raw, gts, assignment, cfg.layout, cfg.loss);
    if (!std::isfinite(result.parts.total) || !result.gradient.allFinite()) {
      traj.diverged = true;
      break;
    }
    traj.steps.push_back(record(raw, tracked, cfg.layout, cfg.loss, gt, result.parts));
    if (step == cfg.steps) break;
    const double lr = cfg.schedule == LrSchedule::kConstant
                          ? cfg.learning_rate
                          : cfg.learning_rate * (1.0 - static_cast<double>(step) / cfg.steps);
    raw -= lr * result.gradient;
  }
  const Detection last = decode(raw.row(static_cast<Eigen::Index>(tracked.slot_index)), tracked.slot, cfg.layout, cfg.loss.codec);
  traj.final_box = last.box;
  traj.final_angular_error = angular_distance_mod_pi(last.box.theta, gt.theta);
  traj.final_raw = std::move(raw);
  return traj;
}

Trajectory fit(const FitConfig& cfg, const RotatedBoxd& gt) { return fit(cfg, std::span<const RotatedBoxd>(&gt, 1)); }

RawPredictions initial_predictions(const HeadLayout& layout, std::span<const RotatedBoxd> gts,
                                   std::span<const double> angle_offsets, const CodecParams& params,
                                   const InitNoise& noise, Rng* rng) {
  if (angle_offsets.size() != gts.size()) throw ConfigError("need one angle offset per ground truth");
  if ((noise.center_px > 0 || noise.size_rel > 0) && rng == nullptr) throw ConfigError("init noise requires an Rng");
  RawPredictions raw = layout.zeros();
  raw.col(kTconf).setConstant(kBackgroundLogit);
  const Assignment a = assign(gts, layout, raw, params, 1.0);
  for (const PositiveSample& pos : a.positives) {
    const RotatedBoxd& gt = gts[pos.gt_index];
    const GridSpec g = layout.grid(pos.slot.level);
    const AnchorShape& anchor = layout.anchor(pos.slot.level, pos.slot.anchor);
    double cx = gt.cx;
    double cy = gt.cy;
    double w = gt.w;
    double h = gt.h;
    if (rng != nullptr) {
      cx += rng->normal(0.0, noise.center_px);
      cy += rng->normal(0.0, noise.center_px);
      w *= std::exp(rng->normal(0.0, noise.size_rel));
      h *= std::exp(rng->normal(0.0, noise.size_rel));
    }
    // Keep the center inside the positive slot's cell.
    const double fx = std::clamp(cx / g.stride - pos.slot.col, 1e-3, 1 - 1e-3);
    const double fy = std::clamp(cy / g.stride - pos.slot.row, 1e-3, 1 - 1e-3);
    auto row = raw.row(static_cast<Eigen::Index>(pos.slot_index));
    row(kTx) = logit(fx);
    row(kTy) = logit(fy);
    row(kTw) = std::log(w / anchor.w);
    row(kTh) = std::log(h / anchor.h);
    row(kTtheta) = encode_angle(wrap_half_turn(gt.theta + angle_offsets[pos.gt_index]), params);
    row(kTconf) = 0.0;
  }
  return raw;
}

FitDemo make_fit_demo(AngleLossKind kind, const CodecParams& params, double gt_theta, double angle_offset,
                      double learning_rate, int steps) {
  HeadLayout layout(64, 64, {32}, {LevelAnchors{AnchorShape{16, 40}, AnchorShape{24, 60}, AnchorShape{32, 80}}});
  const RotatedBoxd gt = canonicalize(RotatedBoxd{40.0, 36.0, 20.0, 50.0, gt_theta});
  const double offsets[] = {angle_offset};
  RawPredictions init = initial_predictions(layout, std::span<const RotatedBoxd>(&gt, 1), offsets, params);
  FitConfig cfg{std::move(layout), LossOptions{kind, params, SizeLossForm::kLogSpace}, learning_rate, steps,
                kDefaultIgnoreIou, std::move(init)};
  return {std::move(cfg), gt};
}

GradientCheck finite_diff_check(const RawPredictions& raw, std::span<const RotatedBoxd> gts,
                                const Assignment& assignment, const HeadLayout& layout, const LossOptions& options,
                                double step, double scale_floor) {
  const RawPredictions analytic = total_loss(raw, gts, assignment, layout, options).gradient;
  RawPredictions probe = raw;
  GradientCheck check;
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    for (Eigen::Index c = 0; c < kRawFields; ++c) {
      const double original = probe(r, c);
      probe(r, c) = original + step;
      const double up = total_loss(probe, gts, assignment, layout, options).parts.total;
      probe(r, c) = original - step;
      const double down = total_loss(probe, gts, assignment, layout, options).parts.total;
      probe(r, c) = original;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic(r, c);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), scale_floor});
      if (rel > check.max_rel_error || (r == 0 && c == 0)) {
        check = {rel, static_cast<std::size_t>(r), c, a, numeric};
      }
    }
  }
  return check;
}

std::string AblationVariant::label() const { return codec.range_label() + " " + std::string(to_string(kind)); }

std::vector<AblationVariant> angle_table_variants() {
  return {
      {CodecParams::unbounded(), AngleLossKind::kPlainL1},  {CodecParams::full_turn(), AngleLossKind::kPlainL1},
      {CodecParams::full_turn(), AngleLossKind::kPeriodicL1}, {CodecParams::unbounded(), AngleLossKind::kPlainL2},
      {CodecParams::full_turn(), AngleLossKind::kPlainL2},  {CodecParams::full_turn(), AngleLossKind::kPeriodicL2},
  };
}

AblationConfig AblationConfig::defaults(std::uint64_t seed) {
  AblationConfig cfg;
  cfg.scene.seed = seed;
  cfg.scene.image_size = 256;
  cfg.scene.frames = 6;
  cfg.scene.people_min = 2;
  cfg.scene.people_max = 5;
  cfg.scene.fov_fraction = 0.9;
  cfg.scene.person_height_min = 30.0;
  cfg.scene.person_height_max = 80.0;
  cfg.scene.motion_px = 8.0;
  cfg.scene.with_predictions = false;
  return cfg;
}

void AblationConfig::validate() const {
  scene.validate();
  if (scene.image_size % 32 != 0) throw ConfigError("ablation image size must be a multiple of 32");
  if (variants.empty()) throw ConfigError("ablation needs at least one variant");
  if (!(learning_rate > 0) || steps <= 0) throw ConfigError("learning rate and steps must be positive");
  if (!(min_abs_offset >= 0) || !(max_abs_offset > min_abs_offset)) {
    throw ConfigError("need 0 <= min_abs_offset < max_abs_offset");
  }
}

std::vector<AblationRow> synthetic_ablation(const AblationConfig& cfg) {
  cfg.validate();
  SynthConfig scene_cfg = cfg.scene;
  scene_cfg.with_predictions = false;
  const AnnotationSet gts = generate_scene(scene_cfg).annotations;

  // One angle offset per ground truth, shared by every variant.
  Rng rng(cfg.scene.seed ^ 0xab1a7e5eedULL);
  std::vector<std::vector<std::vector<double>>> offsets;
  for (const auto& video : gts.videos) {
    auto& per_frame = offsets.emplace_back();
    for (const auto& frame : video.frames) {
      auto& list = per_frame.emplace_back();
      for (const Annotation& object : frame.objects) {
        list.push_back(draw_initial_angle(object.box.theta, cfg.min_abs_offset, cfg.max_abs_offset, rng) -
                       object.box.theta);
      }
    }
  }
  const std::uint64_t noise_seed = rng.next();

  auto run_variant = [&](const AblationVariant& variant) {
    AblationRow row;
    row.variant = variant;
    Rng noise_rng(noise_seed);
    PredictionSet preds;
    double error_sum = 0.0;
    std::size_t gt_count = 0;
    std::size_t converged = 0;
    for (std::size_t v = 0; v < gts.videos.size(); ++v) {
      const AnnotatedVideo& video = gts.videos[v];
      const HeadLayout layout = HeadLayout::default_layout(video.image_width, video.image_height);
      PredictedVideo pv;
      pv.name = video.name;
      for (std::size_t f = 0; f < video.frames.size(); ++f) {
        const auto boxes = video.frames[f].boxes();
        PredictedFrame pf;
        pf.index = video.frames[f].index;
        if (!boxes.empty()) {
          FitConfig fc{layout, LossOptions{variant.kind, variant.codec, SizeLossForm::kLogSpace}, cfg.learning_rate,
                       cfg.steps, kDefaultIgnoreIou,
                       initial_predictions(layout, boxes, offsets[v][f], variant.codec, cfg.init_noise, &noise_rng)};
          const Trajectory traj = fit(fc, boxes);
          const auto decoded = decode_all(traj.final_raw, layout, variant.codec);
          const Assignment a = assign(boxes, layout, fc.init, variant.codec, kDefaultIgnoreIou);
          for (const auto& pos : a.positives) {
            const RotatedBoxd& b = decoded[pos.slot_index].box;
            error_sum += angular_distance_mod_pi(b.theta, boxes[pos.gt_index].theta);
            if (iou(b, boxes[pos.gt_index]) >= 0.5) ++converged;
            ++gt_count;
          }
          const auto confident = confidence_filter(decoded, cfg.prefilter_conf);
          pf.detections = nms(confident, NmsConfig{cfg.prefilter_conf, cfg.nms_iou});
          row.detections.insert(row.detections.end(), pf.detections.begin(), pf.detections.end());
        }
        pv.frames.push_back(std::move(pf));
      }
      preds.videos.push_back(std::move(pv));
    }
    row.ap50 = evaluate(gts, preds).ap50;
    row.mean_angular_error = gt_count ? error_sum / static_cast<double>(gt_count) : 0.0;
    row.converged_fraction = gt_count ? static_cast<double>(converged) / static_cast<double>(gt_count) : 0.0;
    return row;
  };

  std::vector<std::future<AblationRow>> jobs;
  for (const auto& variant : cfg.variants) jobs.push_back(std::async(std::launch::async, run_variant, variant));
  std::vector<AblationRow> rows;
  for (auto& job : jobs) rows.push_back(job.get());
  return rows;
}

}  // namespace rotdet
