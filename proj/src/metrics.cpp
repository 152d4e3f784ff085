#include "rotdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rotdet/errors.hpp"
#include "rotdet/postprocess.hpp"

namespace rotdet {
namespace {

struct Scored {
  double conf;
  bool tp;
};

std::vector<Scored> collect(std::span<const FrameEval> frames, std::size_t& total_gts) {
  total_gts = 0;
  std::vector<Scored> all;
  for (const FrameEval& f : frames) {
    total_gts += f.num_gts;
    const auto flags = f.true_positive_flags();
    for (std::size_t i = 0; i < f.pred_conf.size(); ++i) all.push_back({f.pred_conf[i], flags[i]});
  }
  std::stable_sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.conf > b.conf; });
  return all;
}

}  // namespace

std::vector<bool> FrameEval::true_positive_flags() const {
  std::vector<bool> flags(pred_conf.size(), false);
  for (const Match& m : matches) flags[m.pred] = true;
  return flags;
}

FrameEval match_frame(std::span<const Detection> preds, std::span<const RotatedBoxd> gts, double iou_threshold) {
  FrameEval out;
  out.num_gts = gts.size();
  out.pred_conf.reserve(preds.size());
  std::vector<Detection> canon;
  canon.reserve(preds.size());
  for (const Detection& d : preds) {
    canon.push_back(canonicalized(d));
    out.pred_conf.push_back(d.conf);
  }

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(canon[a], canon[b]); });

  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<bool> pred_matched(preds.size(), false);
  for (std::size_t p : order) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g]) continue;
      const double v = iou(canon[p].box, gts[g]);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      gt_taken[best_gt] = true;
      pred_matched[p] = true;
      out.matches.push_back({p, best_gt, best});
    }
  }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!pred_matched[p]) out.unmatched_preds.push_back(p);
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_taken[g]) out.unmatched_gts.push_back(g);
  return out;
}

std::vector<PrPoint> pr_curve(std::span<const FrameEval> frames) {
  std::size_t total_gts = 0;
  const auto all = collect(frames, total_gts);
  if (total_gts == 0) throw ValidationError("recall is undefined without ground-truth objects");

  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double conf = all[i].conf;
    // Equal confidences enter together: a threshold cannot separate them.
    for (; i < all.size() && all[i].conf == conf; ++i) {
      tp += all[i].tp ? 1 : 0;
      ++seen;
    }
    curve.push_back({conf, static_cast<double>(tp) / static_cast<double>(total_gts),
                     static_cast<double>(tp) / static_cast<double>(seen)});
  }
  return curve;
}

double average_precision(std::span<const FrameEval> frames) {
  const auto curve = pr_curve(frames);
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * envelope[i];
    prev_recall = curve[i].recall;
  }
  return ap;
}

double f_measure(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

OperatingPoint fixed_threshold_metrics(std::span<const FrameEval> frames, double conf) {
  std::size_t total_gts = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const FrameEval& f : frames) {
    total_gts += f.num_gts;
    const auto flags = f.true_positive_flags();
    for (std::size_t i = 0; i < f.pred_conf.size(); ++i) {
      if (f.pred_conf[i] < conf) continue;
      (flags[i] ? tp : fp) += 1;
    }
  }
  if (total_gts == 0) throw ValidationError("recall is undefined without ground-truth objects");
  OperatingPoint op;
  op.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  op.recall = static_cast<double>(tp) / static_cast<double>(total_gts);
  op.f_measure = f_measure(op.precision, op.recall);
  return op;
}

std::vector<FrameEval> match_video(const AnnotatedVideo& gt, const PredictedVideo* preds, double iou_threshold) {
  std::map<std::int64_t, const PredictedFrame*> by_index;
  if (preds != nullptr) {
    for (const auto& f : preds->frames) {
      if (!by_index.emplace(f.index, &f).second) {
        throw ValidationError("video '" + gt.name + "': duplicate prediction frame " + std::to_string(f.index));
      }
    }
  }
  std::vector<FrameEval> out;
  out.reserve(gt.frames.size());
  for (const AnnotatedFrame& frame : gt.frames) {
    const auto boxes = frame.boxes();
    const auto it = by_index.find(frame.index);
    if (it == by_index.end()) {
      out.push_back(match_frame({}, boxes, iou_threshold));
    } else {
      out.push_back(match_frame(it->second->detections, boxes, iou_threshold));
      by_index.erase(it);
    }
  }
  if (!by_index.empty()) {
    throw ValidationError("video '" + gt.name + "': predictions for frame " + std::to_string(by_index.begin()->first) +
                          " which has no annotation");
  }
  return out;
}

EvalReport evaluate(const AnnotationSet& gts, const PredictionSet& preds, const EvalOptions& options) {
  for (const auto& v : preds.videos) {
    if (gts.find(v.name) == nullptr) throw ValidationError("predictions for unknown video '" + v.name + "'");
  }
  if (gts.videos.empty()) throw ValidationError("annotation set has no videos");

  EvalReport report;
  report.pooled = options.pooled;
  report.iou_threshold = options.iou_threshold;
  report.conf_threshold = options.conf_threshold;

  std::vector<FrameEval> pooled;
  for (const AnnotatedVideo& video : gts.videos) {
    const PredictedVideo* pv = preds.find(video.name);
    auto frames = match_video(video, pv, options.iou_threshold);
    VideoReport vr;
    vr.name = video.name;
    for (const auto& f : frames) {
      vr.num_gts += f.num_gts;
      vr.num_preds += f.pred_conf.size();
    }
    if (vr.num_gts == 0) throw ValidationError("video '" + video.name + "' has no ground-truth objects");
    vr.ap50 = average_precision(frames);
    const auto op = fixed_threshold_metrics(frames, options.conf_threshold);
    vr.precision = op.precision;
    vr.recall = op.recall;
    vr.f_measure = op.f_measure;
    report.per_video.push_back(vr);
    pooled.insert(pooled.end(), std::make_move_iterator(frames.begin()), std::make_move_iterator(frames.end()));
  }

  report.pr_curve = pr_curve(pooled);
  if (options.pooled) {
    report.ap50 = average_precision(pooled);
    const auto op = fixed_threshold_metrics(pooled, options.conf_threshold);
    report.precision = op.precision;
    report.recall = op.recall;
    report.f_measure = op.f_measure;
  } else {
    const double n = static_cast<double>(report.per_video.size());
    for (const auto& vr : report.per_video) {
      report.ap50 += vr.ap50 / n;
      report.precision += vr.precision / n;
      report.recall += vr.recall / n;
      report.f_measure += vr.f_measure / n;
    }
  }
  return report;
}

AspectRatioHistogram aspect_ratio_histogram(std::span<const Detection> dets, std::size_t bins) {
  AspectRatioHistogram hist;
  if (dets.empty() || bins == 0) return hist;
  std::vector<double> ratios;
  ratios.reserve(dets.size());
  for (const Detection& d : dets) {
    validate(d.box);
    ratios.push_back(d.box.h / d.box.w);
  }
  const double max_ratio = *std::max_element(ratios.begin(), ratios.end());
  hist.upper = std::max(2.0, std::floor(max_ratio) + 1.0);
  hist.counts.assign(bins, 0);
  hist.total = ratios.size();
  std::size_t at_least_one = 0;
  const double width = hist.bin_width();
  for (double r : ratios) {
    auto bin = static_cast<std::size_t>((r - hist.lower) / width);
    hist.counts[std::min(bin, bins - 1)] += 1;
    if (r >= 1.0) ++at_least_one;
  }
  hist.fraction_at_least_one = static_cast<double>(at_least_one) / static_cast<double>(hist.total);
  return hist;
}

}  // namespace rotdet
