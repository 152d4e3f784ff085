// rotdet: command-line front end for evaluation, geometry queries, NMS, synthetic data and
// the trainer demos.
//
// Exit codes: 0 ok, 1 internal error, 2 usage, 3 I/O, 4 parse, 5 validation.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rotdet/codec.hpp"
#include "rotdet/data_io.hpp"
#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"
#include "rotdet/kv_config.hpp"
#include "rotdet/loss.hpp"
#include "rotdet/metrics.hpp"
#include "rotdet/postprocess.hpp"
#include "rotdet/synth.hpp"
#include "rotdet/trainer.hpp"

namespace {

using namespace rotdet;

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kIo = 3, kParse = 4, kValidation = 5 };

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("ROTDET_LOG");
  if (env == nullptr) return LogLevel::kQuiet;
  const std::string v(env);
  if (v == "debug") return LogLevel::kDebug;
  if (v == "info") return LogLevel::kInfo;
  return LogLevel::kQuiet;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() == LogLevel::kQuiet) return;
  std::fprintf(stderr, "[rotdet] ");
  std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

enum class Format { kTable, kJson };

void add_format_flag(CLI::App* cmd, Format& format) {
  cmd->add_option("--format", format, "Output format")
      ->transform(CLI::CheckedTransformer(std::map<std::string, Format>{{"table", Format::kTable}, {"json", Format::kJson}}))
      ->default_str("table");
}

double angle_from_flag(double value, bool radians) { return radians ? value : degrees_to_radians(value); }

RotatedBoxd box_from_flag(const std::vector<double>& v, bool radians) {
  return {v[0], v[1], v[2], v[3], angle_from_flag(v[4], radians)};
}

void print_json(const nlohmann::json& doc) { std::cout << doc.dump(2) << '\n'; }

// ---- eval ----

struct EvalArgs {
  std::string gt;
  std::string pred;
  double conf = kEvalConfThreshold;
  double iou = kEvalIouThreshold;
  bool pooled = false;
  std::string report_path;
  std::string pr_csv_path;
  Format format = Format::kTable;
};

int run_eval(const EvalArgs& a) {
  const AnnotationSet gts = load_annotations(a.gt);
  const PredictionSet preds = load_predictions(a.pred);
  log_info("loaded %zu objects and %zu detections", gts.object_count(), preds.detection_count());
  const EvalReport report = evaluate(gts, preds, EvalOptions{a.iou, a.conf, a.pooled});
  if (!a.report_path.empty()) write_text_file(a.report_path, report_to_json(report).dump(2) + "\n");
  if (!a.pr_csv_path.empty()) write_text_file(a.pr_csv_path, pr_curve_csv(report.pr_curve));
  if (a.format == Format::kJson) {
    print_json(report_to_json(report));
    return kOk;
  }
  std::cout << "video                AP50    P       R       F       gts   preds\n";
  for (const VideoReport& v : report.per_video) {
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %s  %s  %s  %s  %5zu %7zu\n", v.name.c_str(), fixed4(v.ap50).c_str(),
                  fixed4(v.precision).c_str(), fixed4(v.recall).c_str(), fixed4(v.f_measure).c_str(), v.num_gts,
                  v.num_preds);
    std::cout << line;
  }
  std::cout << (report.pooled ? "pooled" : "mean over videos") << " (IoU " << fixed4(report.iou_threshold) << ", conf "
            << fixed4(report.conf_threshold) << ")\n";
  std::cout << "AP50 = " << fixed4(report.ap50) << "\nP = " << fixed4(report.precision)
            << "\nR = " << fixed4(report.recall) << "\nF = " << fixed4(report.f_measure) << '\n';
  return kOk;
}

// ---- iou ----

struct IouArgs {
  std::vector<double> a;
  std::vector<double> b;
  bool radians = false;
  Format format = Format::kTable;
};

int run_iou(const IouArgs& args) {
  const RotatedBoxd a = box_from_flag(args.a, args.radians);
  const RotatedBoxd b = box_from_flag(args.b, args.radians);
  validate(a);
  validate(b);
  const double value = iou(a, b);
  if (args.format == Format::kJson) {
    print_json({{"iou", value}});
  } else {
    std::cout << fixed4(value) << '\n';
  }
  return kOk;
}

// ---- nms ----

struct NmsArgs {
  std::string pred;
  std::string out;
  double conf = 0.3;
  double iou = 0.45;
  Format format = Format::kTable;
};

int run_nms(const NmsArgs& a) {
  const NmsConfig cfg{a.conf, a.iou};
  cfg.validate();
  PredictionSet preds = load_predictions(a.pred);
  const std::size_t before = preds.detection_count();
  for (auto& video : preds.videos)
    for (auto& frame : video.frames) frame.detections = postprocess(frame.detections, cfg);
  const std::size_t after = preds.detection_count();
  if (!a.out.empty()) save_predictions(preds, a.out);
  if (a.format == Format::kJson) {
    if (a.out.empty()) {
      std::cout << predictions_to_string(preds);
    } else {
      print_json({{"input_detections", before}, {"kept_detections", after}});
    }
  } else {
    std::cout << "detections in: " << before << "\nkept: " << after << '\n';
  }
  return kOk;
}

// ---- synth ----

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> videos;
  std::optional<int> frames;
  std::string gt_out;
  std::string pred_out;
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg = a.config.empty() ? SynthConfig{} : SynthConfig::from_config(KeyValueConfig::load(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.videos) cfg.videos = *a.videos;
  if (a.frames) cfg.frames = *a.frames;
  cfg.with_predictions = !a.pred_out.empty();
  const SyntheticScene scene = generate_scene(cfg);
  save_annotations(scene.annotations, a.gt_out);
  if (scene.predictions) save_predictions(*scene.predictions, a.pred_out);
  log_info("wrote %zu objects", scene.annotations.object_count());
  return kOk;
}

// ---- fit-demo ----

struct FitArgs {
  std::string loss = "periodic-l1";
  std::string range = "full";
  double gt_angle = 0.0;
  bool gt_angle_set = false;
  double offset = 0.0;
  bool radians = false;
  double lr = kDefaultLearningRate;
  int steps = kDefaultSteps;
  bool constant_lr = false;
  std::string trajectory_csv;
  Format format = Format::kTable;
};

std::string trajectory_csv(const Trajectory& t) {
  std::string out = "step,total,angle_loss,cx,cy,w,h,theta,conf,angular_error\n";
  char line[512];
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const TrajectoryStep& s = t.steps[i];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, s.loss.total,
                  s.loss.angle, s.box.cx, s.box.cy, s.box.w, s.box.h, s.box.theta, s.conf, s.angular_error);
    out += line;
  }
  return out;
}

int run_fit_demo(const FitArgs& a) {
  const AngleLossKind kind = parse_angle_loss_kind(a.loss);
  const CodecParams params = parse_angle_range(a.range);
  const double gt_theta = a.gt_angle_set ? angle_from_flag(a.gt_angle, a.radians) : kDemoGtAngle;
  FitDemo demo = make_fit_demo(kind, params, gt_theta, angle_from_flag(a.offset, a.radians), a.lr, a.steps);
  if (a.constant_lr) demo.config.schedule = LrSchedule::kConstant;
  const Trajectory t = fit(demo.config, demo.gt);
  if (!a.trajectory_csv.empty()) write_text_file(a.trajectory_csv, trajectory_csv(t));
  const TrajectoryStep& first = t.steps.front();
  const TrajectoryStep& last = t.steps.back();
  if (a.format == Format::kJson) {
    print_json({{"loss", a.loss},
                {"range", params.range_label()},
                {"steps", static_cast<int>(t.steps.size()) - 1},
                {"diverged", t.diverged},
                {"gt_theta", demo.gt.theta},
                {"initial_theta", first.box.theta},
                {"final_theta", t.final_box.theta},
                {"initial_angular_error", first.angular_error},
                {"final_angular_error", t.final_angular_error},
                {"final_iou", iou(t.final_box, demo.gt)},
                {"final_loss", last.loss.total}});
    return kOk;
  }
  std::cout << "loss " << a.loss << ", range " << params.range_label() << ", " << t.steps.size() - 1 << " steps"
            << (t.diverged ? " (diverged)" : "") << '\n';
  std::cout << "gt angle (deg):         " << fixed4(radians_to_degrees(demo.gt.theta)) << '\n';
  std::cout << "initial angle (deg):    " << fixed4(radians_to_degrees(first.box.theta)) << '\n';
  std::cout << "final angle (deg):      " << fixed4(radians_to_degrees(t.final_box.theta)) << '\n';
  std::cout << "initial error (rad):    " << fixed4(first.angular_error) << '\n';
  std::cout << "final error (rad):      " << fixed4(t.final_angular_error) << '\n';
  std::cout << "final IoU:              " << fixed4(iou(t.final_box, demo.gt)) << '\n';
  std::cout << "final loss:             " << fixed4(last.loss.total) << '\n';
  return kOk;
}

// ---- ablation ----

struct AblationArgs {
  std::uint64_t seed = 0;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<double> min_offset;
  std::optional<double> max_offset;
  bool radians = false;
  std::string out;
  Format format = Format::kTable;
};

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : rows) {
    doc.push_back({{"range", r.variant.codec.range_label()},
                   {"angle_loss", std::string(to_string(r.variant.kind))},
                   {"ap50", r.ap50},
                   {"mean_angular_error", r.mean_angular_error},
                   {"converged_fraction", r.converged_fraction}});
  }
  return doc;
}

int run_ablation(const AblationArgs& a) {
  AblationConfig cfg = AblationConfig::defaults(a.seed);
  if (a.steps) cfg.steps = *a.steps;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.min_offset) cfg.min_abs_offset = angle_from_flag(*a.min_offset, a.radians);
  if (a.max_offset) cfg.max_abs_offset = angle_from_flag(*a.max_offset, a.radians);
  const auto rows = synthetic_ablation(cfg);
  const nlohmann::json doc = ablation_json(rows);
  if (!a.out.empty()) write_text_file(a.out, doc.dump(2) + "\n");
  if (a.format == Format::kJson) {
    print_json(doc);
    return kOk;
  }
  std::cout << "Prediction range   Angle loss    AP50    mean err (rad)\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%-18s %-12s  %s  %s\n", r.variant.codec.range_label().c_str(),
                  std::string(to_string(r.variant.kind)).c_str(), fixed4(r.ap50).c_str(),
                  fixed4(r.mean_angular_error).c_str());
    std::cout << line;
  }
  return kOk;
}

// ---- hist ----

struct HistArgs {
  std::string pred;
  double conf = 0.0;
  std::size_t bins = 20;
  Format format = Format::kTable;
};

int run_hist(const HistArgs& a) {
  if (a.bins == 0) throw ConfigError("--bins must be positive");
  const PredictionSet preds = load_predictions(a.pred);
  const auto dets = confidence_filter(preds.all_detections(), a.conf);
  const AspectRatioHistogram h = aspect_ratio_histogram(dets, a.bins);
  if (a.format == Format::kJson) {
    nlohmann::json doc{{"lower", h.lower}, {"upper", h.upper}, {"counts", h.counts}, {"total", h.total}};
    doc["fraction_at_least_one"] =
        h.fraction_at_least_one ? nlohmann::json(*h.fraction_at_least_one) : nlohmann::json(nullptr);
    print_json(doc);
    return kOk;
  }
  std::cout << "h/w histogram of " << h.total << " detections\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double lo = h.lower + h.bin_width() * static_cast<double>(i);
    char line[128];
    std::snprintf(line, sizeof line, "[%7.4f, %7.4f) %8zu\n", lo, lo + h.bin_width(), h.counts[i]);
    std::cout << line;
  }
  std::cout << "fraction with h/w >= 1: "
            << (h.fraction_at_least_one ? fixed4(*h.fraction_at_least_one) : std::string("n/a")) << '\n';
  return kOk;
}

int report_error(int code, const char* category, const std::string& what) {
  std::fprintf(stderr, "rotdet: %s error: %s\n", category, what.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotated people-detection toolkit: evaluation, geometry and loss demos"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rotdet 1.0.0");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against annotations (AP50, P, R, F)");
  eval_cmd->add_option("--gt", eval_args.gt, "Annotation file")->required();
  eval_cmd->add_option("--pred", eval_args.pred, "Prediction file")->required();
  eval_cmd->add_option("--conf", eval_args.conf, "Confidence threshold for P/R/F")->capture_default_str();
  eval_cmd->add_option("--iou", eval_args.iou, "Match IoU threshold")->capture_default_str();
  eval_cmd->add_flag("--pooled", eval_args.pooled, "Pool frames of all videos instead of averaging per video");
  eval_cmd->add_option("--report", eval_args.report_path, "Write the JSON report to this file");
  eval_cmd->add_option("--pr-csv", eval_args.pr_csv_path, "Write the PR curve as CSV");
  add_format_flag(eval_cmd, eval_args.format);

  IouArgs iou_args;
  auto* iou_cmd = app.add_subcommand("iou", "IoU of two rotated boxes given as cx,cy,w,h,angle");
  iou_cmd->add_option("--a", iou_args.a, "First box")->required()->expected(5)->delimiter(',');
  iou_cmd->add_option("--b", iou_args.b, "Second box")->required()->expected(5)->delimiter(',');
  iou_cmd->add_flag("--radians", iou_args.radians, "Angles are in radians (default degrees)");
  add_format_flag(iou_cmd, iou_args.format);

  NmsArgs nms_args;
  auto* nms_cmd = app.add_subcommand("nms", "Confidence filter and rotated NMS per frame");
  nms_cmd->add_option("--pred", nms_args.pred, "Prediction file")->required();
  nms_cmd->add_option("--out", nms_args.out, "Output prediction file");
  nms_cmd->add_option("--conf", nms_args.conf, "Confidence threshold")->capture_default_str();
  nms_cmd->add_option("--iou", nms_args.iou, "Suppression IoU threshold")->capture_default_str();
  add_format_flag(nms_cmd, nms_args.format);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic annotation (and prediction) set");
  synth_cmd->add_option("--config", synth_args.config, "key = value configuration file");
  synth_cmd->add_option("--seed", synth_args.seed, "Random seed");
  synth_cmd->add_option("--videos", synth_args.videos, "Number of videos");
  synth_cmd->add_option("--frames", synth_args.frames, "Frames per video");
  synth_cmd->add_option("--gt-out", synth_args.gt_out, "Annotation output file")->required();
  synth_cmd->add_option("--pred-out", synth_args.pred_out, "Corrupted prediction output file");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit-demo", "Fit one box by gradient descent from a rotated initialization");
  fit_cmd->add_option("--loss", fit_args.loss, "plain-l1 | plain-l2 | periodic-l1 | periodic-l2")
      ->capture_default_str();
  fit_cmd->add_option("--range", fit_args.range, "Predicted angle range: full | half | unbounded")
      ->capture_default_str();
  auto* gt_opt = fit_cmd->add_option("--gt-angle", fit_args.gt_angle, "Ground-truth angle");
  fit_cmd->add_option("--offset", fit_args.offset, "Initial angle offset from the ground truth")->capture_default_str();
  fit_cmd->add_flag("--radians", fit_args.radians, "Angles are in radians (default degrees)");
  fit_cmd->add_option("--lr", fit_args.lr, "Learning rate")->capture_default_str();
  fit_cmd->add_option("--steps", fit_args.steps, "Gradient steps")->capture_default_str();
  fit_cmd->add_flag("--constant-lr", fit_args.constant_lr, "Keep the learning rate fixed instead of decaying it to zero");
  fit_cmd->add_option("--trajectory-csv", fit_args.trajectory_csv, "Write per-step trajectory CSV");
  add_format_flag(fit_cmd, fit_args.format);

  AblationArgs abl_args;
  auto* abl_cmd = app.add_subcommand("ablation", "Angle range / angle loss comparison on synthetic scenes");
  abl_cmd->add_option("--seed", abl_args.seed, "Random seed")->capture_default_str();
  abl_cmd->add_option("--steps", abl_args.steps, "Gradient steps per frame");
  abl_cmd->add_option("--lr", abl_args.lr, "Learning rate");
  abl_cmd->add_option("--min-offset", abl_args.min_offset, "Smallest |initial angle offset|");
  abl_cmd->add_option("--max-offset", abl_args.max_offset, "Largest |initial angle offset|");
  abl_cmd->add_flag("--radians", abl_args.radians, "Offsets are in radians (default degrees)");
  abl_cmd->add_option("--out", abl_args.out, "Write the JSON table to this file");
  add_format_flag(abl_cmd, abl_args.format);

  HistArgs hist_args;
  auto* hist_cmd = app.add_subcommand("hist", "Histogram of predicted height / width");
  hist_cmd->add_option("--pred", hist_args.pred, "Prediction file")->required();
  hist_cmd->add_option("--conf", hist_args.conf, "Only count detections at or above this confidence")
      ->capture_default_str();
  hist_cmd->add_option("--bins", hist_args.bins, "Number of bins")->capture_default_str();
  add_format_flag(hist_cmd, hist_args.format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  fit_args.gt_angle_set = gt_opt->count() > 0;

  try {
    if (*eval_cmd) return run_eval(eval_args);
    if (*iou_cmd) return run_iou(iou_args);
    if (*nms_cmd) return run_nms(nms_args);
    if (*synth_cmd) return run_synth(synth_args);
    if (*fit_cmd) return run_fit_demo(fit_args);
    if (*abl_cmd) return run_ablation(abl_args);
    if (*hist_cmd) return run_hist(hist_args);
  } catch (const ConfigError& e) {
    return report_error(kUsage, "usage", e.what());
  } catch (const IoError& e) {
    return report_error(kIo, "I/O", e.what());
  } catch (const ParseError& e) {
    return report_error(kParse, "parse", e.what());
  } catch (const ValidationError& e) {
    return report_error(kValidation, "validation", e.what());
  } catch (const InvalidBoxError& e) {
    return report_error(kValidation, "validation", e.what());
  } catch (const OutOfBoundsError& e) {
    return report_error(kValidation, "validation", e.what());
  } catch (const std::exception& e) {
    return report_error(kInternal, "internal", e.what());
  }
  return kUsage;
}
