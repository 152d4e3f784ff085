#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <unistd.h>

#include "rotdet/data_io.hpp"
#include "rotdet/errors.hpp"
#include "rotdet/kv_config.hpp"
#include "rotdet/rng.hpp"
#include "rotdet/synth.hpp"
#include "support.hpp"

using namespace rotdet;
using rotdet::testing::kPi;

namespace {

constexpr const char* kAnnotations = R"({
  "format": "rotdet-annotations", "version": 1, "angle_unit": "degrees",
  "videos": [{"name": "v0", "image_width": 608, "image_height": 608,
              "frames": [{"frame": 0, "objects": [
                 {"person_id": 3, "cx": 301.5, "cy": 122.0, "w": 38.0, "h": 96.0, "angle": -12.5},
                 {"person_id": 4, "cx": 100.0, "cy": 400.0, "w": 90.0, "h": 30.0, "angle": 10.0}]},
                         {"frame": 5, "objects": []}]}]})";

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rotdet_test_" + std::to_string(::getpid()) + "_" + name);
}

PredictionSet random_predictions(std::mt19937_64& gen, int count) {
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  PredictionSet set;
  PredictedVideo video{"random", {}};
  for (int f = 0; f * 10 < count; ++f) {
    PredictedFrame frame{f, {}};
    for (int i = f * 10; i < std::min(count, f * 10 + 10); ++i) {
      frame.detections.push_back({rotdet::testing::random_box(gen, 600), conf(gen)});
    }
    video.frames.push_back(frame);
  }
  set.videos.push_back(video);
  return set;
}

std::string header_with(const std::string& videos) {
  return R"({"format": "rotdet-annotations", "version": 1, "videos": )" + videos + "}";
}

}  // namespace

TEST(Annotations, LoadExample) {
  const AnnotationSet set = parse_annotations(kAnnotations);
  ASSERT_EQ(set.videos.size(), 1u);
  const AnnotatedVideo& v = set.videos[0];
  EXPECT_EQ(v.name, "v0");
  EXPECT_EQ(v.image_width, 608);
  ASSERT_EQ(v.frames.size(), 2u);
  EXPECT_EQ(v.frames[1].index, 5);
  EXPECT_TRUE(v.frames[1].objects.empty());
  const Annotation& a = v.frames[0].objects[0];
  EXPECT_EQ(a.person_id, 3);
  EXPECT_DOUBLE_EQ(a.box.cx, 301.5);
  EXPECT_DOUBLE_EQ(a.box.w, 38.0);
  EXPECT_NEAR(a.box.theta, -12.5 * kPi / 180, 1e-15);
  EXPECT_EQ(set.object_count(), 2u);
}

TEST(Annotations, WideBoxLoadedCanonical) {
  const AnnotationSet set = parse_annotations(kAnnotations);
  const RotatedBoxd& b = set.videos[0].frames[0].objects[1].box;
  EXPECT_TRUE(is_canonical(b));
  EXPECT_DOUBLE_EQ(b.w, 30.0);
  EXPECT_DOUBLE_EQ(b.h, 90.0);
  EXPECT_NEAR(b.theta, (10.0 - 90.0) * kPi / 180, 1e-12);
}

TEST(Annotations, TruncatedFileReportsByteOffset) {
  const std::string text(kAnnotations);
  const std::string cut = text.substr(0, 120);
  try {
    parse_annotations(cut);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.byte_offset(), 0u);
    EXPECT_LE(e.byte_offset(), cut.size() + 1);
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
}

TEST(Annotations, SchemaErrors) {
  EXPECT_THROW(parse_annotations("[]"), ParseError);
  EXPECT_THROW(parse_annotations(R"({"format": "rotdet-predictions", "version": 1, "videos": []})"), ValidationError);
  EXPECT_THROW(parse_annotations(R"({"format": "rotdet-annotations", "version": 2, "videos": []})"), ValidationError);
  EXPECT_THROW(parse_annotations(R"({"format": "rotdet-annotations", "version": 1, "angle_unit": "radians", "videos": []})"),
               ValidationError);
  EXPECT_THROW(parse_annotations(R"({"format": "rotdet-annotations", "version": 1})"), ParseError);
  // Non-positive side.
  EXPECT_THROW(parse_annotations(header_with(
                   R"([{"name": "v", "image_width": 10, "image_height": 10, "frames": [{"frame": 0, "objects": [
                        {"person_id": 1, "cx": 1, "cy": 1, "w": 0, "h": 3, "angle": 0}]}]}])")),
               ValidationError);
  // Repeated person id in a frame.
  EXPECT_THROW(parse_annotations(header_with(
                   R"([{"name": "v", "image_width": 10, "image_height": 10, "frames": [{"frame": 0, "objects": [
                        {"person_id": 1, "cx": 1, "cy": 1, "w": 1, "h": 3, "angle": 0},
                        {"person_id": 1, "cx": 5, "cy": 1, "w": 1, "h": 3, "angle": 0}]}]}])")),
               ValidationError);
  // Duplicate frame key.
  EXPECT_THROW(parse_annotations(header_with(
                   R"([{"name": "v", "image_width": 10, "image_height": 10,
                        "frames": [{"frame": 0, "objects": []}, {"frame": 0, "objects": []}]}])")),
               ValidationError);
  // Duplicate video.
  EXPECT_THROW(parse_annotations(header_with(
                   R"([{"name": "v", "image_width": 10, "image_height": 10, "frames": []},
                       {"name": "v", "image_width": 10, "image_height": 10, "frames": []}])")),
               ValidationError);
  // Non-integer frame key.
  EXPECT_THROW(parse_annotations(header_with(
                   R"([{"name": "v", "image_width": 10, "image_height": 10, "frames": [{"frame": 0.5, "objects": []}]}])")),
               ParseError);
}

TEST(Annotations, RoundTripIsByteStable) {
  const AnnotationSet set = parse_annotations(kAnnotations);
  const std::string once = annotations_to_string(set);
  const AnnotationSet back = parse_annotations(once);
  EXPECT_EQ(annotations_to_string(back), once);
  ASSERT_EQ(back.videos[0].frames[0].objects.size(), 2u);
  EXPECT_NEAR(back.videos[0].frames[0].objects[0].box.theta, set.videos[0].frames[0].objects[0].box.theta, 1e-12);
}

TEST(Predictions, RandomRoundTrip) {
  std::mt19937_64 gen(47);
  const PredictionSet set = random_predictions(gen, 1000);
  const std::string once = predictions_to_string(set);
  const PredictionSet back = parse_predictions(once);
  ASSERT_EQ(back.detection_count(), 1000u);
  const auto a = set.all_detections();
  const auto b = back.all_detections();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const RotatedBoxd ca = canonicalize(a[i].box);
    ASSERT_TRUE(is_canonical(b[i].box));
    ASSERT_NEAR(b[i].box.cx, ca.cx, 1e-12);
    ASSERT_NEAR(b[i].box.cy, ca.cy, 1e-12);
    ASSERT_NEAR(b[i].box.w, ca.w, 1e-12);
    ASSERT_NEAR(b[i].box.h, ca.h, 1e-12);
    ASSERT_LT(angular_distance_mod_pi(b[i].box.theta, ca.theta), 1e-9);
    ASSERT_DOUBLE_EQ(b[i].conf, a[i].conf);
  }
  EXPECT_EQ(predictions_to_string(back), once);
}

TEST(Predictions, EmptyDetectionList) {
  PredictionSet set;
  set.videos.push_back({"empty", {PredictedFrame{0, {}}}});
  const PredictionSet back = parse_predictions(predictions_to_string(set));
  EXPECT_EQ(back, set);
  EXPECT_EQ(back.detection_count(), 0u);
}

TEST(Predictions, ConfidenceOutOfRange) {
  const std::string text = R"({"format": "rotdet-predictions", "version": 1, "videos": [{"name": "v", "frames": [
      {"frame": 0, "detections": [{"cx": 1, "cy": 1, "w": 1, "h": 2, "angle": 0, "conf": 1.5}]}]}]})";
  EXPECT_THROW(parse_predictions(text), ValidationError);
}

TEST(Files, SaveLoadAndMissingFile) {
  const auto path = temp_path("ann.json");
  const AnnotationSet set = parse_annotations(kAnnotations);
  save_annotations(set, path);
  EXPECT_EQ(load_annotations(path), parse_annotations(annotations_to_string(set)));
  std::filesystem::remove(path);
  EXPECT_THROW(load_annotations(path), IoError);
  EXPECT_THROW(load_predictions(temp_path("missing.json")), IoError);
  EXPECT_THROW(save_predictions(PredictionSet{}, temp_path("no_such_dir") / "x.json"), IoError);
}

TEST(Angles, DegreeConversion) {
  EXPECT_DOUBLE_EQ(degrees_to_radians(180.0), kPi);
  EXPECT_DOUBLE_EQ(radians_to_degrees(kPi / 2), 90.0);
}

TEST(CocoImport, Example) {
  const std::string text = R"({"images": [{"id": 7, "width": 640, "height": 480}, {"id": 2, "width": 640, "height": 480}],
      "annotations": [{"image_id": 7, "bbox": [10, 20, 5, 15, 30]},
                      {"image_id": 7, "bbox": [50, 60, 20, 8, 0], "person_id": 11},
                      {"image_id": 2, "bbox": [1, 2, 3, 4, -10]}]})";
  const AnnotationSet set = import_coco_rotated(text, "coco");
  ASSERT_EQ(set.videos.size(), 1u);
  const AnnotatedVideo& v = set.videos[0];
  EXPECT_EQ(v.image_width, 640);
  ASSERT_EQ(v.frames.size(), 2u);
  EXPECT_EQ(v.frames[0].index, 2);
  EXPECT_EQ(v.frames[1].index, 7);
  ASSERT_EQ(v.frames[1].objects.size(), 2u);
  EXPECT_EQ(v.frames[1].objects[0].person_id, 0);
  EXPECT_EQ(v.frames[1].objects[1].person_id, 11);
  EXPECT_TRUE(is_canonical(v.frames[1].objects[1].box));
  EXPECT_DOUBLE_EQ(v.frames[1].objects[1].box.w, 8.0);
}

TEST(CocoImport, Errors) {
  EXPECT_THROW(import_coco_rotated(R"({"images": [{"id": 1, "width": 4, "height": 4}],
      "annotations": [{"image_id": 2, "bbox": [1, 1, 1, 1, 0]}]})", "x"), ValidationError);
  EXPECT_THROW(import_coco_rotated(R"({"images": [{"id": 1, "width": 4, "height": 4}],
      "annotations": [{"image_id": 1, "bbox": [1, 1, 1, 1]}]})", "x"), ValidationError);
  EXPECT_THROW(import_coco_rotated(R"({"images": [{"id": 1, "width": 4, "height": 4}, {"id": 2, "width": 5, "height": 4}],
      "annotations": []})", "x"), ValidationError);
  EXPECT_THROW(import_coco_rotated("{", "x"), ParseError);
}

TEST(Report, JsonRoundTrip) {
  EvalReport r;
  r.ap50 = 0.123456789012345;
  r.precision = 0.9;
  r.recall = 1.0 / 3;
  r.f_measure = 0.5;
  r.pooled = true;
  r.pr_curve = {{0.9, 0.25, 1.0}, {0.1, 0.5, 2.0 / 3}};
  r.per_video = {{"a", 0.5, 0.6, 0.7, 0.65, 4, 5}};
  const EvalReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  EXPECT_EQ(back.ap50, r.ap50);
  EXPECT_EQ(back.recall, r.recall);
  EXPECT_TRUE(back.pooled);
  ASSERT_EQ(back.pr_curve.size(), 2u);
  EXPECT_EQ(back.pr_curve[1].precision, 2.0 / 3);
  EXPECT_EQ(back.per_video, r.per_video);
  EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"format": "other", "version": 1})")), ValidationError);
}

TEST(Report, PrCurveCsv) {
  const std::string csv = pr_curve_csv({{0.9, 0.25, 1.0}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "recall,precision,threshold");
  EXPECT_NE(csv.find("0.25,1,0.9"), std::string::npos);
}

TEST(KeyValueConfig, ParsesCommentsAndNumbers) {
  const auto cfg = KeyValueConfig::parse("# comment\n\n  seed = 12 \nname = two words\nlist = 1, 2  3\nx=0.5\n");
  EXPECT_EQ(cfg.get_int("seed"), 12);
  EXPECT_EQ(cfg.get("name"), "two words");
  EXPECT_EQ(cfg.get_doubles("list"), (std::vector<double>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(cfg.get_double("x"), 0.5);
  EXPECT_DOUBLE_EQ(cfg.get_double("absent", 7.0), 7.0);
  EXPECT_FALSE(cfg.contains("absent"));
}

TEST(KeyValueConfig, Errors) {
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(KeyValueConfig::parse("just words\n"), ParseError);
  EXPECT_THROW(KeyValueConfig::parse(" = 3\n"), ParseError);
  const auto cfg = KeyValueConfig::parse("a = x\nb = 1.5\n");
  EXPECT_THROW(cfg.get_double("a"), ConfigError);
  EXPECT_THROW(cfg.get_int("b"), ConfigError);
  EXPECT_THROW(cfg.get("c"), ConfigError);
  EXPECT_THROW(KeyValueConfig::load(temp_path("nope.cfg")), IoError);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    ASSERT_EQ(u, b.uniform());
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = a.uniform_int(-2, 3);
    ASSERT_EQ(k, b.uniform_int(-2, 3));
    ASSERT_GE(k, -2);
    ASSERT_LE(k, 3);
  }
}

TEST(Rng, MomentsAreSensible) {
  Rng rng(9);
  double sum = 0, sq = 0, pois = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    pois += static_cast<double>(rng.poisson(2.5));
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  EXPECT_NEAR(pois / n, 2.5, 0.02);
}

TEST(Synth, Deterministic) {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.videos = 2;
  cfg.frames = 4;
  const SyntheticScene a = generate_scene(cfg);
  const SyntheticScene b = generate_scene(cfg);
  EXPECT_EQ(annotations_to_string(a.annotations), annotations_to_string(b.annotations));
  ASSERT_TRUE(a.predictions && b.predictions);
  EXPECT_EQ(predictions_to_string(*a.predictions), predictions_to_string(*b.predictions));
  cfg.seed = 4;
  EXPECT_NE(annotations_to_string(generate_scene(cfg).annotations), annotations_to_string(a.annotations));
  EXPECT_EQ(a.annotations.videos[1].name, "synth_1");
}

TEST(Synth, BoxesAreCanonicalInsideFieldOfViewWithStableIds) {
  SynthConfig cfg;
  cfg.seed = 8;
  cfg.frames = 20;
  const SyntheticScene s = generate_scene(cfg);
  const double half = cfg.image_size / 2.0;
  const auto& frames = s.annotations.videos[0].frames;
  for (const auto& f : frames) {
    ASSERT_EQ(f.objects.size(), frames[0].objects.size());
    for (std::size_t i = 0; i < f.objects.size(); ++i) {
      const RotatedBoxd& b = f.objects[i].box;
      ASSERT_EQ(f.objects[i].person_id, frames[0].objects[i].person_id);
      ASSERT_TRUE(is_canonical(b));
      ASSERT_LE(std::hypot(b.cx - half, b.cy - half), cfg.fov_fraction * half + 1e-9);
      ASSERT_GE(b.h / b.w, cfg.aspect_min - 1e-9);
    }
  }
}

TEST(Synth, ZeroPoseNoiseGivesRadiusAlignedAngles) {
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.pose_noise = 0.0;
  cfg.frames = 5;
  const SyntheticScene s = generate_scene(cfg);
  const Point2<double> center(cfg.image_size / 2.0, cfg.image_size / 2.0);
  for (const auto& f : s.annotations.videos[0].frames) {
    for (const auto& o : f.objects) {
      ASSERT_LT(angular_distance_mod_pi(o.box.theta, radius_aligned_angle(o.box.cx, o.box.cy, center)), 1e-12);
    }
  }
}

TEST(Synth, DropRateMatchesOverManyBoxes) {
  AnnotationSet gts;
  AnnotatedVideo video{"many", 608, 608, {}};
  for (int f = 0; f < 1000; ++f) {
    AnnotatedFrame frame{f, {}};
    for (int i = 0; i < 10; ++i) frame.objects.push_back({i, {50.0 + 50 * i, 300.0, 10, 30, 0.0}});
    video.frames.push_back(frame);
  }
  gts.videos.push_back(video);
  CorruptionModel model;
  model.drop_rate = 0.5;
  model.spurious_per_frame = 0.0;
  Rng rng(21);
  const PredictionSet preds = corrupt(gts, model, rng);
  const double kept = static_cast<double>(preds.detection_count()) / 10000.0;
  EXPECT_NEAR(kept, 0.5, 0.02);
  for (const auto& d : preds.all_detections()) {
    ASSERT_GE(d.conf, 0.0);
    ASSERT_LE(d.conf, 1.0);
  }
}

TEST(Synth, ZeroCorruptionReproducesGroundTruth) {
  SynthConfig cfg;
  cfg.seed = 2;
  cfg.corruption = CorruptionModel{0, 0, 0, 0, 0, 1, 0, 0.6};
  const SyntheticScene s = generate_scene(cfg);
  ASSERT_TRUE(s.predictions);
  ASSERT_EQ(s.predictions->detection_count(), s.annotations.object_count());
  const auto& gv = s.annotations.videos[0];
  const auto& pv = s.predictions->videos[0];
  for (std::size_t f = 0; f < gv.frames.size(); ++f) {
    for (std::size_t i = 0; i < gv.frames[f].objects.size(); ++i) {
      ASSERT_DOUBLE_EQ(iou(pv.frames[f].detections[i].box, gv.frames[f].objects[i].box), 1.0);
      ASSERT_DOUBLE_EQ(pv.frames[f].detections[i].conf, 1.0);
    }
  }
}

TEST(Synth, InvalidConfig) {
  SynthConfig cfg;
  cfg.image_size = 0;
  EXPECT_THROW(generate_scene(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.aspect_min = 1.0;
  EXPECT_THROW(generate_scene(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.corruption.drop_rate = 1.5;
  EXPECT_THROW(generate_scene(cfg), ConfigError);
}

TEST(Synth, FromConfigOverridesDefaults) {
  const auto kv = KeyValueConfig::parse("seed = 9\nframes = 3\ncorruption.drop_rate = 0.25\n");
  const SynthConfig cfg = SynthConfig::from_config(kv);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.frames, 3);
  EXPECT_DOUBLE_EQ(cfg.corruption.drop_rate, 0.25);
  EXPECT_EQ(cfg.image_size, SynthConfig{}.image_size);
}
