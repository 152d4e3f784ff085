#include "rotdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {
namespace {

constexpr double kPi = std::numbers::pi;

struct Walker {
  std::int64_t id;
  double radius;
  double bearing;
  double height;
  double aspect;
};

}  // namespace

void CorruptionModel::validate() const {
  if (!(center_jitter_px >= 0) || !(size_jitter >= 0) || !(angle_jitter >= 0)) {
    throw ConfigError("corruption jitter must be non-negative");
  }
  if (!(drop_rate >= 0 && drop_rate <= 1)) throw ConfigError("corruption.drop_rate must lie in [0, 1]");
  if (!(spurious_per_frame >= 0)) throw ConfigError("corruption.spurious_per_frame must be non-negative");
  if (!(fp_conf_max >= 0 && fp_conf_max <= 1)) throw ConfigError("corruption.fp_conf_max must lie in [0, 1]");
  if (!(tp_conf_stddev >= 0)) throw ConfigError("corruption.tp_conf_stddev must be non-negative");
}

void SynthConfig::validate() const {
  if (image_size <= 0) throw ConfigError("image_size must be positive");
  if (videos < 1 || frames < 1) throw ConfigError("videos and frames must be at least 1");
  if (people_min < 0 || people_max < people_min) throw ConfigError("need 0 <= people_min <= people_max");
  if (!(fov_fraction > 0 && fov_fraction <= 1)) throw ConfigError("fov_fraction must lie in (0, 1]");
  if (!(person_height_min > 0) || person_height_max < person_height_min) {
    throw ConfigError("need 0 < person_height_min <= person_height_max");
  }
  if (!(aspect_min > 1) || aspect_max < aspect_min) throw ConfigError("need 1 < aspect_min <= aspect_max");
  if (!(pose_noise >= 0) || !(motion_px >= 0)) throw ConfigError("pose_noise and motion_px must be non-negative");
  corruption.validate();
}

SynthConfig SynthConfig::from_config(const KeyValueConfig& cfg) {
  SynthConfig c;
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(c.seed)));
  c.videos = static_cast<int>(cfg.get_int("videos", c.videos));
  c.frames = static_cast<int>(cfg.get_int("frames", c.frames));
  c.people_min = static_cast<int>(cfg.get_int("people_min", c.people_min));
  c.people_max = static_cast<int>(cfg.get_int("people_max", c.people_max));
  c.image_size = static_cast<int>(cfg.get_int("image_size", c.image_size));
  c.fov_fraction = cfg.get_double("fov_fraction", c.fov_fraction);
  c.person_height_min = cfg.get_double("person_height_min", c.person_height_min);
  c.person_height_max = cfg.get_double("person_height_max", c.person_height_max);
  c.aspect_min = cfg.get_double("aspect_min", c.aspect_min);
  c.aspect_max = cfg.get_double("aspect_max", c.aspect_max);
  c.pose_noise = cfg.get_double("pose_noise", c.pose_noise);
  c.motion_px = cfg.get_double("motion_px", c.motion_px);
  c.with_predictions = cfg.get_int("with_predictions", c.with_predictions ? 1 : 0) != 0;
  CorruptionModel& m = c.corruption;
  m.center_jitter_px = cfg.get_double("corruption.center_jitter_px", m.center_jitter_px);
  m.size_jitter = cfg.get_double("corruption.size_jitter", m.size_jitter);
  m.angle_jitter = cfg.get_double("corruption.angle_jitter", m.angle_jitter);
  m.drop_rate = cfg.get_double("corruption.drop_rate", m.drop_rate);
  m.spurious_per_frame = cfg.get_double("corruption.spurious_per_frame", m.spurious_per_frame);
  m.tp_conf_mean = cfg.get_double("corruption.tp_conf_mean", m.tp_conf_mean);
  m.tp_conf_stddev = cfg.get_double("corruption.tp_conf_stddev", m.tp_conf_stddev);
  m.fp_conf_max = cfg.get_double("corruption.fp_conf_max", m.fp_conf_max);
  c.validate();
  return c;
}

SyntheticScene generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double half = cfg.image_size / 2.0;
  const Point2<double> center(half, half);
  const double fov_radius = cfg.fov_fraction * half;

  SyntheticScene scene;
  for (int v = 0; v < cfg.videos; ++v) {
    AnnotatedVideo video;
    video.name = "synth_" + std::to_string(v);
    video.image_width = cfg.image_size;
    video.image_height = cfg.image_size;

    std::vector<Walker> people;
    const auto count = rng.uniform_int(cfg.people_min, cfg.people_max);
    for (std::int64_t p = 0; p < count; ++p) {
      // Uniform over the disk.
      people.push_back({p + 1, fov_radius * std::sqrt(rng.uniform()), rng.uniform(0.0, 2 * kPi),
                        rng.uniform(cfg.person_height_min, cfg.person_height_max),
                        rng.uniform(cfg.aspect_min, cfg.aspect_max)});
    }

    for (int f = 0; f < cfg.frames; ++f) {
      AnnotatedFrame frame;
      frame.index = f;
      for (Walker& person : people) {
        if (f > 0) {
          double x = person.radius * std::cos(person.bearing) + rng.normal(0.0, cfg.motion_px);
          double y = person.radius * std::sin(person.bearing) + rng.normal(0.0, cfg.motion_px);
          person.radius = std::min(std::hypot(x, y), fov_radius);
          person.bearing = std::atan2(y, x);
        }
        const double cx = center.x() + person.radius * std::cos(person.bearing);
        const double cy = center.y() + person.radius * std::sin(person.bearing);
        const double theta = radius_aligned_angle(cx, cy, center) + rng.normal(0.0, cfg.pose_noise);
        const double h = person.height;
        const RotatedBoxd box{cx, cy, h / person.aspect, h, theta};
        frame.objects.push_back({person.id, canonicalize(box)});
      }
      video.frames.push_back(std::move(frame));
    }
    scene.annotations.videos.push_back(std::move(video));
  }

  if (cfg.with_predictions) {
    Rng corruption_rng = rng.split();
    scene.predictions = corrupt(scene.annotations, cfg.corruption, corruption_rng);
  }
  return scene;
}

PredictionSet corrupt(const AnnotationSet& gts, const CorruptionModel& model, Rng& rng) {
  model.validate();
  PredictionSet out;
  for (const AnnotatedVideo& video : gts.videos) {
    PredictedVideo pv;
    pv.name = video.name;
    const double w_img = video.image_width;
    const double h_img = video.image_height;
    for (const AnnotatedFrame& frame : video.frames) {
      PredictedFrame pf;
      pf.index = frame.index;
      for (const Annotation& a : frame.objects) {
        if (rng.bernoulli(model.drop_rate)) continue;
        RotatedBoxd b = a.box;
        b.cx = std::clamp(b.cx + rng.normal(0.0, model.center_jitter_px), 0.0, std::nextafter(w_img, 0.0));
        b.cy = std::clamp(b.cy + rng.normal(0.0, model.center_jitter_px), 0.0, std::nextafter(h_img, 0.0));
        b.w *= std::exp(rng.normal(0.0, model.size_jitter));
        b.h *= std::exp(rng.normal(0.0, model.size_jitter));
        b.theta += rng.normal(0.0, model.angle_jitter);
        const double conf = std::clamp(rng.normal(model.tp_conf_mean, model.tp_conf_stddev), 0.0, 1.0);
        pf.detections.push_back({canonicalize(b), conf});
      }
      const auto spurious = rng.poisson(model.spurious_per_frame);
      for (std::uint64_t s = 0; s < spurious; ++s) {
        const double h = rng.uniform(20.0, 120.0);
        const RotatedBoxd b{rng.uniform(0.0, w_img), rng.uniform(0.0, h_img), h / rng.uniform(1.2, 3.5), h,
                            rng.uniform(-kPi / 2, kPi / 2)};
        pf.detections.push_back({canonicalize(b), rng.uniform(0.0, model.fp_conf_max)});
      }
      pv.frames.push_back(std::move(pf));
    }
    out.videos.push_back(std::move(pv));
  }
  return out;
}

}  // namespace rotdet
