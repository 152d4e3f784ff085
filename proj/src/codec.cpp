#include "rotdet/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rotdet/errors.hpp"
#include "rotdet/kv_config.hpp"

namespace rotdet {

double CodecParams::min_angle() const {
  return bounded() ? -beta : -std::numeric_limits<double>::infinity();
}

double CodecParams::max_angle() const {
  return bounded() ? alpha - beta : std::numeric_limits<double>::infinity();
}

std::string CodecParams::range_label() const {
  if (!bounded()) return "(-inf, inf)";
  constexpr double pi = std::numbers::pi;
  auto label = [&](double v) -> std::string {
    if (v == 0) return "0";
    for (const auto& [value, text] : {std::pair{pi, "pi"}, {-pi, "-pi"}, {pi / 2, "pi/2"}, {-pi / 2, "-pi/2"}}) {
      if (std::abs(v - value) < 1e-12) return text;
    }
    std::ostringstream os;
    os << v;
    return os.str();
  };
  return "(" + label(min_angle()) + ", " + label(max_angle()) + ")";
}

void CodecParams::validate() const {
  if (bounded() && !(alpha > 0 && std::isfinite(alpha) && std::isfinite(beta))) {
    throw ConfigError("angle range requires finite alpha > 0");
  }
}

CodecParams parse_angle_range(std::string_view name) {
  if (name == "full" || name == "2pi") return CodecParams::full_turn();
  if (name == "half" || name == "pi") return CodecParams::half_turn();
  if (name == "unbounded" || name == "inf") return CodecParams::unbounded();
  throw ConfigError("unknown angle range '" + std::string(name) + "' (expected full, half or unbounded)");
}

HeadLayout::HeadLayout(int image_width, int image_height, std::vector<int> strides, std::vector<LevelAnchors> anchors)
    : image_width_(image_width), image_height_(image_height), strides_(std::move(strides)), anchors_(std::move(anchors)) {
  if (image_width_ <= 0 || image_height_ <= 0) throw ConfigError("image size must be positive");
  if (strides_.empty()) throw ConfigError("at least one output level is required");
  if (anchors_.size() != strides_.size()) throw ConfigError("need exactly one anchor triple per level");
  for (std::size_t k = 0; k < strides_.size(); ++k) {
    const int s = strides_[k];
    if (s <= 0) throw ConfigError("strides must be positive");
    if (k > 0 && s <= strides_[k - 1]) throw ConfigError("strides must be strictly increasing");
    if (image_width_ % s != 0 || image_height_ % s != 0) {
      throw ConfigError("image size " + std::to_string(image_width_) + "x" + std::to_string(image_height_) +
                        " is not divisible by stride " + std::to_string(s));
    }
    for (const auto& a : anchors_[k]) {
      if (!(a.w > 0) || !(a.h > 0) || !std::isfinite(a.w) || !std::isfinite(a.h)) {
        throw ConfigError("anchor sizes must be positive");
      }
    }
  }
  offsets_.push_back(0);
  for (std::size_t k = 0; k < strides_.size(); ++k) {
    const auto cells = static_cast<std::size_t>(image_width_ / strides_[k]) * static_cast<std::size_t>(image_height_ / strides_[k]);
    offsets_.push_back(offsets_.back() + kAnchorsPerLevel * cells);
  }
}

std::vector<LevelAnchors> HeadLayout::default_anchors() {
  std::vector<LevelAnchors> anchors(3);
  for (int m = 0; m < 9; ++m) {
    const double height = 20.0 * std::pow(400.0 / 20.0, m / 8.0);
    anchors[static_cast<std::size_t>(m / 3)][static_cast<std::size_t>(m % 3)] = {height / 2, height};
  }
  return anchors;
}

HeadLayout HeadLayout::default_layout(int image_width, int image_height) {
  return HeadLayout(image_width, image_height, {8, 16, 32}, default_anchors());
}

HeadLayout HeadLayout::from_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open layout config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_config_text(buf.str());
}

HeadLayout HeadLayout::from_config_text(std::string_view text) {
  const auto cfg = KeyValueConfig::parse(text);
  const int width = static_cast<int>(cfg.get_int("image_width", 608));
  const int height = static_cast<int>(cfg.get_int("image_height", 608));

  std::vector<int> strides{8, 16, 32};
  if (cfg.contains("strides")) {
    strides.clear();
    for (double s : cfg.get_doubles("strides")) {
      if (s != std::floor(s)) throw ConfigError("strides must be integers");
      strides.push_back(static_cast<int>(s));
    }
  }

  std::vector<LevelAnchors> anchors;
  const auto defaults = default_anchors();
  for (std::size_t k = 0; k < strides.size(); ++k) {
    const std::string key = "anchors." + std::to_string(k + 1);
    if (!cfg.contains(key)) {
      if (strides.size() != defaults.size()) throw ConfigError("missing config key '" + key + "'");
      anchors.push_back(defaults[k]);
      continue;
    }
    const auto values = cfg.get_doubles(key);
    if (values.size() != 2 * kAnchorsPerLevel) {
      throw ConfigError("'" + key + "' needs three 'w h' pairs");
    }
    LevelAnchors level{};
    for (std::size_t n = 0; n < kAnchorsPerLevel; ++n) level[n] = {values[2 * n], values[2 * n + 1]};
    anchors.push_back(level);
  }
  return HeadLayout(width, height, std::move(strides), std::move(anchors));
}

GridSpec HeadLayout::grid(std::size_t level) const {
  if (level >= strides_.size()) throw OutOfBoundsError("level " + std::to_string(level) + " out of range");
  const int s = strides_[level];
  return GridSpec{static_cast<int>(level) + 1, s, image_height_ / s, image_width_ / s, image_width_, image_height_};
}

std::size_t HeadLayout::slot_index(const SlotId& slot) const {
  if (slot.level >= num_levels() || slot.anchor >= kAnchorsPerLevel) throw OutOfBoundsError("slot level/anchor out of range");
  const GridSpec g = grid(slot.level);
  if (slot.row < 0 || slot.row >= g.rows || slot.col < 0 || slot.col >= g.cols) {
    throw OutOfBoundsError("cell (" + std::to_string(slot.row) + ", " + std::to_string(slot.col) + ") outside " +
                           std::to_string(g.rows) + "x" + std::to_string(g.cols) + " grid");
  }
  const auto cells = static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols);
  return offsets_[slot.level] + slot.anchor * cells + static_cast<std::size_t>(slot.row) * static_cast<std::size_t>(g.cols) +
         static_cast<std::size_t>(slot.col);
}

SlotId HeadLayout::slot_at(std::size_t index) const {
  if (index >= slot_count()) throw OutOfBoundsError("slot index " + std::to_string(index) + " out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  const auto level = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  const GridSpec g = grid(level);
  const auto cells = static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols);
  std::size_t rest = index - offsets_[level];
  SlotId slot;
  slot.level = level;
  slot.anchor = rest / cells;
  rest %= cells;
  slot.row = static_cast<int>(rest / static_cast<std::size_t>(g.cols));
  slot.col = static_cast<int>(rest % static_cast<std::size_t>(g.cols));
  return slot;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return std::log(q / (1.0 - q));
}

double decode_angle(double t_theta, const CodecParams& params) {
  if (!params.bounded()) return t_theta;
  return params.alpha * sigmoid(t_theta) - params.beta;
}

double decode_angle_derivative(double t_theta, const CodecParams& params) {
  if (!params.bounded()) return 1.0;
  const double s = sigmoid(t_theta);
  return params.alpha * s * (1.0 - s);
}

double encode_angle(double theta, const CodecParams& params) {
  if (!params.bounded()) return theta;
  return logit((theta + params.beta) / params.alpha);
}

Detection decode(const RawPrediction& raw, const SlotId& slot, const HeadLayout& layout, const CodecParams& params) {
  layout.slot_index(slot);  // bounds check
  if (!raw.allFinite()) throw ValidationError("raw prediction has non-finite components");
  const GridSpec g = layout.grid(slot.level);
  const AnchorShape& a = layout.anchor(slot.level, slot.anchor);
  Detection det;
  det.box.cx = g.stride * (slot.col + sigmoid(raw(kTx)));
  det.box.cy = g.stride * (slot.row + sigmoid(raw(kTy)));
  det.box.w = a.w * std::exp(raw(kTw));
  det.box.h = a.h * std::exp(raw(kTh));
  det.box.theta = decode_angle(raw(kTtheta), params);
  det.conf = sigmoid(raw(kTconf));
  return det;
}

std::vector<Detection> decode_all(const RawPredictions& raw, const HeadLayout& layout, const CodecParams& params) {
  if (static_cast<std::size_t>(raw.rows()) != layout.slot_count()) {
    throw ValidationError("prediction rows do not match the head layout");
  }
  std::vector<Detection> out;
  out.reserve(layout.slot_count());
  for (std::size_t i = 0; i < layout.slot_count(); ++i) {
    out.push_back(decode(raw.row(static_cast<Eigen::Index>(i)), layout.slot_at(i), layout, params));
  }
  return out;
}

EncodedTarget encode_targets(const RotatedBoxd& gt, const GridSpec& grid, const AnchorShape& anchor) {
  validate(gt);
  if (gt.cx < 0 || gt.cy < 0 || gt.cx >= grid.image_width || gt.cy >= grid.image_height) {
    std::ostringstream os;
    os << "ground-truth center (" << gt.cx << ", " << gt.cy << ") outside " << grid.image_width << "x"
       << grid.image_height << " image";
    throw OutOfBoundsError(os.str());
  }
  const double gx = gt.cx / grid.stride;
  const double gy = gt.cy / grid.stride;
  EncodedTarget t;
  t.col = static_cast<int>(std::floor(gx));
  t.row = static_cast<int>(std::floor(gy));
  t.tx = gx - std::floor(gx);
  t.ty = gy - std::floor(gy);
  t.tw = std::log(gt.w / anchor.w);
  t.th = std::log(gt.h / anchor.h);
  return t;
}

RawPrediction encode_raw(const RotatedBoxd& box, const GridSpec& grid, const AnchorShape& anchor,
                         const CodecParams& params, double conf) {
  const EncodedTarget t = encode_targets(box, grid, anchor);
  RawPrediction raw;
  raw << logit(t.tx), logit(t.ty), t.tw, t.th, encode_angle(box.theta, params), logit(conf);
  return raw;
}

}  // namespace rotdet
