#pragma once

// Mapping between the detection head's transformed outputs and image-space boxes.
//
// Every prediction slot (level k, anchor n, row i, column j) carries six raw values
// (tx, ty, tw, th, ttheta, tconf). Decoding:
//
//     x     = s_k * (j + sig(tx))         w    = anchor_w * exp(tw)
//     y     = s_k * (i + sig(ty))         h    = anchor_h * exp(th)
//     theta = alpha * sig(ttheta) - beta  conf = sig(tconf)
//
// Training targets invert the position and size parts:
//
//     tx = x / s_k - floor(x / s_k)       tw = ln(w / anchor_w)
//     ty = y / s_k - floor(y / s_k)       th = ln(h / anchor_h)

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "rotdet/detection.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

inline constexpr int kAnchorsPerLevel = 3;

/// Column of each raw component inside a prediction row.
enum RawField : Eigen::Index { kTx = 0, kTy = 1, kTw = 2, kTh = 3, kTtheta = 4, kTconf = 5 };

inline constexpr Eigen::Index kRawFields = 6;

using RawPrediction = Eigen::Matrix<double, 1, kRawFields>;
/// One row per slot, in HeadLayout slot order.
using RawPredictions = Eigen::Matrix<double, Eigen::Dynamic, kRawFields, Eigen::RowMajor>;

struct AnchorShape {
  double w = 0.0;
  double h = 0.0;
};

using LevelAnchors = std::array<AnchorShape, kAnchorsPerLevel>;

/// Geometry of one output level. Level numbers are 1-based.
struct GridSpec {
  int level = 1;
  int stride = 8;
  int rows = 0;
  int cols = 0;
  int image_width = 0;
  int image_height = 0;
};

struct SlotId {
  std::size_t level = 0;  // 0-based index into HeadLayout levels
  std::size_t anchor = 0;
  int row = 0;
  int col = 0;

  friend bool operator==(const SlotId&, const SlotId&) = default;
};

/// How the raw angle component maps to radians.
enum class AngleActivation {
  kSigmoid,   // alpha * sig(t) - beta
  kIdentity,  // t itself; unbounded range
};

struct CodecParams {
  double alpha = 2 * std::numbers::pi;
  double beta = std::numbers::pi;
  AngleActivation activation = AngleActivation::kSigmoid;

  /// (alpha, beta) = (2 pi, pi): predicted range (-pi, pi).
  static CodecParams full_turn() { return {}; }
  /// (alpha, beta) = (pi, pi/2): predicted range (-pi/2, pi/2).
  static CodecParams half_turn() { return {std::numbers::pi, std::numbers::pi / 2, AngleActivation::kSigmoid}; }
  static CodecParams unbounded() { return {2 * std::numbers::pi, std::numbers::pi, AngleActivation::kIdentity}; }

  bool bounded() const { return activation == AngleActivation::kSigmoid; }
  double min_angle() const;
  double max_angle() const;
  /// Human-readable range, e.g. "(-pi, pi)".
  std::string range_label() const;
  void validate() const;
};

/// Parses "full", "half" or "unbounded" (also "2pi", "pi", "inf").
CodecParams parse_angle_range(std::string_view name);

/// Image size, per-level strides and per-level anchors; defines the slot ordering
/// level-major, then anchor, then row, then column.
class HeadLayout {
 public:
  HeadLayout(int image_width, int image_height, std::vector<int> strides, std::vector<LevelAnchors> anchors);

  /// Strides 8/16/32 with nine anchors spaced geometrically from 20 px to 400 px in height.
  static HeadLayout default_layout(int image_width = 608, int image_height = 608);
  static std::vector<LevelAnchors> default_anchors();

  /// Reads a key-value config; missing keys fall back to the defaults.
  static HeadLayout from_config(const std::filesystem::path& path);
  static HeadLayout from_config_text(std::string_view text);

  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }
  std::size_t num_levels() const { return strides_.size(); }
  GridSpec grid(std::size_t level) const;
  const AnchorShape& anchor(std::size_t level, std::size_t n) const { return anchors_.at(level).at(n); }
  const std::vector<LevelAnchors>& anchors() const { return anchors_; }

  std::size_t slot_count() const { return offsets_.back(); }
  std::size_t slot_index(const SlotId& slot) const;
  SlotId slot_at(std::size_t index) const;

  /// All-zero predictions of the right shape.
  RawPredictions zeros() const { return RawPredictions::Zero(static_cast<Eigen::Index>(slot_count()), kRawFields); }

 private:
  int image_width_;
  int image_height_;
  std::vector<int> strides_;
  std::vector<LevelAnchors> anchors_;
  std::vector<std::size_t> offsets_;  // first slot of each level, plus total
};

double sigmoid(double x);
/// Inverse sigmoid with the argument clamped to [1e-7, 1 - 1e-7].
double logit(double p);

double decode_angle(double t_theta, const CodecParams& params);
/// d(decoded angle) / d(t_theta).
double decode_angle_derivative(double t_theta, const CodecParams& params);
/// Raw angle value that decodes to `theta` (clamped at the range edges).
double encode_angle(double theta, const CodecParams& params);

Detection decode(const RawPrediction& raw, const SlotId& slot, const HeadLayout& layout, const CodecParams& params);

/// Decodes every slot, in slot order.
std::vector<Detection> decode_all(const RawPredictions& raw, const HeadLayout& layout, const CodecParams& params);

struct EncodedTarget {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
  int row = 0;
  int col = 0;
};

EncodedTarget encode_targets(const RotatedBoxd& gt, const GridSpec& grid, const AnchorShape& anchor);

/// Raw values that decode exactly (up to logit clamping) to `box` in the slot chosen by encode_targets.
RawPrediction encode_raw(const RotatedBoxd& box, const GridSpec& grid, const AnchorShape& anchor,
                         const CodecParams& params, double conf);

}  // namespace rotdet
