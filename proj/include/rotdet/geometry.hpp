#pragma once

// Rotated-rectangle geometry in image coordinates (x right, y down).
//
// A box is (cx, cy, w, h, theta) where theta is a clockwise rotation on screen.
// Offsets from the center are mapped through
//
//     R(theta) = [[cos theta, -sin theta],
//                 [sin theta,  cos theta]]
//
// which, with y pointing down, turns the picture clockwise. Rectangles are
// pi-periodic in theta and (w, h, theta) ~ (h, w, theta - pi/2).
//
// Canonical form: w < h and theta in [-pi/2, pi/2). Every rectangle has exactly
// one canonical representation once square ties are broken.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "rotdet/errors.hpp"

namespace rotdet {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
struct RotatedBox {
  Scalar cx{};
  Scalar cy{};
  Scalar w{};
  Scalar h{};
  Scalar theta{};

  Point2<Scalar> center() const { return Point2<Scalar>(cx, cy); }
  Scalar area() const { return w * h; }

  friend bool operator==(const RotatedBox&, const RotatedBox&) = default;
};

using RotatedBoxd = RotatedBox<double>;

/// Four corners as columns, clockwise on screen (positive signed shoelace area in y-down coordinates).
template <typename Scalar>
using ConvexQuad = Eigen::Matrix<Scalar, 2, 4>;

template <typename Scalar>
using Polygon = std::vector<Point2<Scalar>>;

/// Amount by which the width of an exact square is reduced during canonicalization.
inline constexpr double kSquareTieEpsilon = 1e-4;

/// Distance tolerance (pixels) for the clipping inside test.
inline constexpr double kClipTolerance = 1e-9;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> clockwise_rotation(Scalar angle) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(angle);
  const Scalar s = sin(angle);
  Eigen::Matrix<Scalar, 2, 2> r;
  r << c, -s, s, c;
  return r;
}

/// Folds an angle into [-pi/2, pi/2). Values already in range are returned unchanged.
template <typename Scalar>
Scalar wrap_half_turn(Scalar theta) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar half = pi / 2;
  if (theta >= -half && theta < half) return theta;
  Scalar out = theta - pi * std::floor((theta + half) / pi);
  if (out >= half) out -= pi;
  if (out < -half) out += pi;
  return out;
}

template <typename Scalar>
void validate(const RotatedBox<Scalar>& box) {
  using std::isfinite;
  const bool finite = isfinite(box.cx) && isfinite(box.cy) && isfinite(box.w) && isfinite(box.h) &&
                      isfinite(box.theta);
  if (!finite || !(box.w > 0) || !(box.h > 0)) {
    std::ostringstream os;
    os << "invalid box (" << box.cx << ", " << box.cy << ", " << box.w << ", " << box.h << ", "
       << box.theta << ")";
    throw InvalidBoxError(os.str());
  }
}

template <typename Scalar>
bool is_canonical(const RotatedBox<Scalar>& box) {
  constexpr Scalar half = std::numbers::pi_v<Scalar> / 2;
  return box.w < box.h && box.theta >= -half && box.theta < half;
}

/// Unique representation of the same rectangle with w < h and theta in [-pi/2, pi/2).
/// Exact squares have their width reduced by kSquareTieEpsilon first. Idempotent.
template <typename Scalar>
RotatedBox<Scalar> canonicalize(const RotatedBox<Scalar>& box) {
  validate(box);
  RotatedBox<Scalar> out = box;
  if (out.w == out.h) out.w -= std::min<Scalar>(Scalar(kSquareTieEpsilon), out.w / 2);
  if (out.w > out.h) {
    std::swap(out.w, out.h);
    out.theta -= std::numbers::pi_v<Scalar> / 2;
  }
  out.theta = wrap_half_turn(out.theta);
  return out;
}

namespace detail {

template <typename Scalar>
ConvexQuad<Scalar> corners_unchecked(const RotatedBox<Scalar>& box) {
  const Scalar hw = box.w / 2;
  const Scalar hh = box.h / 2;
  ConvexQuad<Scalar> offsets;
  offsets << -hw, hw, hw, -hw,  //
      -hh, -hh, hh, hh;
  return (clockwise_rotation(box.theta) * offsets).colwise() + box.center();
}

}  // namespace detail

template <typename Scalar>
ConvexQuad<Scalar> corners(const RotatedBox<Scalar>& box) {
  validate(box);
  return detail::corners_unchecked(box);
}

/// Signed shoelace area; positive for the winding used by corners().
template <typename Scalar>
Scalar signed_area(const Polygon<Scalar>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return Scalar(0);
  Scalar acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return acc / 2;
}

template <typename Scalar>
Polygon<Scalar> to_polygon(const ConvexQuad<Scalar>& quad) {
  Polygon<Scalar> poly;
  poly.reserve(4);
  for (int i = 0; i < 4; ++i) poly.emplace_back(quad.col(i));
  return poly;
}

namespace detail {

template <typename Scalar>
Scalar cross(const Point2<Scalar>& a, const Point2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace detail

/// Sutherland-Hodgman clipping of a polygon against a convex polygon of either winding.
/// Points within kClipTolerance of a clip edge count as inside.
template <typename Scalar>
Polygon<Scalar> clip_convex(const Polygon<Scalar>& subject, const Polygon<Scalar>& clip) {
  const Scalar orientation = signed_area(clip) >= 0 ? Scalar(1) : Scalar(-1);
  Polygon<Scalar> output = subject;
  Polygon<Scalar> input;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Point2<Scalar> a = clip[e];
    const Point2<Scalar> edge = clip[(e + 1) % m] - a;
    const Scalar len = edge.norm();
    if (len == 0) continue;
    // Signed distance of p to the edge line, positive inside.
    auto distance = [&](const Point2<Scalar>& p) { return orientation * detail::cross(edge, Point2<Scalar>(p - a)) / len; };

    input.swap(output);
    output.clear();
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2<Scalar>& cur = input[i];
      const Point2<Scalar>& prev = input[(i + n - 1) % n];
      const Scalar d_cur = distance(cur);
      const Scalar d_prev = distance(prev);
      const bool cur_in = d_cur >= -Scalar(kClipTolerance);
      const bool prev_in = d_prev >= -Scalar(kClipTolerance);
      if (cur_in != prev_in) {
        const Scalar t = d_prev / (d_prev - d_cur);
        output.emplace_back(prev + t * (cur - prev));
      }
      if (cur_in) output.push_back(cur);
    }
  }
  return output;
}

/// Area of the intersection of two convex quads. Degenerate inputs give 0.
template <typename Scalar>
Scalar intersect_area(const ConvexQuad<Scalar>& a, const ConvexQuad<Scalar>& b) {
  const Polygon<Scalar> pa = to_polygon(a);
  const Polygon<Scalar> pb = to_polygon(b);
  const Scalar tiny = Scalar(kClipTolerance) * Scalar(kClipTolerance);
  if (std::abs(signed_area(pa)) <= tiny || std::abs(signed_area(pb)) <= tiny) return Scalar(0);
  const Scalar area = std::abs(signed_area(clip_convex(pa, pb)));
  using std::isfinite;
  return isfinite(area) ? area : Scalar(0);
}

/// Exact rotated IoU. Symmetric; an intersection equal to the smaller box's area up to
/// rounding is treated as containment, so equivalent parameterizations give exactly 1.
/// Zero-area boxes are accepted and contribute no intersection.
template <typename Scalar>
Scalar iou(const RotatedBox<Scalar>& a, const RotatedBox<Scalar>& b) {
  for (const auto* box : {&a, &b}) {
    // Zero sides are allowed here; validate() rejects everything else that is malformed.
    if (box->w != 0 && box->h != 0) {
      validate(*box);
    } else if (!std::isfinite(box->cx) || !std::isfinite(box->cy) || !std::isfinite(box->theta) ||
               box->w < 0 || box->h < 0) {
      throw InvalidBoxError("invalid degenerate box");
    }
  }
  const Scalar area_a = a.area();
  const Scalar area_b = b.area();
  if (!(area_a > 0) || !(area_b > 0)) return Scalar(0);
  const Scalar dx = a.cx - b.cx;
  const Scalar dy = a.cy - b.cy;
  const Scalar reach = (std::hypot(a.w, a.h) + std::hypot(b.w, b.h)) / 2;
  if (dx * dx + dy * dy > reach * reach) return Scalar(0);

  // Clip in a frame centred on `a` so rounding scales with box size, not image position.
  RotatedBox<Scalar> la = a;
  RotatedBox<Scalar> lb = b;
  la.cx = la.cy = Scalar(0);
  lb.cx = -dx;
  lb.cy = -dy;
  const Scalar smaller = std::min(area_a, area_b);
  Scalar inter = std::min(intersect_area(detail::corners_unchecked(la), detail::corners_unchecked(lb)), smaller);
  if (inter >= smaller * (1 - Scalar(64) * std::numeric_limits<Scalar>::epsilon())) inter = smaller;
  const Scalar uni = area_a + area_b - inter;
  if (!(uni > 0)) return Scalar(0);
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Rotates a box clockwise by phi about `pivot`; the result is canonical.
template <typename Scalar>
RotatedBox<Scalar> rotate_box(const RotatedBox<Scalar>& box, Scalar phi, const Point2<Scalar>& pivot) {
  validate(box);
  const Point2<Scalar> c = clockwise_rotation(phi) * (box.center() - pivot) + pivot;
  return canonicalize(RotatedBox<Scalar>{c.x(), c.y(), box.w, box.h, box.theta + phi});
}

/// Mirrors a box about the vertical line x = image_width / 2; the result is canonical.
template <typename Scalar>
RotatedBox<Scalar> hflip_box(const RotatedBox<Scalar>& box, Scalar image_width) {
  validate(box);
  return canonicalize(RotatedBox<Scalar>{image_width - box.cx, box.cy, box.w, box.h, -box.theta});
}

/// Canonical angle aligning a box's height axis with the ray from `image_center` through
/// (cx, cy), the pose of a standing person under an overhead fisheye lens. Returns 0 at
/// the center itself.
template <typename Scalar>
Scalar radius_aligned_angle(Scalar cx, Scalar cy, const Point2<Scalar>& image_center) {
  const Scalar dx = cx - image_center.x();
  const Scalar dy = cy - image_center.y();
  if (dx == 0 && dy == 0) return Scalar(0);
  // The height axis of a box at angle t points along (-sin t, cos t).
  return wrap_half_turn(std::atan2(-dx, dy));
}

/// Smallest angle between two orientations of a pi-periodic shape, in [0, pi/2].
template <typename Scalar>
Scalar angular_distance_mod_pi(Scalar a, Scalar b) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar d = std::fmod(std::abs(a - b), pi);
  return std::min(d, pi - d);
}

}  // namespace rotdet
