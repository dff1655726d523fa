#pragma once

#include <numbers>
#include <optional>
#include <vector>

namespace dirdet {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

/// Maps any finite angle onto [0, 2*pi). Throws std::invalid_argument for
/// non-finite input.
double wrap_angle(double radians);

/// A direction angle in canonical form: radians in [0, 2*pi), measured
/// clockwise from the bottom-up vertical axis in image coordinates.
class Angle {
 public:
  static Angle wrap(double radians) { return Angle(wrap_angle(radians)); }
  double radians() const { return radians_; }
  friend bool operator==(Angle a, Angle b) { return a.radians_ == b.radians_; }

 private:
  explicit Angle(double canonical) : radians_(canonical) {}
  double radians_ = 0.0;
};

/// Rotated rectangle with an optional facing direction. `w` is the short
/// (head) edge, `h` the long edge along the direction. Image coordinates:
/// x right, y down; theta = 0 points bottom-up, increasing clockwise.
struct DirectedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::optional<Angle> theta;  // absent for direction-free classes
};

/// Throws ValidationError unless cx/cy are finite and w, h > 0.
void validate_box(const DirectedBox& box);

/// Vertices in counter-clockwise order (positive signed area). Either empty
/// or at least 3 vertices; empty is the result of a disjoint intersection.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
  bool empty() const { return vertices.empty(); }
};

/// The four corners of `box`. Direction unit vector is (sin t, -cos t),
/// its perpendicular (cos t, sin t); corners are center +- (h/2)*dir
/// +- (w/2)*perp, emitted counter-clockwise. Absent theta is treated as 0.
ConvexPolygon box_corners(const DirectedBox& box);

double polygon_signed_area(const ConvexPolygon& poly);

/// Shoelace area, nonnegative regardless of winding.
double polygon_area(const ConvexPolygon& poly);

/// Convex intersection via half-plane clipping. Vertices closer than 1e-9 px
/// are merged; results with fewer than 3 distinct vertices come back empty.
ConvexPolygon intersect_convex(const ConvexPolygon& a, const ConvexPolygon& b);

/// Intersection-over-union of two rotated rectangles. Symmetric, in [0, 1],
/// 0 for disjoint or touching boxes.
double rotated_iou(const DirectedBox& a, const DirectedBox& b);

/// Direction correction factor (1 + cos(delta)) / 2: 1 for equal directions,
/// 0 for opposite ones. Even and 2*pi-periodic.
double dir_corr(double delta_theta);

/// rotated_iou scaled by dir_corr of the angle difference. When either box
/// has no direction the correction factor is 1 and this equals rotated_iou.
double dir_iou(const DirectedBox& a, const DirectedBox& b);

}  // namespace dirdet
