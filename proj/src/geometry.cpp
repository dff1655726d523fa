#include "dirdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "dirdet/errors.hpp"

namespace dirdet {
namespace {

// Distances below this (in px) count as coincident / on-edge during clipping.
constexpr double kClipTol = 1e-9;

std::tuple<double, double, double, double, double> box_key(const DirectedBox& b) {
  return {b.cx, b.cy, b.w, b.h, b.theta ? b.theta->radians() : -1.0};
}

// Fixes an evaluation order for the pair so that iou(a,b) and iou(b,a) run
// the identical computation.
void order_pair(const DirectedBox*& a, const DirectedBox*& b) {
  if (box_key(*b) < box_key(*a)) std::swap(a, b);
}

std::vector<Vec2> merge_close_vertices(std::vector<Vec2> verts) {
  std::vector<Vec2> out;
  out.reserve(verts.size());
  for (const Vec2& v : verts) {
    if (!out.empty()) {
      Vec2 d = v - out.back();
      if (std::abs(d.x) <= kClipTol && std::abs(d.y) <= kClipTol) continue;
    }
    out.push_back(v);
  }
  while (out.size() > 1) {
    Vec2 d = out.front() - out.back();
    if (std::abs(d.x) <= kClipTol && std::abs(d.y) <= kClipTol) {
      out.pop_back();
    } else {
      break;
    }
  }
  return out;
}

}  // namespace

double wrap_angle(double radians) {
  if (!std::isfinite(radians)) {
    throw std::invalid_argument("wrap_angle: angle must be finite");
  }
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;  // the += above can round up to exactly 2*pi
  return r;
}

void validate_box(const DirectedBox& box) {
  if (!std::isfinite(box.cx) || !std::isfinite(box.cy)) {
    throw ValidationError("box center must be finite");
  }
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw ValidationError("box extents must be positive");
  }
}

ConvexPolygon box_corners(const DirectedBox& box) {
  const double t = box.theta ? box.theta->radians() : 0.0;
  const Vec2 dir{std::sin(t), -std::cos(t)};
  const Vec2 perp{std::cos(t), std::sin(t)};
  const Vec2 c{box.cx, box.cy};
  const Vec2 hd = (box.h / 2.0) * dir;
  const Vec2 hw = (box.w / 2.0) * perp;
  return ConvexPolygon{{c + hd + hw, c - hd + hw, c - hd - hw, c + hd - hw}};
}

double polygon_signed_area(const ConvexPolygon& poly) {
  const auto& v = poly.vertices;
  double sum = 0.0;
  for (size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % n];
    sum += p.x * q.y - q.x * p.y;
  }
  return 0.5 * sum;
}

double polygon_area(const ConvexPolygon& poly) {
  return std::abs(polygon_signed_area(poly));
}

ConvexPolygon intersect_convex(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.empty() || b.empty()) return {};

  std::vector<Vec2> out = a.vertices;
  const auto& clip = b.vertices;
  for (size_t i = 0, n = clip.size(); i < n && !out.empty(); ++i) {
    const Vec2 p1 = clip[i];
    const Vec2 p2 = clip[(i + 1) % n];
    const Vec2 edge = p2 - p1;
    const double len = std::hypot(edge.x, edge.y);
    if (len <= kClipTol) continue;

    // Signed distance to the clip edge, positive on the interior (left) side.
    auto dist = [&](Vec2 v) { return cross(edge, v - p1) / len; };

    std::vector<Vec2> next;
    next.reserve(out.size() + 1);
    for (size_t j = 0, m = out.size(); j < m; ++j) {
      const Vec2 s = out[j];
      const Vec2 t = out[(j + 1) % m];
      const double ds = dist(s);
      const double dt = dist(t);
      const bool s_in = ds >= -kClipTol;
      const bool t_in = dt >= -kClipTol;
      if (s_in && t_in) {
        next.push_back(t);
      } else if (s_in != t_in) {
        const double u = ds / (ds - dt);
        next.push_back(s + u * (t - s));
        if (t_in) next.push_back(t);
      }
    }
    out = std::move(next);
  }

  out = merge_close_vertices(std::move(out));
  if (out.size() < 3) return {};
  ConvexPolygon result{std::move(out)};
  if (polygon_signed_area(result) < 0.0) {
    std::reverse(result.vertices.begin(), result.vertices.end());
  }
  return result;
}

double rotated_iou(const DirectedBox& a, const DirectedBox& b) {
  const DirectedBox* first = &a;
  const DirectedBox* second = &b;
  order_pair(first, second);

  const ConvexPolygon inter = intersect_convex(box_corners(*first), box_corners(*second));
  const double inter_area = polygon_area(inter);
  if (inter_area <= 0.0) return 0.0;
  const double uni = first->w * first->h + second->w * second->h - inter_area;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter_area / uni, 0.0, 1.0);
}

double dir_corr(double delta_theta) {
  return 0.5 * (1.0 + std::cos(delta_theta));
}

double dir_iou(const DirectedBox& a, const DirectedBox& b) {
  const DirectedBox* first = &a;
  const DirectedBox* second = &b;
  order_pair(first, second);

  double corr = 1.0;
  if (first->theta && second->theta) {
    corr = dir_corr(first->theta->radians() - second->theta->radians());
  }
  return rotated_iou(*first, *second) * corr;
}

}  // namespace dirdet
