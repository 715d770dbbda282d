#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graspforge/mesh.hpp"
#include "graspforge/rng.hpp"
#include "graspforge/rotated_box.hpp"

// Test-side oracles, independent of the library code paths they check.
namespace oracle {

inline std::string box_obj(double hx, double hy, double hz) {
  std::ostringstream out;
  const int sign[2] = {-1, 1};
  // Vertex order: x fastest, then y, then z.
  for (int sz : sign)
    for (int sy : sign)
      for (int sx : sign)
        out << "v " << sx * hx << " " << sy * hy << " " << sz * hz << "\n";
  auto idx = [](int sx, int sy, int sz) {
    return 1 + (sx > 0 ? 1 : 0) + (sy > 0 ? 2 : 0) + (sz > 0 ? 4 : 0);
  };
  auto quad = [&](int a, int b, int c, int d) {
    out << "f " << a << " " << b << " " << c << "\n";
    out << "f " << a << " " << c << " " << d << "\n";
  };
  quad(idx(-1, -1, -1), idx(-1, 1, -1), idx(1, 1, -1), idx(1, -1, -1));
  quad(idx(-1, -1, 1), idx(1, -1, 1), idx(1, 1, 1), idx(-1, 1, 1));
  quad(idx(-1, -1, -1), idx(1, -1, -1), idx(1, -1, 1), idx(-1, -1, 1));
  quad(idx(-1, 1, -1), idx(-1, 1, 1), idx(1, 1, 1), idx(1, 1, -1));
  quad(idx(-1, -1, -1), idx(-1, -1, 1), idx(-1, 1, 1), idx(-1, 1, -1));
  quad(idx(1, -1, -1), idx(1, 1, -1), idx(1, 1, 1), idx(1, -1, 1));
  return out.str();
}

inline std::string unit_cube_obj() { return box_obj(0.5, 0.5, 0.5); }

// Plane-intersection + barycentric ray/triangle test; deliberately a
// different algorithm from the library's Moller-Trumbore kernel.
inline std::optional<double> ray_triangle_plane(const Eigen::Vector3d& origin,
                                                const Eigen::Vector3d& dir,
                                                const Eigen::Vector3d& a,
                                                const Eigen::Vector3d& b,
                                                const Eigen::Vector3d& c) {
  const Eigen::Vector3d n = (b - a).cross(c - a);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-14) return std::nullopt;
  const double t = n.dot(a - origin) / denom;
  if (t <= 0.0) return std::nullopt;
  const Eigen::Vector3d p = origin + t * dir;
  // Barycentric containment.
  const Eigen::Vector3d v0 = b - a, v1 = c - a, v2 = p - a;
  const double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1);
  const double d20 = v2.dot(v0), d21 = v2.dot(v1);
  const double det = d00 * d11 - d01 * d01;
  if (std::abs(det) < 1e-20) return std::nullopt;
  const double v = (d11 * d20 - d01 * d21) / det;
  const double w = (d00 * d21 - d01 * d20) / det;
  if (v < 0.0 || w < 0.0 || v + w > 1.0) return std::nullopt;
  return t;
}

// Exhaustive nearest hit over every face.
inline std::optional<gf::RayHit> brute_force_intersect(const gf::TriangleMesh& mesh,
                                                       const Eigen::Vector3d& origin,
                                                       const Eigen::Vector3d& dir,
                                                       double min_t = 1e-9) {
  std::optional<gf::RayHit> best;
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    const auto t = ray_triangle_plane(origin, dir, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                      mesh.vertices[f[2]]);
    if (t && *t > min_t && (!best || *t < best->distance))
      best = gf::RayHit{origin + *t * dir, static_cast<int>(fi), *t};
  }
  return best;
}

inline double brute_force_surface_distance(const gf::TriangleMesh& mesh,
                                           const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::max();
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d c = gf::closest_point_on_triangle(p, mesh.vertices[f[0]],
                                                            mesh.vertices[f[1]],
                                                            mesh.vertices[f[2]]);
    best = std::min(best, (c - p).norm());
  }
  return best;
}

// Monte-Carlo skew IoU: box areas are analytic, only the intersection is
// sampled, inside the overlap of the two axis-aligned bounds.
inline double mc_iou(const gf::RotatedBox& a, const gf::RotatedBox& b, long samples,
                     uint64_t seed) {
  auto bounds = [](const gf::RotatedBox& box, Eigen::Vector2d& lo, Eigen::Vector2d& hi) {
    const auto corners = box.corners();
    lo = hi = corners[0];
    for (const auto& c : corners) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  };
  Eigen::Vector2d alo, ahi, blo, bhi;
  bounds(a, alo, ahi);
  bounds(b, blo, bhi);
  const double x0 = std::max(alo.x(), blo.x()), x1 = std::min(ahi.x(), bhi.x());
  const double y0 = std::max(alo.y(), blo.y()), y1 = std::min(ahi.y(), bhi.y());
  if (x0 >= x1 || y0 >= y1) return 0.0;

  struct Frame {
    double cx, cy, ax, ay, bx, by, hw, hh;
  };
  auto frame = [](const gf::RotatedBox& box) {
    const double t = box.theta * M_PI / 180.0;
    return Frame{box.x, box.y, std::sin(t), std::cos(t), std::cos(t), -std::sin(t),
                 0.5 * box.w, 0.5 * box.h};
  };
  const Frame fa = frame(a), fb = frame(b);
  auto inside = [](const Frame& f, double x, double y) {
    const double dx = x - f.cx, dy = y - f.cy;
    return std::abs(dx * f.ax + dy * f.ay) <= f.hw && std::abs(dx * f.bx + dy * f.by) <= f.hh;
  };

  gf::Rng rng(seed);
  long in_both = 0;
  for (long i = 0; i < samples; ++i) {
    const double x = x0 + (x1 - x0) * rng.uniform();
    const double y = y0 + (y1 - y0) * rng.uniform();
    if (inside(fa, x, y) && inside(fb, x, y)) ++in_both;
  }
  const double inter = (x1 - x0) * (y1 - y0) * static_cast<double>(in_both) / samples;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Face-center directions of a regular icosahedron recovered from the
// golden-ratio vertices by brute-force hull-face search.
inline std::vector<Eigen::Vector3d> icosahedron_directions_hull() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<Eigen::Vector3d> dirs;
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        Eigen::Vector3d normal = (v[j] - v[i]).cross(v[k] - v[i]);
        if (normal.norm() < 1e-9) continue;
        normal.normalize();
        double lo = 1e300, hi = -1e300;
        for (const auto& p : v) {
          const double d = normal.dot(p - v[i]);
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
        // A hull face has every other vertex strictly on one side.
        if (lo < -1e-9 && hi > 1e-9) continue;
        Eigen::Vector3d center = (v[i] + v[j] + v[k]) / 3.0;
        bool duplicate = false;
        for (const auto& d : dirs)
          if ((d - center.normalized()).norm() < 1e-9) duplicate = true;
        if (!duplicate) dirs.push_back(center.normalized());
      }
  return dirs;
}

inline std::vector<double> sorted_pairwise_angles(const std::vector<Eigen::Vector3d>& dirs) {
  std::vector<double> angles;
  for (size_t i = 0; i < dirs.size(); ++i)
    for (size_t j = i + 1; j < dirs.size(); ++j)
      angles.push_back(std::acos(std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0)));
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace oracle
