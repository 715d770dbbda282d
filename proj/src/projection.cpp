#include "graspforge/projection.hpp"

#include <cmath>

#include "graspforge/errors.hpp"

namespace gf {

namespace {

constexpr double kRad2Deg = 57.295779513082320876798154814105;
constexpr double kDeg2Rad = 1.0 / kRad2Deg;

}  // namespace

double label_box_height(const CameraIntrinsics& intr) { return 20.0 * intr.height / 224.0; }

ImageGrasp project_grasp(const ContactPair& pair, const CameraIntrinsics& intr,
                         const CameraPose& pose, const ProjectionOptions& opts) {
  PixelProjection p1 = project_point(intr, pose, pair.c1);
  PixelProjection p2 = project_point(intr, pose, pair.c2);
  Eigen::Vector3d c1 = pose.to_camera(pair.c1);
  Eigen::Vector3d c2 = pose.to_camera(pair.c2);

  // Canonical contact order: v2 > v1, ties broken by u2 > u1, so the label is
  // invariant under swapping the input contacts.
  bool swap;
  if (std::abs(p2.v - p1.v) < 1e-9)
    swap = p2.u < p1.u;
  else
    swap = p2.v < p1.v;
  if (swap) {
    std::swap(p1, p2);
    std::swap(c1, c2);
  }

  const double du = p2.u - p1.u;
  const double dv = p2.v - p1.v;
  const double w = std::hypot(du, dv);
  if (w < 1e-9)
    throw Error(ErrorKind::degenerate_projection, "contacts project to the same pixel");

  ImageGrasp g;
  g.x = 0.5 * (p1.u + p2.u);
  g.y = 0.5 * (p1.v + p2.v);
  g.w = w;
  g.h = label_box_height(intr);
  g.theta = std::atan2(du, dv) * kRad2Deg;
  g.z = 0.5 * (p1.depth + p2.depth);

  const double dz = c2.z() - c1.z();
  if (opts.gamma_pixel_w) {
    g.gamma = std::atan(dz / w) * kRad2Deg;
  } else {
    // Tilt of the grasp axis out of the image plane: the in-plane metric
    // separation of the contacts is the adjacent side.
    const double planar = std::hypot(c2.x() - c1.x(), c2.y() - c1.y());
    g.gamma = std::atan2(dz, planar) * kRad2Deg;
  }
  return g;
}

std::vector<ImageGrasp> filter_tilt(const std::vector<ImageGrasp>& grasps, double max_tilt_deg) {
  std::vector<ImageGrasp> out;
  out.reserve(grasps.size());
  for (const auto& g : grasps)
    if (std::abs(g.gamma) <= max_tilt_deg) out.push_back(g);
  return out;
}

ContactPair back_project(const ImageGrasp& g, const CameraIntrinsics& intr,
                         const CameraPose& pose, const ProjectionOptions& opts) {
  const double theta = g.theta * kDeg2Rad;
  const double u1 = g.x - 0.5 * g.w * std::sin(theta);
  const double v1 = g.y - 0.5 * g.w * std::cos(theta);
  const double u2 = g.x + 0.5 * g.w * std::sin(theta);
  const double v2 = g.y + 0.5 * g.w * std::cos(theta);
  const double tan_gamma = std::tan(g.gamma * kDeg2Rad);

  auto lift = [&](double u, double v, double z) {
    return Eigen::Vector3d((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z);
  };

  double dz = 0.0;
  if (opts.gamma_pixel_w) {
    dz = g.w * tan_gamma;
  } else {
    // dz depends on the planar metric separation, which depends on dz; the
    // fixed point contracts whenever tan(gamma) times the off-axis pixel
    // slope stays below 1, which filtered labels (|gamma| <= 30) satisfy.
    const double z_floor = 1e-6;
    for (int it = 0; it < 500; ++it) {
      const double z1 = std::max(g.z - 0.5 * dz, z_floor);
      const double z2 = std::max(g.z + 0.5 * dz, z_floor);
      const Eigen::Vector3d a = lift(u1, v1, z1);
      const Eigen::Vector3d b = lift(u2, v2, z2);
      const double planar = std::hypot(b.x() - a.x(), b.y() - a.y());
      const double next = planar * tan_gamma;
      const bool done = std::abs(next - dz) < 1e-15 * std::max(1.0, std::abs(next));
      dz = next;
      if (done) break;
    }
  }

  const Eigen::Vector3d c1_cam = lift(u1, v1, g.z - 0.5 * dz);
  const Eigen::Vector3d c2_cam = lift(u2, v2, g.z + 0.5 * dz);
  ContactPair pair;
  pair.c1 = pose.to_world(c1_cam);
  pair.c2 = pose.to_world(c2_cam);
  return pair;
}

}  // namespace gf
