#include "graspforge/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>

#include "graspforge/errors.hpp"

namespace gf {

void CameraIntrinsics::check() const {
  if (fx <= 0.0 || fy <= 0.0 || cx <= 0.0 || cx >= width || cy <= 0.0 || cy >= height ||
      width <= 0 || height <= 0)
    throw Error(ErrorKind::config, "invalid camera intrinsics");
}

void CameraPose::check() const {
  if ((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm() > 1e-9 ||
      std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw Error(ErrorKind::config, "camera rotation is not a proper rotation");
}

CameraPose look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(forward.dot(up)) > 0.999) up = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d right = up.cross(forward).normalized();
  const Eigen::Vector3d down = forward.cross(right);

  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -pose.rotation * position;
  return pose;
}

std::vector<Eigen::Vector3d> icosahedron_face_directions() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const Eigen::Vector3d v[12] = {
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1},
  };
  static constexpr int faces[20][3] = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(20);
  for (const auto& f : faces)
    dirs.push_back(((v[f[0]] + v[f[1]] + v[f[2]]) / 3.0).normalized());
  return dirs;
}

std::vector<CameraPose> icosahedron_viewpoints(const BoundingBall& ball, Rng& rng) {
  if (ball.radius <= 0.0)
    throw Error(ErrorKind::degenerate_object, "bounding ball has zero radius");
  std::vector<CameraPose> poses;
  poses.reserve(20);
  for (const auto& dir : icosahedron_face_directions()) {
    const double distance = rng.uniform(std::sqrt(3.0) * ball.radius, 2.0 * ball.radius);
    poses.push_back(look_at(ball.center + distance * dir, ball.center));
  }
  return poses;
}

PixelProjection project_point(const CameraIntrinsics& intr, const CameraPose& pose,
                              const Eigen::Vector3d& x_world) {
  const Eigen::Vector3d xc = pose.to_camera(x_world);
  if (xc.z() <= 1e-9)
    throw Error(ErrorKind::behind_camera, "point at or behind the camera plane");
  return PixelProjection{intr.fx * xc.x() / xc.z() + intr.cx,
                         intr.fy * xc.y() / xc.z() + intr.cy, xc.z()};
}

DepthImage render_depth(const TriangleMesh& mesh, const CameraIntrinsics& intr,
                        const CameraPose& pose) {
  intr.check();
  pose.check();
  DepthImage img(intr.width, intr.height);
  const Eigen::Vector3d origin = pose.camera_center();
  const Eigen::Matrix3d r_t = pose.rotation.transpose();
  for (int row = 0; row < intr.height; ++row) {
    for (int col = 0; col < intr.width; ++col) {
      const Eigen::Vector3d dir_cam((col - intr.cx) / intr.fx, (row - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3d dir = (r_t * dir_cam).normalized();
      if (auto hit = ray_intersect(mesh, origin, dir)) {
        img.at(row, col) = static_cast<float>(pose.to_camera(hit->point).z());
      }
    }
  }
  return img;
}

PointCloud deproject(const DepthImage& img, const CameraIntrinsics& intr) {
  PointCloud cloud;
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      if (!img.valid(row, col)) continue;
      const double z = img.at(row, col);
      cloud.emplace_back((col - intr.cx) * z / intr.fx, (row - intr.cy) * z / intr.fy, z);
    }
  }
  return cloud;
}

std::pair<DepthImage, CameraPose> reproject_virtual(const PointCloud& cloud,
                                                    const CameraIntrinsics& intr, Rng& rng) {
  if (cloud.empty()) throw Error(ErrorKind::empty_geometry, "re-projecting an empty cloud");
  const BoundingBall ball = bounding_ball_of_points(cloud);
  // Degenerate (near-point) clouds get a 1 mm radius floor so the virtual
  // camera never coincides with the surface.
  const double r = std::max(ball.radius, 1e-3);
  const double distance = rng.uniform(std::sqrt(3.0) * r, 2.0 * r);

  // The original camera sits at the origin of the cloud frame; keep its
  // optical axis and slide the virtual camera along it.
  const Eigen::Vector3d axis = ball.center.norm() > 1e-12
                                   ? Eigen::Vector3d(ball.center.normalized())
                                   : Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d position = ball.center - distance * axis;
  const CameraPose pose = look_at(position, ball.center);

  DepthImage img(intr.width, intr.height);
  for (const auto& p : cloud) {
    const Eigen::Vector3d xc = pose.to_camera(p);
    if (xc.z() <= 1e-9) continue;
    const int col = static_cast<int>(std::lround(intr.fx * xc.x() / xc.z() + intr.cx));
    const int row = static_cast<int>(std::lround(intr.fy * xc.y() / xc.z() + intr.cy));
    if (!img.in_bounds(row, col)) continue;
    float& cell = img.at(row, col);
    const float z = static_cast<float>(xc.z());
    if (cell == 0.0f || z < cell) cell = z;  // keep the nearest depth
  }
  return {img, pose};
}

}  // namespace gf
