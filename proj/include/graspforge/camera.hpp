#pragma once

#include <Eigen/Core>

#include <vector>

#include "graspforge/depth_image.hpp"
#include "graspforge/mesh.hpp"
#include "graspforge/rng.hpp"

namespace gf {

struct CameraIntrinsics {
  double fx = 200.0, fy = 200.0;
  double cx = 112.0, cy = 112.0;
  int width = 224, height = 224;

  void check() const;
};

// World-to-camera rigid transform: x_cam = R * x_world + t.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& x_world) const {
    return rotation * x_world + translation;
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& x_cam) const {
    return rotation.transpose() * (x_cam - translation);
  }
  Eigen::Vector3d camera_center() const { return -rotation.transpose() * translation; }

  void check() const;
};

using PointCloud = std::vector<Eigen::Vector3d>;

struct PixelProjection {
  double u, v, depth;
};

// Camera placed at `position` with its +Z axis pointing at `target`.
CameraPose look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target);

// 20 unit directions through the face centers of a regular icosahedron.
std::vector<Eigen::Vector3d> icosahedron_face_directions();

// One camera per icosahedron face, optical axis through ball.center,
// distance drawn per view from U(sqrt(3) * r, 2 * r).
std::vector<CameraPose> icosahedron_viewpoints(const BoundingBall& ball, Rng& rng);

// Pinhole projection; throws behind_camera when camera-frame Z <= 1e-9.
PixelProjection project_point(const CameraIntrinsics& intr, const CameraPose& pose,
                              const Eigen::Vector3d& x_world);

// One ray per pixel center; nearest-hit camera-frame Z, 0 where no hit.
DepthImage render_depth(const TriangleMesh& mesh, const CameraIntrinsics& intr,
                        const CameraPose& pose);

// One camera-frame point per valid pixel.
PointCloud deproject(const DepthImage& img, const CameraIntrinsics& intr);

// Normalizes camera-object distance by z-buffering the cloud into a virtual
// camera placed on the original optical axis at a re-drawn U(sqrt(3)r, 2r)
// distance. Returns the image and the original-frame -> virtual-frame pose.
std::pair<DepthImage, CameraPose> reproject_virtual(const PointCloud& cloud,
                                                    const CameraIntrinsics& intr, Rng& rng);

}  // namespace gf
