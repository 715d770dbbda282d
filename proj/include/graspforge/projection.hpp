#pragma once

#include <Eigen/Core>

#include <vector>

#include "graspforge/camera.hpp"
#include "graspforge/grasp.hpp"

namespace gf {

// Image-plane grasp label. theta is the in-plane rotation of the grasp axis
// measured from the +v direction, gamma the tilt of the axis out of the image
// plane; both in degrees. w/h are the training-box side lengths in pixels.
struct ImageGrasp {
  double x = 0.0, y = 0.0;
  double theta = 0.0;  // [-90, 90]
  double gamma = 0.0;
  double z = 0.0;  // meters, mean contact depth
  double w = 0.0;  // pixels
  double h = 20.0;

  bool operator==(const ImageGrasp&) const = default;
};

struct Grasp6DoF {
  ImageGrasp grasp;
  double beta = 0.0;  // degrees in [0, 360)
};

struct ProjectionOptions {
  // When true, reproduce the pixel-width tilt formula gamma =
  // atan((Z2-Z1)/w_px) instead of the metric tilt angle.
  bool gamma_pixel_w = false;
};

// Box height at the reference 224-pixel resolution, scaled proportionally.
double label_box_height(const CameraIntrinsics& intr);

// Project a 3D contact pair into the rotated-box label. Contacts are
// reordered so v2 > v1 (ties by u2 > u1); theta ends up in [-90, 90].
ImageGrasp project_grasp(const ContactPair& pair, const CameraIntrinsics& intr,
                         const CameraPose& pose, const ProjectionOptions& opts = {});

// Keep grasps with gamma in the closed interval [-30, 30] degrees.
std::vector<ImageGrasp> filter_tilt(const std::vector<ImageGrasp>& grasps,
                                    double max_tilt_deg = 30.0);

// Reconstruct contact positions (world frame, normals unset) from a label.
ContactPair back_project(const ImageGrasp& g, const CameraIntrinsics& intr,
                         const CameraPose& pose, const ProjectionOptions& opts = {});

}  // namespace gf
