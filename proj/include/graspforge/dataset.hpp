#pragma once

#include <map>
#include <string>
#include <vector>

#include "graspforge/augment.hpp"
#include "graspforge/camera.hpp"
#include "graspforge/grasp.hpp"
#include "graspforge/losses.hpp"
#include "graspforge/projection.hpp"

namespace gf {

// Everything the pipeline needs, addressable from the key/value config file.
struct RunConfig {
  CameraIntrinsics camera;

  int grasp_count = 100;
  int views_per_object = 20;
  double top_fraction = 0.2;
  double max_tilt_deg = 30.0;
  bool gamma_pixel_w = false;

  GripperModel gripper;
  double sigma_c = 0.0025;  // contact perturbation std, meters
  int quality_trials = 100;
  double cone_jitter = 0.0;

  double mesh_scale = 1.0;
  std::string depth_format = "png";  // or "gfdi"

  std::vector<AugmentOp> family;

  // Rotated-region matching.
  double match_pos_thresh = 0.7;
  double match_neg_thresh = 0.3;
  int match_k = 3;
  double anchor_stride = 16.0;
  std::vector<double> anchor_scales = {16.0, 32.0, 64.0};
  std::vector<double> anchor_ratios = {0.5, 2.0};
  std::vector<double> anchor_angles = {-75.0, -45.0, -15.0, 15.0, 45.0, 75.0};

  LossWeights loss_weights;

  double collision_trunc = 0.1;
  double collision_grid_step = 5.0;
  double collision_point_spacing = 0.005;

  ToyTrainConfig train;

  uint64_t seed = 0;

  ProjectionOptions projection_options() const { return ProjectionOptions{gamma_pixel_w}; }
};

RunConfig default_config();

// Flat "key = value" file; '#' starts a comment. Unknown keys are rejected.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

// Procedural depth scene (boxes and disks over an invalid background) used
// by the toy trainer and the test suites.
DepthImage make_synthetic_depth(uint64_t seed, int width = 64, int height = 64);

struct GenerateResult {
  std::string manifest_path;
  int objects = 0;
  int views = 0;
  int labeled_grasps = 0;
};

// End-to-end generation: per mesh, sample and score grasps once in 3D,
// render each view, project + tilt-filter, mark the top fraction, write
// depth files and the manifest. Reproducible from config.seed.
GenerateResult generate_dataset(const std::string& object_dir, const RunConfig& config,
                                const std::string& out_dir, int jobs = 1);

struct ValidationIssue {
  std::string what;
};

// Re-checks every manifest invariant; empty result means clean.
std::vector<ValidationIssue> validate_manifest(const std::string& manifest_path);

}  // namespace gf
