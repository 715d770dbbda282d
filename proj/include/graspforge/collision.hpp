#pragma once

#include <Eigen/Core>

#include <vector>

#include "graspforge/camera.hpp"
#include "graspforge/grasp.hpp"
#include "graspforge/projection.hpp"

namespace gf {

// Projective signed distance over per-object segmented depth images sharing
// one camera. Queries are in that camera's frame: along the ray through the
// query, distance in front of the observed surface is positive, behind is
// negative, both truncated; off-silhouette queries fall back to the unsigned
// distance to the nearest observed surface point.
class SceneSDF {
 public:
  SceneSDF(const CameraIntrinsics& intr, std::vector<DepthImage> objects, double trunc = 0.1);

  double signed_distance(int object, const Eigen::Vector3d& point_cam) const;
  int object_count() const { return static_cast<int>(objects_.size()); }
  double truncation() const { return trunc_; }
  const CameraIntrinsics& intrinsics() const { return intr_; }

 private:
  struct KdTree {
    struct Node {
      Eigen::Vector3d point;
      int left = -1, right = -1;
      int axis = 0;
    };
    std::vector<Node> nodes;
    int root = -1;

    void build(std::vector<Eigen::Vector3d> points);
    double nearest_distance(const Eigen::Vector3d& query) const;

   private:
    int build_range(std::vector<Eigen::Vector3d>& pts, int lo, int hi, int depth);
    void search(int node, const Eigen::Vector3d& query, double& best_sq) const;
  };

  CameraIntrinsics intr_;
  double trunc_;
  std::vector<DepthImage> objects_;
  std::vector<KdTree> surfaces_;
};

// Sample points covering both finger bodies and the palm of a posed gripper.
struct GripperSweep {
  std::vector<Eigen::Vector3d> points;      // camera frame
  std::vector<uint8_t> in_closing_region;   // palm points between the fingertips
  Eigen::Vector3d grasp_center = Eigen::Vector3d::Zero();
  double finger_separation = 0.0;
};

// Pose the gripper from a 5-DoF label: contacts via back_project (identity
// pose, camera frame), beta rotates the approach direction about the grasp
// axis. The fingertip midpoint coincides with the 3D grasp center.
GripperSweep fk_gripper(const ImageGrasp& g, double beta_deg, const GripperModel& gripper,
                        const CameraIntrinsics& intr, double point_spacing = 0.005);

struct CollisionScore {
  double value = 0.0;  // sum over objects of -min signed distance, meters
};

struct CollisionOptions {
  int target_object = -1;  // its term skips closing-region sweep points
  double point_spacing = 0.005;
};

CollisionScore collision_score(const ImageGrasp& g, double beta_deg, const SceneSDF& scene,
                               const GripperModel& gripper, const CollisionOptions& opts = {});

struct BetaResult {
  double beta = 0.0;
  double score = 0.0;
};

// Exhaustive search over {0, step, ..., 360 - step}; ties (within 1e-9) go to
// the smallest beta. Empty scene returns (0, 0).
BetaResult refine_beta(const ImageGrasp& g, const SceneSDF& scene, const GripperModel& gripper,
                       double grid_step_deg = 5.0, const CollisionOptions& opts = {});

struct RankedGrasp {
  int object = -1;
  Grasp6DoF grasp;
  double score = 0.0;
};

struct GraspabilityReport {
  std::vector<RankedGrasp> ranked;        // best grasp per object, ascending score
  std::vector<int> ungraspable_objects;   // no strictly collision-free grasp
};

// Refine beta for every grasp, keep those with negative score (positive
// clearance), order objects by their best score.
GraspabilityReport rank_graspable(const std::vector<std::vector<ImageGrasp>>& object_grasps,
                                  const SceneSDF& scene, const GripperModel& gripper,
                                  double grid_step_deg = 5.0);

}  // namespace gf
