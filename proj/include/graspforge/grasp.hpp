#pragma once

#include <Eigen/Core>

#include <vector>

#include "graspforge/mesh.hpp"
#include "graspforge/rng.hpp"

namespace gf {

struct GripperModel {
  double max_width = 0.085;        // jaw opening, meters
  double jaw_length = 0.06;        // finger length along the approach
  double finger_thickness = 0.01;  // finger cross-section
  double friction_mu = 0.5;

  void check() const;
};

struct ContactPair {
  Eigen::Vector3d c1, c2;                        // contact positions, meters
  Eigen::Vector3d n1 = Eigen::Vector3d::Zero();  // unit inward surface normals
  Eigen::Vector3d n2 = Eigen::Vector3d::Zero();
};

struct GraspQuality {
  double score = 0.0;  // fraction of perturbed trials in force closure
  bool in_force_closure = false;
};

struct AntipodalOptions {
  // Fraction of the friction-cone half-angle used to jitter the second-
  // contact ray direction. 0 casts along the exact inward normal.
  double cone_jitter = 0.0;
  int retry_factor = 50;  // attempt budget = retry_factor * n
};

// Sample up to n antipodal pairs: area-weighted first contact, ray cast into
// the mesh for the second, keep pairs passing the antipodal condition with
// width <= max_width. Returns an empty list when nothing fits.
std::vector<ContactPair> sample_antipodal(const TriangleMesh& mesh, const GripperModel& gripper,
                                          int n, Rng& rng, const AntipodalOptions& opts = {});

// Two-contact antipodal force closure: the contact line lies inside both
// friction cones.
bool force_closure(const ContactPair& pair, double mu);

// Monte-Carlo force-closure probability under Gaussian contact perturbation;
// perturbed contacts are re-projected to the nearest surface point.
GraspQuality robust_force_closure(const ContactPair& pair, const TriangleMesh& mesh, double mu,
                                  double sigma_c, int trials, Rng& rng);

// Exactly ceil(fraction * n) true flags, chosen by descending score, ties
// broken by ascending index.
std::vector<bool> label_top_fraction(const std::vector<double>& scores, double fraction);

}  // namespace gf
