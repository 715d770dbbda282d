#include "graspforge/grasp.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graspforge/errors.hpp"

namespace gf {

void GripperModel::check() const {
  if (max_width <= 0.0 || jaw_length <= 0.0 || finger_thickness <= 0.0 || friction_mu <= 0.0)
    throw Error(ErrorKind::config, "gripper dimensions and friction must be positive");
}

bool force_closure(const ContactPair& pair, double mu) {
  const Eigen::Vector3d axis = pair.c2 - pair.c1;
  const double len = axis.norm();
  if (len < 1e-9) throw Error(ErrorKind::degenerate_grasp, "coincident grasp contacts");
  const double cone = std::atan(mu);
  const double a1 = std::acos(std::clamp(axis.dot(pair.n1) / len, -1.0, 1.0));
  const double a2 = std::acos(std::clamp((-axis).dot(pair.n2) / len, -1.0, 1.0));
  return a1 <= cone && a2 <= cone;
}

namespace {

// Unit vector at polar angle `alpha` from `axis`, azimuth `phi`.
Eigen::Vector3d cone_direction(const Eigen::Vector3d& axis, double alpha, double phi) {
  Eigen::Vector3d u = std::abs(axis.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = axis.cross(u).normalized();
  const Eigen::Vector3d e2 = axis.cross(e1);
  return std::cos(alpha) * axis + std::sin(alpha) * (std::cos(phi) * e1 + std::sin(phi) * e2);
}

}  // namespace

std::vector<ContactPair> sample_antipodal(const TriangleMesh& mesh, const GripperModel& gripper,
                                          int n, Rng& rng, const AntipodalOptions& opts) {
  gripper.check();
  std::vector<ContactPair> pairs;
  pairs.reserve(n);
  const long budget = static_cast<long>(opts.retry_factor) * n;
  const double cone = std::atan(gripper.friction_mu);

  for (long attempt = 0; attempt < budget && static_cast<int>(pairs.size()) < n; ++attempt) {
    const SurfaceSample first = sample_surface(mesh, 1, rng)[0];
    Eigen::Vector3d inward = -first.normal;
    Eigen::Vector3d dir = inward;
    if (opts.cone_jitter > 0.0) {
      // Uniform over the jittered cone's solid angle.
      const double max_alpha = opts.cone_jitter * cone;
      const double cos_a = rng.uniform(std::cos(max_alpha), 1.0);
      dir = cone_direction(inward, std::acos(std::clamp(cos_a, -1.0, 1.0)),
                           rng.uniform(0.0, 2.0 * M_PI));
    }
    const auto hit = ray_intersect(mesh, first.point, dir);
    if (!hit) continue;

    ContactPair pair;
    pair.c1 = first.point;
    pair.n1 = -first.normal;
    pair.c2 = hit->point;
    pair.n2 = -mesh.face_normals[hit->face_id];
    if ((pair.c2 - pair.c1).norm() > gripper.max_width) continue;
    if ((pair.c2 - pair.c1).norm() < 1e-9) continue;
    if (!force_closure(pair, gripper.friction_mu)) continue;
    pairs.push_back(pair);
  }
  return pairs;
}

GraspQuality robust_force_closure(const ContactPair& pair, const TriangleMesh& mesh, double mu,
                                  double sigma_c, int trials, Rng& rng) {
  GraspQuality q;
  q.in_force_closure = force_closure(pair, mu);
  if (sigma_c <= 0.0) {
    q.score = q.in_force_closure ? 1.0 : 0.0;
    return q;
  }

  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    Eigen::Vector3d p1, p2;
    for (int k = 0; k < 3; ++k) {
      p1[k] = pair.c1[k] + rng.gaussian(0.0, sigma_c);
      p2[k] = pair.c2[k] + rng.gaussian(0.0, sigma_c);
    }
    const SurfaceSample s1 = closest_surface_point(mesh, p1);
    const SurfaceSample s2 = closest_surface_point(mesh, p2);
    ContactPair perturbed;
    perturbed.c1 = s1.point;
    perturbed.n1 = -s1.normal;
    perturbed.c2 = s2.point;
    perturbed.n2 = -s2.normal;
    if ((perturbed.c2 - perturbed.c1).norm() < 1e-9) continue;  // degenerate trial counts as failure
    if (force_closure(perturbed, mu)) ++hits;
  }
  q.score = static_cast<double>(hits) / trials;
  return q;
}

std::vector<bool> label_top_fraction(const std::vector<double>& scores, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw Error(ErrorKind::config, "fraction must be in (0, 1]");
  std::vector<bool> flags(scores.size(), false);
  if (scores.empty()) return flags;

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const size_t k = static_cast<size_t>(std::ceil(fraction * static_cast<double>(scores.size())));
  for (size_t i = 0; i < k && i < order.size(); ++i) flags[order[i]] = true;
  return flags;
}

}  // namespace gf
