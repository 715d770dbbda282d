#include "graspforge/collision.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>

#include "graspforge/errors.hpp"

namespace gf {

namespace {
constexpr double kDeg2Rad = 0.01745329251994329576923690768489;
}

void SceneSDF::KdTree::build(std::vector<Eigen::Vector3d> points) {
  nodes.clear();
  nodes.reserve(points.size());
  if (!points.empty()) root = build_range(points, 0, static_cast<int>(points.size()), 0);
}

int SceneSDF::KdTree::build_range(std::vector<Eigen::Vector3d>& pts, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = (lo + hi) / 2;
  std::nth_element(pts.begin() + lo, pts.begin() + mid, pts.begin() + hi,
                   [axis](const auto& a, const auto& b) { return a[axis] < b[axis]; });
  const int idx = static_cast<int>(nodes.size());
  nodes.push_back(Node{pts[mid], -1, -1, axis});
  const int left = build_range(pts, lo, mid, depth + 1);
  const int right = build_range(pts, mid + 1, hi, depth + 1);
  nodes[idx].left = left;
  nodes[idx].right = right;
  return idx;
}

void SceneSDF::KdTree::search(int node, const Eigen::Vector3d& query, double& best_sq) const {
  if (node < 0) return;
  const Node& n = nodes[node];
  best_sq = std::min(best_sq, (n.point - query).squaredNorm());
  const double delta = query[n.axis] - n.point[n.axis];
  const int near = delta < 0.0 ? n.left : n.right;
  const int far = delta < 0.0 ? n.right : n.left;
  search(near, query, best_sq);
  if (delta * delta < best_sq) search(far, query, best_sq);
}

double SceneSDF::KdTree::nearest_distance(const Eigen::Vector3d& query) const {
  if (root < 0) return std::numeric_limits<double>::max();
  double best_sq = std::numeric_limits<double>::max();
  search(root, query, best_sq);
  return std::sqrt(best_sq);
}

SceneSDF::SceneSDF(const CameraIntrinsics& intr, std::vector<DepthImage> objects, double trunc)
    : intr_(intr), trunc_(trunc), objects_(std::move(objects)) {
  intr_.check();
  if (trunc_ <= 0.0) throw Error(ErrorKind::config, "truncation must be positive");
  surfaces_.resize(objects_.size());
  for (size_t i = 0; i < objects_.size(); ++i)
    surfaces_[i].build(deproject(objects_[i], intr_));
}

double SceneSDF::signed_distance(int object, const Eigen::Vector3d& p) const {
  const DepthImage& img = objects_[object];
  if (p.z() > 1e-9) {
    const double u = intr_.fx * p.x() / p.z() + intr_.cx;
    const double v = intr_.fy * p.y() / p.z() + intr_.cy;
    const int col = static_cast<int>(std::lround(u));
    const int row = static_cast<int>(std::lround(v));
    if (img.in_bounds(row, col) && img.valid(row, col)) {
      // Metric distance along the viewing ray through the query.
      const double ray_scale = std::sqrt(1.0 + ((u - intr_.cx) / intr_.fx) * ((u - intr_.cx) / intr_.fx) +
                                         ((v - intr_.cy) / intr_.fy) * ((v - intr_.cy) / intr_.fy));
      const double sd = (img.at(row, col) - p.z()) * ray_scale;
      return std::clamp(sd, -trunc_, trunc_);
    }
  }
  // Off the silhouette (or behind the camera): unsigned distance to the
  // nearest observed surface point.
  const double d = surfaces_[object].nearest_distance(p);
  return std::min(d, trunc_);
}

GripperSweep fk_gripper(const ImageGrasp& g, double beta_deg, const GripperModel& gripper,
                        const CameraIntrinsics& intr, double point_spacing) {
  gripper.check();
  if (!(g.z > 0.0) || !(g.w > 0.0))
    throw Error(ErrorKind::degenerate_grasp, "grasp must have positive depth and width");

  const ContactPair pair = back_project(g, intr, CameraPose{});
  const Eigen::Vector3d center = 0.5 * (pair.c1 + pair.c2);
  Eigen::Vector3d axis = pair.c2 - pair.c1;
  const double w3d = axis.norm();
  if (w3d < 1e-9) throw Error(ErrorKind::degenerate_grasp, "degenerate grasp axis");
  axis /= w3d;

  // Reference approach at beta = 0: the viewing ray through the grasp
  // center, made orthogonal to the grasp axis.
  Eigen::Vector3d view = center.normalized();
  Eigen::Vector3d approach0 = view - view.dot(axis) * axis;
  if (approach0.norm() < 1e-9)
    throw Error(ErrorKind::degenerate_grasp, "grasp axis parallel to the viewing ray");
  approach0.normalize();

  const double beta = beta_deg * kDeg2Rad;
  const Eigen::Vector3d lateral0 = axis.cross(approach0);
  const Eigen::Vector3d approach = std::cos(beta) * approach0 + std::sin(beta) * lateral0;
  const Eigen::Vector3d lateral = axis.cross(approach);

  const double sep = std::min(w3d, gripper.max_width);
  const double t = gripper.finger_thickness;

  GripperSweep sweep;
  sweep.grasp_center = center;
  sweep.finger_separation = sep;

  // Grid-sample an axis-aligned box in grasp-frame coordinates
  // (a = grasp axis, d = approach pointing from palm toward the object,
  // e = lateral); the fingertips sit at the grasp-center depth.
  auto emit_box = [&](double a0, double a1, double d0, double d1, double e0, double e1,
                      double spacing) {
    const int na = std::max(1, static_cast<int>(std::ceil((a1 - a0) / spacing)) + 1);
    const int nd = std::max(1, static_cast<int>(std::ceil((d1 - d0) / spacing)) + 1);
    const int ne = std::max(1, static_cast<int>(std::ceil((e1 - e0) / spacing)) + 1);
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nd; ++j)
        for (int k = 0; k < ne; ++k) {
          const double av = na == 1 ? 0.5 * (a0 + a1) : a0 + (a1 - a0) * i / (na - 1);
          const double dv = nd == 1 ? 0.5 * (d0 + d1) : d0 + (d1 - d0) * j / (nd - 1);
          const double ev = ne == 1 ? 0.5 * (e0 + e1) : e0 + (e1 - e0) * k / (ne - 1);
          sweep.points.push_back(center + av * axis - dv * approach + ev * lateral);
          sweep.in_closing_region.push_back(std::abs(av) < 0.5 * sep ? 1 : 0);
        }
  };

  double spacing = point_spacing;
  for (int refine = 0; refine < 8; ++refine) {
    sweep.points.clear();
    sweep.in_closing_region.clear();
    // Fingers: inner faces at +-sep/2, tips at approach depth 0.
    emit_box(0.5 * sep, 0.5 * sep + t, 0.0, gripper.jaw_length, -0.5 * t, 0.5 * t, spacing);
    emit_box(-0.5 * sep - t, -0.5 * sep, 0.0, gripper.jaw_length, -0.5 * t, 0.5 * t, spacing);
    // Palm slab behind the fingers, spanning the opening.
    emit_box(-0.5 * sep - t, 0.5 * sep + t, gripper.jaw_length, gripper.jaw_length + t,
             -0.5 * t, 0.5 * t, spacing);
    if (sweep.points.size() >= 200) break;
    spacing *= 0.5;
  }
  return sweep;
}

CollisionScore collision_score(const ImageGrasp& g, double beta_deg, const SceneSDF& scene,
                               const GripperModel& gripper, const CollisionOptions& opts) {
  CollisionScore out;
  if (scene.object_count() == 0) return out;
  const GripperSweep sweep =
      fk_gripper(g, beta_deg, gripper, scene.intrinsics(), opts.point_spacing);

  for (int obj = 0; obj < scene.object_count(); ++obj) {
    const bool is_target = obj == opts.target_object;
    double min_sd = std::numeric_limits<double>::max();
    for (size_t i = 0; i < sweep.points.size(); ++i) {
      if (is_target && sweep.in_closing_region[i]) continue;
      min_sd = std::min(min_sd, scene.signed_distance(obj, sweep.points[i]));
    }
    if (min_sd == std::numeric_limits<double>::max()) min_sd = scene.truncation();
    out.value += -min_sd;
  }
  return out;
}

BetaResult refine_beta(const ImageGrasp& g, const SceneSDF& scene, const GripperModel& gripper,
                       double grid_step_deg, const CollisionOptions& opts) {
  if (grid_step_deg <= 0.0 || std::abs(360.0 / grid_step_deg - std::round(360.0 / grid_step_deg)) > 1e-9)
    throw Error(ErrorKind::config, "grid step must divide 360");
  BetaResult best{0.0, 0.0};
  if (scene.object_count() == 0) return best;

  bool first = true;
  for (double beta = 0.0; beta < 360.0 - 1e-9; beta += grid_step_deg) {
    const double score = collision_score(g, beta, scene, gripper, opts).value;
    // Strictly-better with a tie epsilon keeps the smallest beta on plateaus.
    if (first || score < best.score - 1e-9) {
      best.beta = beta;
      best.score = score;
      first = false;
    }
  }
  return best;
}

GraspabilityReport rank_graspable(const std::vector<std::vector<ImageGrasp>>& object_grasps,
                                  const SceneSDF& scene, const GripperModel& gripper,
                                  double grid_step_deg) {
  GraspabilityReport report;
  for (size_t obj = 0; obj < object_grasps.size(); ++obj) {
    CollisionOptions opts;
    opts.target_object = static_cast<int>(obj);
    bool found = false;
    RankedGrasp best;
    for (const ImageGrasp& g : object_grasps[obj]) {
      const BetaResult r = refine_beta(g, scene, gripper, grid_step_deg, opts);
      if (r.score >= 0.0) continue;  // needs strictly positive clearance
      if (!found || r.score < best.score) {
        found = true;
        best.object = static_cast<int>(obj);
        best.grasp = Grasp6DoF{g, r.beta};
        best.score = r.score;
      }
    }
    if (found)
      report.ranked.push_back(best);
    else
      report.ungraspable_objects.push_back(static_cast<int>(obj));
  }
  std::stable_sort(report.ranked.begin(), report.ranked.end(),
                   [](const RankedGrasp& a, const RankedGrasp& b) { return a.score < b.score; });
  return report;
}

}  // namespace gf
