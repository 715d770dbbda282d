#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "graspforge/rng.hpp"

namespace gf {

struct BoundingBall {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

struct SurfaceSample {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // unit face normal (outward)
  int face_id = -1;
};

struct RayHit {
  Eigen::Vector3d point;
  int face_id = -1;
  double distance = 0.0;
};

namespace detail {

// Median-split BVH over triangles. Built once at load; meshes are immutable
// afterwards and safe to share across threads.
class TriangleBvh {
 public:
  void build(const std::vector<Eigen::Vector3d>& vertices,
             const std::vector<std::array<int, 3>>& faces);

  std::optional<RayHit> intersect(const std::vector<Eigen::Vector3d>& vertices,
                                  const std::vector<std::array<int, 3>>& faces,
                                  const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                  double min_t) const;

  // Closest surface point, returned with the owning face id.
  void closest_point(const std::vector<Eigen::Vector3d>& vertices,
                     const std::vector<std::array<int, 3>>& faces, const Eigen::Vector3d& query,
                     Eigen::Vector3d& out_point, int& out_face) const;

  bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;  // interior
    int start = 0, count = 0;   // leaf triangle range in order_
  };

  int build_node(const std::vector<Eigen::Vector3d>& vertices,
                 const std::vector<std::array<int, 3>>& faces,
                 std::vector<Eigen::Vector3d>& centroids, int start, int count);

  std::vector<Node> nodes_;
  std::vector<int> order_;
};

}  // namespace detail

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Eigen::Vector3d> face_normals;
  std::vector<double> face_areas;
  std::vector<double> area_cdf;  // cumulative face areas, for area-weighted sampling
  double total_area = 0.0;
  int dropped_degenerate_faces = 0;

  detail::TriangleBvh bvh;

  bool empty() const { return faces.empty(); }

  // Recompute normals/areas from winding order, drop degenerate faces
  // (area <= 1e-12 m^2) and rebuild the acceleration structure.
  void finalize();

  void translate(const Eigen::Vector3d& offset);
};

// Parse an OBJ or OFF file (chosen by extension, falling back to content
// sniffing). `scale` multiplies every vertex before finalization.
TriangleMesh load_mesh(const std::string& path, double scale = 1.0);

TriangleMesh parse_obj(const std::string& text, double scale = 1.0);
TriangleMesh parse_off(const std::string& text, double scale = 1.0);

// Ritter two-pass ball with iterative center refinement.
BoundingBall bounding_ball(const TriangleMesh& mesh);
BoundingBall bounding_ball_of_points(const std::vector<Eigen::Vector3d>& points);

// Exactly n samples, face choice proportional to area, uniform barycentric
// placement within the face.
std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, int n, Rng& rng);

// Nearest intersection with distance > min_t along a unit direction.
std::optional<RayHit> ray_intersect(const TriangleMesh& mesh, const Eigen::Vector3d& origin,
                                    const Eigen::Vector3d& direction, double min_t = 1e-9);

// Nearest point on the surface together with its face id.
SurfaceSample closest_surface_point(const TriangleMesh& mesh, const Eigen::Vector3d& query);

// Moller-Trumbore single-triangle test, also used by the test oracles.
bool ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                  const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                  double& t_out);

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c);

}  // namespace gf
