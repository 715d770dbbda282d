#include "graspforge/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "graspforge/errors.hpp"

namespace gf {

namespace detail {

namespace {

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(std::numeric_limits<double>::lowest());
  void grow(const Eigen::Vector3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
};

bool ray_aabb(const Eigen::Vector3d& origin, const Eigen::Vector3d& inv_dir,
              const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int i = 0; i < 3; ++i) {
    double a = (lo[i] - origin[i]) * inv_dir[i];
    double b = (hi[i] - origin[i]) * inv_dir[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

double aabb_distance_sq(const Eigen::Vector3d& p, const Eigen::Vector3d& lo,
                        const Eigen::Vector3d& hi) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    double e = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
    d += e * e;
  }
  return d;
}

}  // namespace

void TriangleBvh::build(const std::vector<Eigen::Vector3d>& vertices,
                        const std::vector<std::array<int, 3>>& faces) {
  nodes_.clear();
  order_.resize(faces.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (faces.empty()) return;

  std::vector<Eigen::Vector3d> centroids(faces.size());
  for (size_t i = 0; i < faces.size(); ++i) {
    centroids[i] =
        (vertices[faces[i][0]] + vertices[faces[i][1]] + vertices[faces[i][2]]) / 3.0;
  }
  nodes_.reserve(2 * faces.size());
  build_node(vertices, faces, centroids, 0, static_cast<int>(faces.size()));
}

int TriangleBvh::build_node(const std::vector<Eigen::Vector3d>& vertices,
                            const std::vector<std::array<int, 3>>& faces,
                            std::vector<Eigen::Vector3d>& centroids, int start, int count) {
  Aabb box, cbox;
  for (int i = start; i < start + count; ++i) {
    const auto& f = faces[order_[i]];
    box.grow(vertices[f[0]]);
    box.grow(vertices[f[1]]);
    box.grow(vertices[f[2]]);
    cbox.grow(centroids[order_[i]]);
  }
  const int node_index = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{box.lo, box.hi, -1, -1, start, count});

  constexpr int kLeafSize = 4;
  if (count <= kLeafSize) return node_index;

  Eigen::Vector3d extent = cbox.hi - cbox.lo;
  int axis = 0;
  if (extent[1] > extent[axis]) axis = 1;
  if (extent[2] > extent[axis]) axis = 2;
  if (extent[axis] <= 0.0) return node_index;  // all centroids coincide

  const int mid = start + count / 2;
  std::nth_element(order_.begin() + start, order_.begin() + mid, order_.begin() + start + count,
                   [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });

  const int left = build_node(vertices, faces, centroids, start, mid - start);
  const int right = build_node(vertices, faces, centroids, mid, start + count - mid);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  nodes_[node_index].count = 0;
  return node_index;
}

std::optional<RayHit> TriangleBvh::intersect(const std::vector<Eigen::Vector3d>& vertices,
                                             const std::vector<std::array<int, 3>>& faces,
                                             const Eigen::Vector3d& origin,
                                             const Eigen::Vector3d& dir, double min_t) const {
  if (nodes_.empty()) return std::nullopt;
  Eigen::Vector3d inv_dir;
  for (int i = 0; i < 3; ++i) inv_dir[i] = 1.0 / (dir[i] == 0.0 ? 1e-300 : dir[i]);

  double best_t = std::numeric_limits<double>::max();
  int best_face = -1;

  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!ray_aabb(origin, inv_dir, node.lo, node.hi, best_t)) continue;
    if (node.left < 0) {
      for (int i = node.start; i < node.start + node.count; ++i) {
        const int fi = order_[i];
        const auto& f = faces[fi];
        double t;
        if (ray_triangle(origin, dir, vertices[f[0]], vertices[f[1]], vertices[f[2]], t) &&
            t > min_t && t < best_t) {
          best_t = t;
          best_face = fi;
        }
      }
    } else {
      stack[sp++] = node.left;
      stack[sp++] = node.right;
    }
  }
  if (best_face < 0) return std::nullopt;
  return RayHit{origin + best_t * dir, best_face, best_t};
}

void TriangleBvh::closest_point(const std::vector<Eigen::Vector3d>& vertices,
                                const std::vector<std::array<int, 3>>& faces,
                                const Eigen::Vector3d& query, Eigen::Vector3d& out_point,
                                int& out_face) const {
  double best_d2 = std::numeric_limits<double>::max();
  out_face = -1;

  // Depth-first with AABB distance pruning.
  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (aabb_distance_sq(query, node.lo, node.hi) >= best_d2) continue;
    if (node.left < 0) {
      for (int i = node.start; i < node.start + node.count; ++i) {
        const int fi = order_[i];
        const auto& f = faces[fi];
        Eigen::Vector3d c =
            closest_point_on_triangle(query, vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        double d2 = (c - query).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          out_point = c;
          out_face = fi;
        }
      }
    } else {
      // Visit the nearer child first.
      const Node& l = nodes_[node.left];
      const Node& r = nodes_[node.right];
      double dl = aabb_distance_sq(query, l.lo, l.hi);
      double dr = aabb_distance_sq(query, r.lo, r.hi);
      if (dl < dr) {
        stack[sp++] = node.right;
        stack[sp++] = node.left;
      } else {
        stack[sp++] = node.left;
        stack[sp++] = node.right;
      }
    }
  }
}

}  // namespace detail

bool ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                  const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                  double& t_out) {
  constexpr double kEps = 1e-14;
  const Eigen::Vector3d e1 = b - a;
  const Eigen::Vector3d e2 = c - a;
  const Eigen::Vector3d pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kEps) return false;
  const double inv_det = 1.0 / det;
  const Eigen::Vector3d tvec = origin - a;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  const Eigen::Vector3d qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv_det;
  if (t <= 0.0) return false;
  t_out = t;
  return true;
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

void TriangleMesh::finalize() {
  if (vertices.empty() || faces.empty())
    throw Error(ErrorKind::empty_geometry, "mesh has no geometry");

  std::vector<std::array<int, 3>> kept;
  kept.reserve(faces.size());
  face_normals.clear();
  face_areas.clear();
  dropped_degenerate_faces = 0;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= static_cast<int>(vertices.size()))
        throw Error(ErrorKind::malformed_mesh, "face vertex index out of range");
    }
    const Eigen::Vector3d n =
        (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    const double area = 0.5 * n.norm();
    if (area <= 1e-12) {
      ++dropped_degenerate_faces;  // slivers are dropped, not fatal
      continue;
    }
    kept.push_back(f);
    face_normals.push_back(n / (2.0 * area));
    face_areas.push_back(area);
  }
  faces = std::move(kept);
  if (faces.empty()) throw Error(ErrorKind::empty_geometry, "mesh has no non-degenerate faces");

  area_cdf.resize(face_areas.size());
  double acc = 0.0;
  for (size_t i = 0; i < face_areas.size(); ++i) {
    acc += face_areas[i];
    area_cdf[i] = acc;
  }
  total_area = acc;

  bvh.build(vertices, faces);
}

void TriangleMesh::translate(const Eigen::Vector3d& offset) {
  for (auto& v : vertices) v += offset;
  bvh.build(vertices, faces);
}

namespace {

[[noreturn]] void parse_fail(const std::string& what, int line) {
  throw Error(ErrorKind::malformed_mesh, what + " at line " + std::to_string(line));
}

int resolve_obj_index(long idx, size_t vertex_count, int line) {
  // OBJ indices are 1-based; negative values count from the end.
  long resolved = idx > 0 ? idx - 1 : static_cast<long>(vertex_count) + idx;
  if (resolved < 0 || resolved >= static_cast<long>(vertex_count))
    parse_fail("face index out of range", line);
  return static_cast<int>(resolved);
}

}  // namespace

TriangleMesh parse_obj(const std::string& text, double scale) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ls >> v.x() >> v.y() >> v.z())) parse_fail("bad vertex record", line_no);
      mesh.vertices.push_back(v * scale);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // "i", "i/j", "i//k", "i/j/k": the vertex index is the first field.
        const std::string first = tok.substr(0, tok.find('/'));
        long raw = 0;
        try {
          raw = std::stol(first);
        } catch (const std::exception&) {
          parse_fail("bad face record", line_no);
        }
        idx.push_back(resolve_obj_index(raw, mesh.vertices.size(), line_no));
      }
      if (idx.size() < 3) parse_fail("face with fewer than 3 vertices", line_no);
      for (size_t k = 2; k < idx.size(); ++k)  // fan triangulation
        mesh.faces.push_back({idx[0], idx[k - 1], idx[k]});
    }
    // Other records (vn, vt, o, g, usemtl, ...) are ignored.
  }
  mesh.finalize();
  return mesh;
}

TriangleMesh parse_off(const std::string& text, double scale) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto next_content_line = [&](std::string& out) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      const auto pos = line.find_first_not_of(" \t\r\n");
      if (pos == std::string::npos || line[pos] == '#') continue;
      out = line;
      return true;
    }
    return false;
  };

  std::string header;
  if (!next_content_line(header)) throw Error(ErrorKind::empty_geometry, "empty OFF file");
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "OFF") parse_fail("missing OFF header", line_no);

  long nv = -1, nf = -1, ne = 0;
  if (!(hs >> nv >> nf >> ne)) {
    std::string counts;
    if (!next_content_line(counts)) parse_fail("missing OFF counts", line_no);
    std::istringstream cs(counts);
    if (!(cs >> nv >> nf >> ne)) parse_fail("bad OFF counts", line_no);
  }
  if (nv <= 0 || nf <= 0) throw Error(ErrorKind::empty_geometry, "OFF file with no geometry");

  TriangleMesh mesh;
  mesh.vertices.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    std::string vl;
    if (!next_content_line(vl)) parse_fail("truncated vertex list", line_no);
    std::istringstream vs(vl);
    Eigen::Vector3d v;
    if (!(vs >> v.x() >> v.y() >> v.z())) parse_fail("bad vertex record", line_no);
    mesh.vertices.push_back(v * scale);
  }
  for (long i = 0; i < nf; ++i) {
    std::string fl;
    if (!next_content_line(fl)) parse_fail("truncated face list", line_no);
    std::istringstream fs(fl);
    int k = 0;
    if (!(fs >> k) || k < 3) parse_fail("bad face record", line_no);
    std::vector<int> idx(k);
    for (int j = 0; j < k; ++j) {
      if (!(fs >> idx[j])) parse_fail("bad face record", line_no);
      if (idx[j] < 0 || idx[j] >= static_cast<int>(mesh.vertices.size()))
        parse_fail("face index out of range", line_no);
    }
    for (int j = 2; j < k; ++j) mesh.faces.push_back({idx[0], idx[j - 1], idx[j]});
  }
  mesh.finalize();
  return mesh;
}

TriangleMesh load_mesh(const std::string& path, double scale) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::io, "cannot open mesh file: " + path);
  std::stringstream buf;
  buf << file.rdbuf();
  const std::string text = buf.str();

  auto lower_ext = [&]() -> std::string {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return "";
    std::string e = path.substr(dot + 1);
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
  };

  const std::string ext = lower_ext();
  if (ext == "off") return parse_off(text, scale);
  if (ext == "obj") return parse_obj(text, scale);
  // Sniff: OFF files start with the literal header.
  if (text.rfind("OFF", 0) == 0) return parse_off(text, scale);
  return parse_obj(text, scale);
}

BoundingBall bounding_ball_of_points(const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) throw Error(ErrorKind::empty_geometry, "bounding ball of empty point set");

  // Ritter: two farthest-point passes, then grow to cover stragglers.
  auto farthest_from = [&](const Eigen::Vector3d& p) {
    size_t best = 0;
    double best_d = -1.0;
    for (size_t i = 0; i < points.size(); ++i) {
      double d = (points[i] - p).squaredNorm();
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };

  const Eigen::Vector3d a = points[farthest_from(points[0])];
  const Eigen::Vector3d b = points[farthest_from(a)];
  Eigen::Vector3d center = 0.5 * (a + b);
  double radius = 0.5 * (b - a).norm();

  for (const auto& p : points) {
    const double d = (p - center).norm();
    if (d > radius) {
      const double nr = 0.5 * (radius + d);
      center += (p - center) * ((d - nr) / d);
      radius = nr;
    }
  }

  // Refinement: nudge toward the current farthest vertex with a decaying
  // step, keeping the tightest cover seen.
  auto exact_radius = [&](const Eigen::Vector3d& c) {
    double r = 0.0;
    for (const auto& p : points) r = std::max(r, (p - c).norm());
    return r;
  };

  double best_radius = exact_radius(center);
  Eigen::Vector3d best_center = center;
  double step = 0.5;
  Eigen::Vector3d c = center;
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector3d f = points[farthest_from(c)];
    c += (f - c) * step * 0.1;
    const double r = exact_radius(c);
    if (r < best_radius) {
      best_radius = r;
      best_center = c;
    }
    step *= 0.96;
  }
  return BoundingBall{best_center, best_radius};
}

BoundingBall bounding_ball(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw Error(ErrorKind::empty_geometry, "bounding ball of empty mesh");
  return bounding_ball_of_points(mesh.vertices);
}

std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, int n, Rng& rng) {
  if (mesh.empty()) throw Error(ErrorKind::empty_geometry, "sampling an empty mesh");
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double target = rng.uniform() * mesh.total_area;
    const auto it = std::lower_bound(mesh.area_cdf.begin(), mesh.area_cdf.end(), target);
    const int fi = static_cast<int>(std::min<size_t>(it - mesh.area_cdf.begin(),
                                                     mesh.area_cdf.size() - 1));
    const auto& f = mesh.faces[fi];
    // Uniform barycentric via the sqrt trick.
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Eigen::Vector3d p = (1.0 - r1) * mesh.vertices[f[0]] +
                              r1 * (1.0 - r2) * mesh.vertices[f[1]] +
                              r1 * r2 * mesh.vertices[f[2]];
    out.push_back(SurfaceSample{p, mesh.face_normals[fi], fi});
  }
  return out;
}

std::optional<RayHit> ray_intersect(const TriangleMesh& mesh, const Eigen::Vector3d& origin,
                                    const Eigen::Vector3d& direction, double min_t) {
  return mesh.bvh.intersect(mesh.vertices, mesh.faces, origin, direction, min_t);
}

SurfaceSample closest_surface_point(const TriangleMesh& mesh, const Eigen::Vector3d& query) {
  if (mesh.empty()) throw Error(ErrorKind::empty_geometry, "closest point on empty mesh");
  Eigen::Vector3d point;
  int face = -1;
  mesh.bvh.closest_point(mesh.vertices, mesh.faces, query, point, face);
  return SurfaceSample{point, mesh.face_normals[face], face};
}

}  // namespace gf
