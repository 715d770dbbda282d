#include <doctest.h>

#include <cmath>

#include "graspforge/camera.hpp"
#include "graspforge/depth_io.hpp"
#include "graspforge/errors.hpp"
#include "support.hpp"

using namespace gf;

namespace {
CameraIntrinsics test_intrinsics() {
  CameraIntrinsics intr;
  intr.fx = intr.fy = 100.0;
  intr.cx = intr.cy = 112.0;
  intr.width = intr.height = 224;
  return intr;
}
}  // namespace

TEST_CASE("icosahedron viewpoints: count, distance law, look-at") {
  BoundingBall ball{{0.2, -0.1, 0.4}, 1.0};
  Rng rng(11);
  const auto poses = icosahedron_viewpoints(ball, rng);
  REQUIRE(poses.size() == 20);
  for (const auto& pose : poses) {
    const double d = (pose.camera_center() - ball.center).norm();
    CHECK(d >= std::sqrt(3.0) - 1e-12);
    CHECK(d <= 2.0 + 1e-12);
    // Optical axis points at the ball center.
    const Eigen::Vector3d fwd =
        pose.rotation * (ball.center - pose.camera_center()).normalized();
    CHECK((fwd - Eigen::Vector3d::UnitZ()).norm() <= 1e-9);
    pose.check();
  }
}

TEST_CASE("icosahedron directions match the golden-ratio hull oracle") {
  const auto dirs = icosahedron_face_directions();
  REQUIRE(dirs.size() == 20);
  const auto hull = oracle::icosahedron_directions_hull();
  REQUIRE(hull.size() == 20);
  const auto a = oracle::sorted_pairwise_angles(dirs);
  const auto b = oracle::sorted_pairwise_angles(hull);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
}

TEST_CASE("zero-radius ball is rejected") {
  Rng rng(1);
  BoundingBall ball{{0, 0, 0}, 0.0};
  try {
    icosahedron_viewpoints(ball, rng);
    FAIL("expected degenerate-object");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_object);
  }
}

TEST_CASE("pinhole projection worked examples") {
  const CameraIntrinsics intr = test_intrinsics();
  const CameraPose identity;
  const auto center = project_point(intr, identity, {0, 0, 1});
  CHECK(center.u == doctest::Approx(112.0));
  CHECK(center.v == doctest::Approx(112.0));
  CHECK(center.depth == doctest::Approx(1.0));

  const auto offset = project_point(intr, identity, {0, 0.05, 1});
  CHECK(offset.u == doctest::Approx(112.0));
  CHECK(offset.v == doctest::Approx(117.0));
  CHECK(offset.depth == doctest::Approx(1.0));

  try {
    project_point(intr, identity, {0, 0, -1});
    FAIL("expected behind-camera");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::behind_camera);
  }
}

TEST_CASE("rendering the cube face-on") {
  const TriangleMesh cube = parse_obj(oracle::unit_cube_obj());
  const CameraIntrinsics intr = test_intrinsics();
  const CameraPose pose = look_at({0, 0, -2}, {0, 0, 0});
  const DepthImage img = render_depth(cube, intr, pose);
  CHECK(img.at(112, 112) == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(img.valid_count() > 100);

  // A mesh entirely behind the camera renders to an all-zero image.
  const CameraPose away = look_at({0, 0, -2}, {0, 0, -4});
  const DepthImage blank = render_depth(cube, intr, away);
  CHECK(blank.valid_count() == 0);
}

TEST_CASE("render + deproject lands on the surface") {
  const TriangleMesh cube = parse_obj(oracle::unit_cube_obj());
  const CameraIntrinsics intr = test_intrinsics();
  const CameraPose pose = look_at({1.4, 1.1, -1.8}, {0, 0, 0});
  const DepthImage img = render_depth(cube, intr, pose);
  const PointCloud cloud = deproject(img, intr);
  REQUIRE(cloud.size() == static_cast<size_t>(img.valid_count()));
  for (size_t i = 0; i < cloud.size(); i += 7) {
    const Eigen::Vector3d world = pose.to_world(cloud[i]);
    CHECK(oracle::brute_force_surface_distance(cube, world) <= 1e-4);
  }
}

TEST_CASE("deproject basics") {
  const CameraIntrinsics intr = test_intrinsics();
  DepthImage img(intr.width, intr.height);
  CHECK(deproject(img, intr).empty());
  img.at(112, 112) = 2.0f;
  const PointCloud cloud = deproject(img, intr);
  REQUIRE(cloud.size() == 1);
  CHECK((cloud[0] - Eigen::Vector3d(0, 0, 2)).norm() <= 1e-9);
}

TEST_CASE("project/deproject round trip within one pixel") {
  const CameraIntrinsics intr = test_intrinsics();
  const CameraPose identity;
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d p(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                            rng.uniform(0.5, 2.0));
    const auto proj = project_point(intr, identity, p);
    if (proj.u < 0 || proj.u > intr.width - 1 || proj.v < 0 || proj.v > intr.height - 1)
      continue;
    // Quantize to the pixel grid as rendering would.
    const double u = std::lround(proj.u), v = std::lround(proj.v);
    const Eigen::Vector3d back((u - intr.cx) * proj.depth / intr.fx,
                               (v - intr.cy) * proj.depth / intr.fy, proj.depth);
    const double bound = proj.depth / intr.fx;
    CHECK(std::abs(back.x() - p.x()) <= bound);
    CHECK(std::abs(back.y() - p.y()) <= bound);
    CHECK(std::abs(back.z() - p.z()) <= 1e-12);
  }
}

TEST_CASE("virtual re-projection draws the distance law and z-buffers") {
  const CameraIntrinsics intr = test_intrinsics();

  // Cloud with a known bounding ball radius of ~0.1.
  PointCloud cloud;
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    Eigen::Vector3d dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
    dir.normalize();
    cloud.push_back(Eigen::Vector3d(0, 0, 1.0) + 0.1 * dir);
  }
  Rng vr(17);
  const auto [img, pose] = reproject_virtual(cloud, intr, vr);
  const BoundingBall ball = bounding_ball_of_points(cloud);
  const double d = (pose.camera_center() - ball.center).norm();
  CHECK(d >= std::sqrt(3.0) * ball.radius - 1e-9);
  CHECK(d <= 2.0 * ball.radius + 1e-9);
  CHECK(img.valid_count() > 0);

  // One-point cloud produces exactly one valid pixel.
  PointCloud single{{0.01, -0.02, 0.8}};
  Rng vr2(18);
  const auto [one, pose1] = reproject_virtual(single, intr, vr2);
  CHECK(one.valid_count() == 1);

  try {
    PointCloud empty;
    Rng vr3(19);
    reproject_virtual(empty, intr, vr3);
    FAIL("expected empty-geometry");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::empty_geometry);
  }
}

TEST_CASE("re-projected silhouette area follows perspective scaling") {
  // Dense source render (double focal length, double resolution) so the
  // virtual view never starves for splat points; the pixel-count prediction
  // rescales by (fx_dst / fx_src)^2.
  // A thin plate seen face-on keeps the visible surface at one depth, so
  // the flat-scaling prediction is unbiased.
  const TriangleMesh plate = parse_obj(oracle::box_obj(0.05, 0.05, 0.002));
  CameraIntrinsics src;
  src.fx = src.fy = 300.0;
  src.cx = src.cy = 224.0;
  src.width = src.height = 448;
  CameraIntrinsics dst;
  dst.fx = dst.fy = 150.0;
  dst.cx = dst.cy = 112.0;
  dst.width = dst.height = 224;

  const CameraPose pose = look_at({0.0, 0.0, -0.18}, {0, 0, 0});
  const DepthImage img = render_depth(plate, src, pose);
  const PointCloud cloud = deproject(img, src);
  const BoundingBall ball = bounding_ball_of_points(cloud);
  const double d_old = ball.center.norm();  // source camera sits at the cloud origin

  Rng rng(21);
  const auto [virt, vpose] = reproject_virtual(cloud, dst, rng);
  const double d_new = (vpose.camera_center() - ball.center).norm();
  const double predicted = img.valid_count() * (dst.fx / src.fx) * (dst.fx / src.fx) *
                           (d_old / d_new) * (d_old / d_new);
  CHECK(std::abs(virt.valid_count() - predicted) <= 0.10 * predicted);
}

TEST_CASE("depth PNG round trip quantizes to millimeters") {
  DepthImage img(37, 23);
  Rng rng(2);
  for (auto& p : img.pixels)
    if (rng.bernoulli(0.7)) p = static_cast<float>(rng.uniform(0.05, 3.0));
  const auto bytes = encode_depth_png(img);
  const DepthImage back = decode_depth_png(bytes);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    if (img.pixels[i] == 0.0f)
      CHECK(back.pixels[i] == 0.0f);
    else
      CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 5.01e-4f);
  }
}

TEST_CASE("GFDI raw round trip is bitwise") {
  DepthImage img(11, 5);
  Rng rng(4);
  for (auto& p : img.pixels)
    if (rng.bernoulli(0.6)) p = static_cast<float>(rng.uniform(0.05, 2.0));
  const auto bytes = encode_depth_raw(img);
  CHECK(bytes.size() == 16 + img.pixels.size() * 4);
  CHECK(bytes[0] == 'G');
  const DepthImage back = decode_depth_raw(bytes);
  CHECK(back == img);
}
