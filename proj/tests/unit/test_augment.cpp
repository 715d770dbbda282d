#include <doctest.h>

#include <cmath>

#include "graspforge/augment.hpp"
#include "graspforge/camera.hpp"
#include "graspforge/errors.hpp"
#include "graspforge/projection.hpp"
#include "support.hpp"

using namespace gf;

namespace {

// Principal point at the array center so camera-roll and mirrored-camera
// oracles line up exactly with the pixel-grid transforms.
CameraIntrinsics centered_intrinsics(int size = 224) {
  CameraIntrinsics intr;
  intr.width = intr.height = size;
  intr.fx = intr.fy = 100.0;
  intr.cx = intr.cy = (size - 1) / 2.0;
  return intr;
}

DepthImage random_scene(uint64_t seed, int size = 64) {
  Rng rng(seed);
  DepthImage img(size, size);
  for (int r = size / 4; r < 3 * size / 4; ++r)
    for (int c = size / 4; c < 3 * size / 4; ++c)
      img.at(r, c) = static_cast<float>(rng.uniform(0.5, 0.8));
  return img;
}

std::vector<ImageGrasp> sample_labels(Rng& rng, int count, double extent) {
  std::vector<ImageGrasp> labels;
  for (int i = 0; i < count; ++i) {
    ImageGrasp g;
    g.x = rng.uniform(0.3 * extent, 0.7 * extent);
    g.y = rng.uniform(0.3 * extent, 0.7 * extent);
    g.theta = rng.uniform(-89.0, 89.0);
    g.gamma = rng.uniform(-30.0, 30.0);
    g.z = rng.uniform(0.5, 1.5);
    g.w = rng.uniform(4.0, 20.0);
    labels.push_back(g);
  }
  return labels;
}

void check_label_angles(const ImageGrasp& a, double theta, double gamma, double tol) {
  const double direct = std::abs(a.theta - theta);
  if (direct <= tol) {
    CHECK(std::abs(a.gamma - gamma) <= tol);
  } else {
    CHECK(std::abs(direct - 180.0) <= tol);
    CHECK(std::abs(a.gamma + gamma) <= tol);
  }
}

}  // namespace

TEST_CASE("rotate by zero is the identity") {
  const DepthImage img = random_scene(1);
  Rng rng(2);
  const auto labels = sample_labels(rng, 5, img.width);
  const AugmentedSample out = apply_rotate(img, labels, 0.0);
  CHECK(out.image == img);
  REQUIRE(out.labels.size() == labels.size());
  for (size_t i = 0; i < labels.size(); ++i) CHECK(out.labels[i] == labels[i]);
}

TEST_CASE("two 180-degree rotations restore the sample exactly") {
  const DepthImage img = random_scene(3);
  Rng rng(4);
  const auto labels = sample_labels(rng, 8, img.width);
  const AugmentedSample once = apply_rotate(img, labels, 180.0);
  const AugmentedSample twice = apply_rotate(once.image, once.labels, 180.0);
  CHECK(twice.image == img);
  REQUIRE(twice.labels.size() == labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    CHECK(std::abs(twice.labels[i].x - labels[i].x) <= 1e-9);
    CHECK(std::abs(twice.labels[i].y - labels[i].y) <= 1e-9);
    check_label_angles(twice.labels[i], labels[i].theta, labels[i].gamma, 1e-9);
  }
}

TEST_CASE("double flips are exact involutions") {
  const DepthImage img = random_scene(5);
  Rng rng(6);
  const auto labels = sample_labels(rng, 8, img.width);
  for (FlipAxis axis : {FlipAxis::horizontal, FlipAxis::vertical}) {
    const AugmentedSample once = apply_flip(img, labels, axis);
    const AugmentedSample twice = apply_flip(once.image, once.labels, axis);
    CHECK(twice.image == img);
    REQUIRE(twice.labels.size() == labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
      CHECK(std::abs(twice.labels[i].x - labels[i].x) <= 1e-9);
      CHECK(std::abs(twice.labels[i].y - labels[i].y) <= 1e-9);
      check_label_angles(twice.labels[i], labels[i].theta, labels[i].gamma, 1e-9);
    }
  }
}

TEST_CASE("horizontal flip negates theta") {
  DepthImage img(64, 64);
  ImageGrasp g;
  g.x = 20;
  g.y = 30;
  g.theta = 30.0;
  g.gamma = 12.0;
  g.z = 1.0;
  g.w = 10.0;
  const AugmentedSample out = apply_flip(img, {g}, FlipAxis::horizontal);
  REQUIRE(out.labels.size() == 1);
  CHECK(out.labels[0].theta == doctest::Approx(-30.0));
  CHECK(out.labels[0].x == doctest::Approx(63.0 - 20.0));
  CHECK(out.labels[0].gamma == doctest::Approx(12.0));
}

TEST_CASE("rotation label rule matches the rolled-camera oracle") {
  // Render, project, augment; then roll the camera and re-project: the two
  // label sets and pixel grids must agree.
  const TriangleMesh cube = parse_obj(oracle::unit_cube_obj());
  const CameraIntrinsics intr = centered_intrinsics();
  const CameraPose pose = look_at({0.9, 1.3, -1.7}, {0, 0, 0});

  Rng rng(7);
  std::vector<ContactPair> pairs;
  for (int i = 0; i < 40; ++i) {
    ContactPair p;
    p.c1 = {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
    p.c2 = {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
    if ((p.c1 - p.c2).norm() > 0.05) pairs.push_back(p);
  }

  for (double alpha : {90.0, 180.0, 270.0}) {
    const double a = alpha * M_PI / 180.0;
    Eigen::Matrix3d roll;
    roll << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    CameraPose rolled;
    rolled.rotation = roll * pose.rotation;
    rolled.translation = roll * pose.translation;

    const DepthImage base = render_depth(cube, intr, pose);
    std::vector<ImageGrasp> labels;
    for (const auto& p : pairs) labels.push_back(project_grasp(p, intr, pose));

    const AugmentedSample augmented = apply_rotate(base, labels, alpha);
    const DepthImage oracle_img = render_depth(cube, intr, rolled);
    CHECK(augmented.image == oracle_img);

    REQUIRE(augmented.labels.size() == pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
      const ImageGrasp expected = project_grasp(pairs[i], intr, rolled);
      CHECK(std::abs(augmented.labels[i].x - expected.x) <= 1e-6);
      CHECK(std::abs(augmented.labels[i].y - expected.y) <= 1e-6);
      CHECK(std::abs(augmented.labels[i].w - expected.w) <= 1e-6);
      check_label_angles(augmented.labels[i], expected.theta, expected.gamma, 0.1);
      CHECK(std::abs(augmented.labels[i].z - expected.z) <= 1e-9);
    }
  }
}

TEST_CASE("flip label rule matches the mirrored-camera oracle") {
  const CameraIntrinsics intr = centered_intrinsics();
  const CameraPose identity;
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    ContactPair p;
    p.c1 = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.8, 1.4)};
    p.c2 = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.8, 1.4)};
    if ((p.c1 - p.c2).norm() < 0.03) continue;
    ImageGrasp label;
    try {
      label = project_grasp(p, intr, identity);
    } catch (const Error&) {
      continue;
    }
    DepthImage img(intr.width, intr.height);

    // Horizontal flip corresponds to mirroring the world across the
    // camera's YZ plane.
    const AugmentedSample flipped = apply_flip(img, {label}, FlipAxis::horizontal);
    ContactPair mirrored = p;
    mirrored.c1.x() *= -1.0;
    mirrored.c2.x() *= -1.0;
    const ImageGrasp expected = project_grasp(mirrored, intr, identity);
    REQUIRE(flipped.labels.size() == 1);
    CHECK(std::abs(flipped.labels[0].x - expected.x) <= 1e-6);
    CHECK(std::abs(flipped.labels[0].y - expected.y) <= 1e-6);
    check_label_angles(flipped.labels[0], expected.theta, expected.gamma, 1e-6);

    // Vertical flip mirrors across the XZ plane.
    const AugmentedSample vflip = apply_flip(img, {label}, FlipAxis::vertical);
    ContactPair vmir = p;
    vmir.c1.y() *= -1.0;
    vmir.c2.y() *= -1.0;
    const ImageGrasp vexpected = project_grasp(vmir, intr, identity);
    CHECK(std::abs(vflip.labels[0].x - vexpected.x) <= 1e-6);
    CHECK(std::abs(vflip.labels[0].y - vexpected.y) <= 1e-6);
    check_label_angles(vflip.labels[0], vexpected.theta, vexpected.gamma, 1e-6);
  }
}

TEST_CASE("dropout removes an exact pixel count and keeps labels") {
  DepthImage img(100, 100);
  for (auto& p : img.pixels) p = 0.7f;
  REQUIRE(img.valid_count() == 10000);
  Rng rng(9);
  const auto labels = sample_labels(rng, 4, 100);

  Rng drop_rng(10);
  const AugmentedSample out = apply_dropout(img, labels, 0.3, drop_rng);
  CHECK(out.image.valid_count() == 7000);
  REQUIRE(out.labels.size() == labels.size());
  for (size_t i = 0; i < labels.size(); ++i) CHECK(out.labels[i] == labels[i]);

  Rng zero_rng(11);
  const AugmentedSample zero = apply_dropout(img, labels, 0.0, zero_rng);
  CHECK(zero.image == img);
}

TEST_CASE("laplacian map worked cases") {
  SUBCASE("constant image is all zeros") {
    DepthImage img(16, 16);
    for (auto& p : img.pixels) p = 0.8f;
    const Eigen::MatrixXf lap = laplacian_map(img);
    CHECK(lap.cwiseAbs().maxCoeff() == 0.0f);
  }
  SUBCASE("single-pixel step of 0.1 m reads 0.4 at the center") {
    DepthImage img(9, 9);
    for (auto& p : img.pixels) p = 0.5f;
    img.at(4, 4) = 0.6f;
    const Eigen::MatrixXf lap = laplacian_map(img);
    CHECK(lap(4, 4) == doctest::Approx(0.4).epsilon(1e-5));
  }
  SUBCASE("linear ramp has zero interior response") {
    DepthImage img(12, 12);
    for (int r = 0; r < 12; ++r)
      for (int c = 0; c < 12; ++c) img.at(r, c) = 0.5f + 0.01f * c + 0.02f * r;
    const Eigen::MatrixXf lap = laplacian_map(img);
    for (int r = 1; r < 11; ++r)
      for (int c = 1; c < 11; ++c) CHECK(lap(r, c) <= 1e-5f);
  }
  SUBCASE("invalid pixels output zero") {
    DepthImage img(8, 8);
    for (auto& p : img.pixels) p = 0.5f;
    img.at(3, 3) = 0.0f;
    const Eigen::MatrixXf lap = laplacian_map(img);
    CHECK(lap(3, 3) == 0.0f);
  }
}

TEST_CASE("canny finds the silhouette of a square object") {
  DepthImage img(64, 64);
  for (int r = 20; r < 44; ++r)
    for (int c = 20; c < 44; ++c) img.at(r, c) = 0.6f;
  const auto edges = canny_edges(img, 0.05, 0.15);

  // Boundary = valid pixels with an invalid 4-neighbor.
  auto is_boundary = [&](int r, int c) {
    if (!img.valid(r, c)) return false;
    for (auto [dr, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int rr = r + dr, cc = c + dc;
      if (!img.in_bounds(rr, cc) || !img.valid(rr, cc)) return true;
    }
    return false;
  };
  int edge_count = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      if (!edges(r, c)) continue;
      ++edge_count;
      bool near = false;
      for (int dr = -2; dr <= 2 && !near; ++dr)
        for (int dc = -2; dc <= 2 && !near; ++dc)
          if (img.in_bounds(r + dr, c + dc) && is_boundary(r + dr, c + dc)) near = true;
      CHECK(near);
    }
  CHECK(edge_count >= 40);  // the silhouette is actually detected

  DepthImage constant(32, 32);
  for (auto& p : constant.pixels) p = 0.7f;
  CHECK(canny_edges(constant, 0.01, 0.02).cast<int>().sum() == 0);
}

TEST_CASE("raising the low threshold never grows the canny edge set") {
  // Mixed scene: two plateaus, a ramp, and a disk, so edges exist at
  // several gradient strengths.
  DepthImage img(80, 80);
  for (int r = 0; r < 80; ++r)
    for (int c = 0; c < 80; ++c) {
      if (c < 30)
        img.at(r, c) = 0.5f;
      else if (c < 50)
        img.at(r, c) = 0.5f + 0.004f * (c - 30);
      else
        img.at(r, c) = 0.9f;
      if (std::hypot(r - 25, c - 60) < 9) img.at(r, c) = 0.45f;
    }
  const double high = 0.4;
  auto previous = canny_edges(img, 0.005, high);
  for (double low : {0.02, 0.08, 0.2, 0.4}) {
    const auto current = canny_edges(img, low, high);
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        if (current(r, c)) CHECK(previous(r, c));
    previous = current;
  }
}

TEST_CASE("sim-to-real leaves labels untouched and only removes pixels") {
  DepthImage img = random_scene(12);
  Rng lrng(13);
  const auto labels = sample_labels(lrng, 6, img.width);

  SUBCASE("identity strength is a no-op") {
    AugmentOp op = AugmentOp::sim_to_real_op(std::numeric_limits<double>::infinity(), 0.0);
    Rng rng(14);
    const AugmentedSample out = sim_to_real(img, labels, op, rng);
    CHECK(out.image == img);
  }
  SUBCASE("labels are bitwise identical, validity never grows") {
    AugmentOp op = AugmentOp::sim_to_real_op(0.005, 0.003);
    Rng rng(15);
    const AugmentedSample out = sim_to_real(img, labels, op, rng);
    REQUIRE(out.labels.size() == labels.size());
    for (size_t i = 0; i < labels.size(); ++i) CHECK(out.labels[i] == labels[i]);
    for (size_t i = 0; i < img.pixels.size(); ++i)
      if (img.pixels[i] == 0.0f) CHECK(out.image.pixels[i] == 0.0f);
  }
  SUBCASE("lowering the paint threshold paints at least as much on average") {
    double painted_high = 0.0, painted_low = 0.0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
      AugmentOp strong = AugmentOp::sim_to_real_op(0.002, 0.0);
      AugmentOp weak = AugmentOp::sim_to_real_op(0.05, 0.0);
      Rng r1(seed), r2(seed);
      painted_low += img.valid_count() - sim_to_real(img, labels, strong, r1).image.valid_count();
      painted_high += img.valid_count() - sim_to_real(img, labels, weak, r2).image.valid_count();
    }
    CHECK(painted_low >= painted_high);
  }
}

TEST_CASE("pipeline pair sampling") {
  std::vector<AugmentOp> family;
  family.push_back(AugmentOp::rotate(90.0, 0.5));
  family.push_back(AugmentOp::flip(FlipAxis::horizontal, 0.25));
  family.push_back(AugmentOp::sim_to_real_op(0.01, 0.002, 0.8));

  SUBCASE("zero probabilities leave only the identity sim-to-real tail") {
    std::vector<AugmentOp> silent;
    silent.push_back(AugmentOp::rotate(90.0, 0.0));
    silent.push_back(AugmentOp::sim_to_real_op(0.01, 0.002, 0.0));
    Rng rng(16);
    const auto [t, t_prime] = sample_pair(silent, rng);
    for (const AugmentPipeline* pipe : {&t, &t_prime}) {
      REQUIRE(pipe->ops.size() == 1);
      CHECK(pipe->ops[0].kind == AugmentOp::Kind::sim_to_real);
      CHECK(std::isinf(pipe->ops[0].paint_threshold));
      CHECK(pipe->ops[0].noise_std == 0.0);
    }
  }
  SUBCASE("deterministic per seed") {
    Rng a(17), b(17);
    const auto [ta, tpa] = sample_pair(family, a);
    const auto [tb, tpb] = sample_pair(family, b);
    CHECK(ta.ops.size() == tb.ops.size());
    CHECK(tpa.ops.size() == tpb.ops.size());
  }
  SUBCASE("inclusion frequency approaches the execution probability") {
    Rng rng(18);
    int included = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      const auto [t, t_prime] = sample_pair(family, rng);
      for (const auto& op : t.ops)
        if (op.kind == AugmentOp::Kind::rotate) ++included;
    }
    CHECK(std::abs(included / static_cast<double>(draws) - 0.5) <= 0.015);
  }
  SUBCASE("sim-to-real is always last") {
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
      const auto [t, t_prime] = sample_pair(family, rng);
      CHECK(t.ops.back().kind == AugmentOp::Kind::sim_to_real);
      CHECK(t_prime.ops.back().kind == AugmentOp::Kind::sim_to_real);
    }
  }
}
