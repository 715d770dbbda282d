#include "graspforge/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "graspforge/depth_io.hpp"
#include "graspforge/errors.hpp"
#include "graspforge/mesh.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace gf {

namespace {

std::vector<AugmentOp> default_family() {
  std::vector<AugmentOp> family;
  family.push_back(AugmentOp::rotate(90.0, 0.25));
  family.push_back(AugmentOp::rotate(180.0, 0.25));
  family.push_back(AugmentOp::rotate(270.0, 0.25));
  family.push_back(AugmentOp::flip(FlipAxis::horizontal, 0.5));
  family.push_back(AugmentOp::flip(FlipAxis::vertical, 0.5));
  family.push_back(AugmentOp::dropout(0.05, 0.3));
  AugmentOp s2r = AugmentOp::sim_to_real_op(0.01, 0.003, 1.0);
  family.push_back(s2r);
  return family;
}

}  // namespace

RunConfig default_config() {
  RunConfig config;
  config.family = default_family();
  config.train.family = config.family;
  return config;
}

namespace {

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw Error(ErrorKind::config,
                      "config line " + std::to_string(line_no) + ": expected key = value");
        continue;
      }
      values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    seen_.insert(key);
    try {
      return std::stod(values_.at(key));
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, "config key '" + key + "' is not a number");
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    seen_.insert(key);
    const std::string& v = values_.at(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error(ErrorKind::config, "config key '" + key + "' must be true or false");
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    seen_.insert(key);
    std::string v = values_.at(key);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    return v;
  }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    seen_.insert(key);
    std::vector<double> out;
    std::istringstream ss(values_.at(key));
    std::string token;
    while (std::getline(ss, token, ',')) {
      try {
        out.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw Error(ErrorKind::config, "config key '" + key + "' has a non-numeric entry");
      }
    }
    if (out.empty()) throw Error(ErrorKind::config, "config key '" + key + "' is empty");
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!seen_.count(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> seen_;
};

std::vector<AugmentOp> family_from_config(ConfigReader& reader) {
  std::vector<AugmentOp> family;
  auto add_rotate = [&](const std::string& name, double angle, double default_prob) {
    const double prob = reader.number("augment." + name + ".prob", default_prob);
    if (prob > 0.0) family.push_back(AugmentOp::rotate(angle, prob));
  };
  add_rotate("rotate90", 90.0, 0.25);
  add_rotate("rotate180", 180.0, 0.25);
  add_rotate("rotate270", 270.0, 0.25);
  // Arbitrary-angle rotation is opt-in; right-angle rotations stay lossless.
  const double any_prob = reader.number("augment.rotate_any.prob", 0.0);
  const double any_angle = reader.number("augment.rotate_any.angle", 0.0);
  if (any_prob > 0.0) family.push_back(AugmentOp::rotate(any_angle, any_prob));

  const double flip_h = reader.number("augment.flip_h.prob", 0.5);
  if (flip_h > 0.0) family.push_back(AugmentOp::flip(FlipAxis::horizontal, flip_h));
  const double flip_v = reader.number("augment.flip_v.prob", 0.5);
  if (flip_v > 0.0) family.push_back(AugmentOp::flip(FlipAxis::vertical, flip_v));

  const double drop_prob = reader.number("augment.dropout.prob", 0.3);
  const double drop_fraction = reader.number("augment.dropout.fraction", 0.05);
  if (drop_prob > 0.0) family.push_back(AugmentOp::dropout(drop_fraction, drop_prob));

  AugmentOp s2r = AugmentOp::sim_to_real_op(reader.number("augment.sim2real.paint_threshold", 0.01),
                                            reader.number("augment.sim2real.noise_std", 0.003),
                                            reader.number("augment.sim2real.prob", 1.0));
  s2r.paint_prob = reader.number("augment.sim2real.paint_prob", 0.5);
  s2r.canny_low = reader.number("augment.sim2real.canny_low", 0.05);
  s2r.canny_high = reader.number("augment.sim2real.canny_high", 0.15);
  family.push_back(s2r);
  return family;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  ConfigReader reader(text);
  RunConfig c;

  c.camera.width = static_cast<int>(reader.number("image.width", 224));
  c.camera.height = static_cast<int>(reader.number("image.height", 224));
  c.camera.fx = reader.number("camera.fx", 200.0);
  c.camera.fy = reader.number("camera.fy", 200.0);
  c.camera.cx = reader.number("camera.cx", c.camera.width / 2.0);
  c.camera.cy = reader.number("camera.cy", c.camera.height / 2.0);
  c.camera.check();

  c.grasp_count = static_cast<int>(reader.number("grasps.count", 100));
  c.views_per_object = static_cast<int>(reader.number("views.count", 20));
  c.top_fraction = reader.number("labels.top_fraction", 0.2);
  c.max_tilt_deg = reader.number("labels.max_tilt", 30.0);
  c.gamma_pixel_w = reader.boolean("labels.gamma_pixel_w", false);

  c.gripper.max_width = reader.number("gripper.max_width", 0.085);
  c.gripper.jaw_length = reader.number("gripper.jaw_length", 0.06);
  c.gripper.finger_thickness = reader.number("gripper.finger_thickness", 0.01);
  c.gripper.friction_mu = reader.number("grasps.mu", 0.5);
  c.gripper.check();

  c.sigma_c = reader.number("grasps.sigma_c", 0.0025);
  c.quality_trials = static_cast<int>(reader.number("grasps.trials", 100));
  c.cone_jitter = reader.number("grasps.cone_jitter", 0.0);

  c.mesh_scale = reader.number("mesh.scale", 1.0);
  c.depth_format = reader.text("depth.format", "png");
  if (c.depth_format != "png" && c.depth_format != "gfdi")
    throw Error(ErrorKind::config, "depth.format must be png or gfdi");

  c.family = family_from_config(reader);

  c.match_pos_thresh = reader.number("match.pos_thresh", 0.7);
  c.match_neg_thresh = reader.number("match.neg_thresh", 0.3);
  c.match_k = static_cast<int>(reader.number("match.k", 3));
  c.anchor_stride = reader.number("match.stride", 16.0);
  c.anchor_scales = reader.list("match.scales", {16.0, 32.0, 64.0});
  c.anchor_ratios = reader.list("match.ratios", {0.5, 2.0});
  c.anchor_angles = reader.list("match.angles", {-75.0, -45.0, -15.0, 15.0, 45.0, 75.0});

  c.loss_weights.lambda_box = {reader.number("loss.lambda_x", 5.0),
                               reader.number("loss.lambda_y", 5.0),
                               reader.number("loss.lambda_theta", 5.0),
                               reader.number("loss.lambda_w", 1.0),
                               reader.number("loss.lambda_h", 1.0)};
  c.loss_weights.lambda_gamma = reader.number("loss.lambda_gamma", 1.0);
  c.loss_weights.lambda_z = reader.number("loss.lambda_z", 1.0);
  c.loss_weights.stage_switch_epoch = static_cast<int>(reader.number("loss.stage_switch", 20));

  c.collision_trunc = reader.number("collision.trunc", 0.1);
  c.collision_grid_step = reader.number("collision.grid_step", 5.0);
  c.collision_point_spacing = reader.number("collision.point_spacing", 0.005);

  c.train.epochs = static_cast<int>(reader.number("train.epochs", 50));
  c.train.batch = static_cast<int>(reader.number("train.batch", 16));
  c.train.lr = reader.number("train.lr", 0.05);
  c.train.tau = reader.number("train.tau", 0.07);
  c.train.momentum = reader.number("train.momentum", 0.999);
  c.train.input_side = static_cast<int>(reader.number("train.input_side", 28));
  c.train.hidden = static_cast<int>(reader.number("train.hidden", 64));
  c.train.feature_dim = static_cast<int>(reader.number("train.feature_dim", 32));
  c.train.proj_dim = static_cast<int>(reader.number("train.proj_dim", 16));
  c.train.init_scale = reader.number("train.init_scale", 1.0);
  c.train.family = c.family;

  c.seed = static_cast<uint64_t>(reader.number("seed", 0));
  c.train.seed = c.seed;

  reader.reject_unknown();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::io, "cannot open config file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

DepthImage make_synthetic_depth(uint64_t seed, int width, int height) {
  Rng rng(Rng::derive(seed, 0x5ce9e));
  DepthImage img(width, height);
  const int shapes = 1 + static_cast<int>(rng.uniform_int(3));
  for (int s = 0; s < shapes; ++s) {
    const double depth = rng.uniform(0.4, 0.9);
    const double slope_u = rng.uniform(-0.002, 0.002);
    const double slope_v = rng.uniform(-0.002, 0.002);
    const double cu = rng.uniform(0.2, 0.8) * width;
    const double cv = rng.uniform(0.2, 0.8) * height;
    if (rng.bernoulli(0.5)) {
      const double hw = rng.uniform(0.08, 0.25) * width;
      const double hh = rng.uniform(0.08, 0.25) * height;
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
          if (std::abs(c - cu) <= hw && std::abs(r - cv) <= hh) {
            const float z = static_cast<float>(depth + slope_u * (c - cu) + slope_v * (r - cv));
            float& cell = img.at(r, c);
            if (cell == 0.0f || z < cell) cell = z;
          }
    } else {
      const double radius = rng.uniform(0.08, 0.22) * std::min(width, height);
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
          if (std::hypot(c - cu, r - cv) <= radius) {
            const float z = static_cast<float>(depth + slope_u * (c - cu) + slope_v * (r - cv));
            float& cell = img.at(r, c);
            if (cell == 0.0f || z < cell) cell = z;
          }
    }
  }
  return img;
}

namespace {

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json pose_json(const CameraPose& pose) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rotation.push_back(pose.rotation(r, c));
  return json{{"rotation", rotation}, {"translation", vec3_json(pose.translation)}};
}

CameraPose pose_from_json(const json& j) {
  CameraPose pose;
  const auto& r = j.at("rotation");
  for (int i = 0; i < 9; ++i) pose.rotation(i / 3, i % 3) = r.at(i).get<double>();
  const auto& t = j.at("translation");
  pose.translation = Eigen::Vector3d(t.at(0), t.at(1), t.at(2));
  return pose;
}

json grasp_record(const ContactPair& pair, const ImageGrasp& label, double score, bool positive,
                  int grasp3d_index) {
  return json{{"index3d", grasp3d_index},
              {"c1", vec3_json(pair.c1)},
              {"c2", vec3_json(pair.c2)},
              {"x", label.x},
              {"y", label.y},
              {"theta", label.theta},
              {"gamma", label.gamma},
              {"z", label.z},
              {"w", label.w},
              {"h", label.h},
              {"score", score},
              {"positive", positive}};
}

struct ObjectResult {
  json record;
  int views = 0;
  int labeled = 0;
  bool ok = false;
};

ObjectResult process_object(const fs::path& mesh_path, int obj_index, const RunConfig& config,
                            const fs::path& out_dir) {
  ObjectResult result;
  const uint64_t obj_seed = Rng::derive(config.seed, 1000 + static_cast<uint64_t>(obj_index));
  json record{{"mesh", mesh_path.filename().string()}, {"seed", obj_seed}};

  TriangleMesh mesh;
  try {
    mesh = load_mesh(mesh_path.string(), config.mesh_scale);
  } catch (const Error& e) {
    record["warning"] = std::string("skipped: ") + e.what();
    record["views"] = json::array();
    result.record = std::move(record);
    result.ok = true;
    return result;
  }

  // Center at the bounding-ball center; the manifest records the transform.
  BoundingBall ball = bounding_ball(mesh);
  mesh.translate(-ball.center);
  record["scale"] = config.mesh_scale;
  record["center_offset"] = vec3_json(-ball.center);
  ball.center.setZero();
  record["bounding_radius"] = ball.radius;

  Rng grasp_rng(Rng::derive(obj_seed, 1));
  AntipodalOptions aopts;
  aopts.cone_jitter = config.cone_jitter;
  const std::vector<ContactPair> pairs =
      sample_antipodal(mesh, config.gripper, config.grasp_count, grasp_rng, aopts);

  std::vector<double> scores(pairs.size());
  for (size_t gi = 0; gi < pairs.size(); ++gi) {
    Rng quality_rng(Rng::derive(obj_seed, 100000 + gi));
    scores[gi] = robust_force_closure(pairs[gi], mesh, config.gripper.friction_mu, config.sigma_c,
                                      config.quality_trials, quality_rng)
                     .score;
  }

  Rng view_rng(Rng::derive(obj_seed, 2));
  std::vector<CameraPose> poses = icosahedron_viewpoints(ball, view_rng);
  if (config.views_per_object < static_cast<int>(poses.size()))
    poses.resize(config.views_per_object);

  char name[64];
  json views = json::array();
  for (size_t v = 0; v < poses.size(); ++v) {
    const DepthImage depth = render_depth(mesh, config.camera, poses[v]);
    std::snprintf(name, sizeof(name), "obj%03d_view%02zu.%s", obj_index, v,
                  config.depth_format.c_str());
    save_depth(depth, (out_dir / name).string());

    // Project every 3D grasp into this view, then tilt-filter and mark the
    // top fraction among the survivors.
    std::vector<int> survivor_index;
    std::vector<ImageGrasp> survivor_label;
    std::vector<double> survivor_score;
    for (size_t gi = 0; gi < pairs.size(); ++gi) {
      ImageGrasp label;
      try {
        label = project_grasp(pairs[gi], config.camera, poses[v], config.projection_options());
      } catch (const Error&) {
        continue;  // behind camera or degenerate in this view
      }
      if (std::abs(label.gamma) > config.max_tilt_deg) continue;
      survivor_index.push_back(static_cast<int>(gi));
      survivor_label.push_back(label);
      survivor_score.push_back(scores[gi]);
    }
    std::vector<bool> positive;
    if (!survivor_score.empty()) positive = label_top_fraction(survivor_score, config.top_fraction);

    json grasps = json::array();
    for (size_t s = 0; s < survivor_label.size(); ++s) {
      grasps.push_back(grasp_record(pairs[survivor_index[s]], survivor_label[s],
                                    survivor_score[s], positive[s], survivor_index[s]));
      if (positive[s]) ++result.labeled;
    }
    views.push_back(json{{"index", v},
                         {"depth_file", name},
                         {"seed", Rng::derive(obj_seed, 2000 + v)},
                         {"pose", pose_json(poses[v])},
                         {"grasps", grasps}});
    ++result.views;
  }
  record["views"] = std::move(views);
  result.record = std::move(record);
  result.ok = true;
  return result;
}

}  // namespace

GenerateResult generate_dataset(const std::string& object_dir, const RunConfig& config,
                                const std::string& out_dir, int jobs) {
  std::vector<fs::path> meshes;
  for (const auto& entry : fs::directory_iterator(object_dir)) {
    const std::string ext = entry.path().extension().string();
    if (ext == ".obj" || ext == ".off" || ext == ".OBJ" || ext == ".OFF")
      meshes.push_back(entry.path());
  }
  std::sort(meshes.begin(), meshes.end());
  if (meshes.empty())
    throw Error(ErrorKind::io, "no .obj/.off meshes found in " + object_dir);

  fs::create_directories(out_dir);

  std::vector<ObjectResult> results(meshes.size());
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(meshes.size())));
  if (workers == 1) {
    for (size_t i = 0; i < meshes.size(); ++i)
      results[i] = process_object(meshes[i], static_cast<int>(i), config, out_dir);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < meshes.size(); i = next.fetch_add(1))
          results[i] = process_object(meshes[i], static_cast<int>(i), config, out_dir);
      });
    for (auto& t : pool) t.join();
  }

  json manifest{{"format", "graspforge-dataset"},
                {"version", 1},
                {"seed", config.seed},
                {"camera",
                 {{"fx", config.camera.fx},
                  {"fy", config.camera.fy},
                  {"cx", config.camera.cx},
                  {"cy", config.camera.cy},
                  {"width", config.camera.width},
                  {"height", config.camera.height}}},
                {"config",
                 {{"grasp_count", config.grasp_count},
                  {"views_per_object", config.views_per_object},
                  {"top_fraction", config.top_fraction},
                  {"max_tilt_deg", config.max_tilt_deg},
                  {"gamma_pixel_w", config.gamma_pixel_w},
                  {"depth_format", config.depth_format},
                  {"mesh_scale", config.mesh_scale}}}};

  GenerateResult summary;
  json objects = json::array();
  for (auto& r : results) {
    objects.push_back(std::move(r.record));
    summary.views += r.views;
    summary.labeled_grasps += r.labeled;
    ++summary.objects;
  }
  manifest["objects"] = std::move(objects);

  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  std::ofstream f(manifest_path);
  if (!f) throw Error(ErrorKind::io, "cannot write manifest: " + manifest_path.string());
  f << manifest.dump(2) << "\n";
  summary.manifest_path = manifest_path.string();
  return summary;
}

std::vector<ValidationIssue> validate_manifest(const std::string& manifest_path) {
  std::vector<ValidationIssue> issues;
  std::ifstream f(manifest_path);
  if (!f) {
    issues.push_back({"cannot open manifest: " + manifest_path});
    return issues;
  }
  json manifest;
  try {
    f >> manifest;
  } catch (const std::exception& e) {
    issues.push_back({std::string("manifest is not valid JSON: ") + e.what()});
    return issues;
  }

  const fs::path base = fs::path(manifest_path).parent_path();
  CameraIntrinsics intr;
  double top_fraction = 0.2, max_tilt = 30.0;
  int grasp_count = 100;
  bool gamma_pixel_w = false;
  try {
    const auto& cam = manifest.at("camera");
    intr.fx = cam.at("fx");
    intr.fy = cam.at("fy");
    intr.cx = cam.at("cx");
    intr.cy = cam.at("cy");
    intr.width = cam.at("width");
    intr.height = cam.at("height");
    top_fraction = manifest.at("config").at("top_fraction");
    max_tilt = manifest.at("config").at("max_tilt_deg");
    grasp_count = manifest.at("config").at("grasp_count");
    gamma_pixel_w = manifest.at("config").at("gamma_pixel_w");
  } catch (const std::exception& e) {
    issues.push_back({std::string("manifest missing required fields: ") + e.what()});
    return issues;
  }
  const ProjectionOptions popts{gamma_pixel_w};

  struct RoundTrip {
    ImageGrasp label;
    CameraPose pose;
  };
  std::vector<RoundTrip> round_trip_pool;

  for (const auto& object : manifest.at("objects")) {
    for (const auto& view : object.at("views")) {
      const std::string depth_file = view.at("depth_file");
      if (!fs::exists(base / depth_file))
        issues.push_back({"missing depth file: " + depth_file});

      const CameraPose pose = pose_from_json(view.at("pose"));
      const auto& grasps = view.at("grasps");
      if (static_cast<int>(grasps.size()) > grasp_count)
        issues.push_back({"view " + depth_file + " holds more grasps than the sample count"});

      int positives = 0;
      double min_pos = 2.0, max_neg = -1.0;
      for (const auto& g : grasps) {
        const double gamma = g.at("gamma");
        if (std::abs(gamma) > max_tilt)
          issues.push_back({"label outside the tilt range in " + depth_file});
        const double score = g.at("score");
        if (g.at("positive").get<bool>()) {
          ++positives;
          min_pos = std::min(min_pos, score);
        } else {
          max_neg = std::max(max_neg, score);
        }
        ImageGrasp label;
        label.x = g.at("x");
        label.y = g.at("y");
        label.theta = g.at("theta");
        label.gamma = g.at("gamma");
        label.z = g.at("z");
        label.w = g.at("w");
        label.h = g.at("h");
        round_trip_pool.push_back({label, pose});
      }
      if (!grasps.empty()) {
        const int expected =
            static_cast<int>(std::ceil(top_fraction * static_cast<double>(grasps.size())));
        if (positives != expected)
          issues.push_back({"view " + depth_file + " has " + std::to_string(positives) +
                            " positives, expected " + std::to_string(expected)});
        if (positives > 0 && max_neg > min_pos + 1e-12)
          issues.push_back({"view " + depth_file + " has a negative scoring above a positive"});
      }
    }
  }

  // Label self-consistency on up to 100 grasps: back-project and re-project.
  Rng pick(Rng::derive(manifest.value("seed", 0ULL), 0xa11d));
  const size_t checks = std::min<size_t>(100, round_trip_pool.size());
  for (size_t i = 0; i < checks; ++i) {
    const auto& entry = round_trip_pool[pick.uniform_int(round_trip_pool.size())];
    try {
      const ContactPair pair = back_project(entry.label, intr, entry.pose, popts);
      const ImageGrasp again = project_grasp(pair, intr, entry.pose, popts);
      if (std::abs(again.x - entry.label.x) > 1e-6 || std::abs(again.y - entry.label.y) > 1e-6 ||
          std::abs(again.w - entry.label.w) > 1e-6 ||
          std::abs(again.theta - entry.label.theta) > 0.1 ||
          std::abs(again.gamma - entry.label.gamma) > 0.1 ||
          std::abs(again.z - entry.label.z) > 1e-9)
        issues.push_back({"stored label fails the projection round trip"});
    } catch (const Error& e) {
      issues.push_back({std::string("stored label cannot be re-projected: ") + e.what()});
    }
  }
  return issues;
}

}  // namespace gf
