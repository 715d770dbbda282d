#include "graspforge/augment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "graspforge/errors.hpp"

namespace gf {

namespace {

constexpr double kRad2Deg = 57.295779513082320876798154814105;
constexpr double kDeg2Rad = 1.0 / kRad2Deg;

// Re-canonicalize a label direction so v2 >= v1 (ties: u2 > u1); a flip of
// the direction swaps the contacts, which flips the gamma sign.
void canonicalize_direction(double& du, double& dv, double& gamma) {
  bool negate;
  if (std::abs(dv) < 1e-12)
    negate = du < 0.0;
  else
    negate = dv < 0.0;
  if (negate) {
    du = -du;
    dv = -dv;
    gamma = -gamma;
  }
}

bool center_in_frame(double x, double y, int width, int height) {
  return x >= 0.0 && x <= width - 1.0 && y >= 0.0 && y <= height - 1.0;
}

}  // namespace

AugmentOp AugmentOp::rotate(double angle_deg, double prob) {
  AugmentOp op;
  op.kind = Kind::rotate;
  op.angle_deg = angle_deg;
  op.exec_probability = prob;
  return op;
}

AugmentOp AugmentOp::flip(FlipAxis axis, double prob) {
  AugmentOp op;
  op.kind = Kind::flip;
  op.axis = axis;
  op.exec_probability = prob;
  return op;
}

AugmentOp AugmentOp::dropout(double fraction, double prob) {
  AugmentOp op;
  op.kind = Kind::dropout;
  op.fraction = fraction;
  op.exec_probability = prob;
  return op;
}

AugmentOp AugmentOp::sim_to_real_op(double paint_threshold, double noise_std, double prob) {
  AugmentOp op;
  op.kind = Kind::sim_to_real;
  op.paint_threshold = paint_threshold;
  op.noise_std = noise_std;
  op.exec_probability = prob;
  return op;
}

AugmentedSample apply_rotate(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                             double angle_deg) {
  const double mod = std::fmod(std::fmod(angle_deg, 360.0) + 360.0, 360.0);
  if (mod == 0.0) {
    AugmentedSample out;
    out.image = img;
    out.labels = labels;
    return out;
  }
  const double alpha = angle_deg * kDeg2Rad;
  const double ca = std::cos(alpha), sa = std::sin(alpha);

  // Exact quarter turns swap the output dimensions.
  const bool quarter = std::abs(mod - 90.0) < 1e-9 || std::abs(mod - 270.0) < 1e-9;
  const int out_w = quarter ? img.height : img.width;
  const int out_h = quarter ? img.width : img.height;

  const double cx_in = (img.width - 1) / 2.0, cy_in = (img.height - 1) / 2.0;
  const double cx_out = (out_w - 1) / 2.0, cy_out = (out_h - 1) / 2.0;

  AugmentedSample out;
  out.image = DepthImage(out_w, out_h);
  for (int row = 0; row < out_h; ++row) {
    for (int col = 0; col < out_w; ++col) {
      // Inverse map into the source image, nearest neighbor.
      const double dx = col - cx_out, dy = row - cy_out;
      const double su = ca * dx + sa * dy + cx_in;
      const double sv = -sa * dx + ca * dy + cy_in;
      const int sc = static_cast<int>(std::lround(su));
      const int sr = static_cast<int>(std::lround(sv));
      if (img.in_bounds(sr, sc)) out.image.at(row, col) = img.at(sr, sc);
    }
  }

  for (const ImageGrasp& g : labels) {
    const double dx = g.x - cx_in, dy = g.y - cy_in;
    ImageGrasp t = g;
    t.x = ca * dx - sa * dy + cx_out;
    t.y = sa * dx + ca * dy + cy_out;
    const double theta = g.theta * kDeg2Rad;
    double du = g.w * std::sin(theta), dv = g.w * std::cos(theta);
    const double ru = ca * du - sa * dv;
    const double rv = sa * du + ca * dv;
    du = ru;
    dv = rv;
    canonicalize_direction(du, dv, t.gamma);
    t.theta = std::atan2(du, dv) * kRad2Deg;
    if (center_in_frame(t.x, t.y, out_w, out_h)) out.labels.push_back(t);
  }
  return out;
}

AugmentedSample apply_flip(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                           FlipAxis axis) {
  AugmentedSample out;
  out.image = DepthImage(img.width, img.height);
  for (int row = 0; row < img.height; ++row)
    for (int col = 0; col < img.width; ++col)
      out.image.at(row, col) = axis == FlipAxis::horizontal
                                   ? img.at(row, img.width - 1 - col)
                                   : img.at(img.height - 1 - row, col);

  for (const ImageGrasp& g : labels) {
    ImageGrasp t = g;
    const double theta = g.theta * kDeg2Rad;
    double du = g.w * std::sin(theta), dv = g.w * std::cos(theta);
    if (axis == FlipAxis::horizontal) {
      t.x = img.width - 1.0 - g.x;
      du = -du;
    } else {
      t.y = img.height - 1.0 - g.y;
      dv = -dv;
    }
    canonicalize_direction(du, dv, t.gamma);
    t.theta = std::atan2(du, dv) * kRad2Deg;
    out.labels.push_back(t);
  }
  return out;
}

AugmentedSample apply_dropout(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                              double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw Error(ErrorKind::config, "dropout fraction must be in [0, 1)");
  AugmentedSample out;
  out.image = img;
  out.labels = labels;
  if (fraction == 0.0) return out;

  std::vector<size_t> valid;
  for (size_t i = 0; i < img.pixels.size(); ++i)
    if (img.pixels[i] > 0.0f) valid.push_back(i);
  const size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(valid.size())));

  // Partial Fisher-Yates: the first k entries become the dropped set.
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_int(valid.size() - i));
    std::swap(valid[i], valid[j]);
    out.image.pixels[valid[i]] = 0.0f;
  }
  return out;
}

Eigen::MatrixXf laplacian_map(const DepthImage& img) {
  Eigen::MatrixXf out = Eigen::MatrixXf::Zero(img.height, img.width);
  auto value = [&](int row, int col) -> float {
    row = std::clamp(row, 0, img.height - 1);  // replicate border
    col = std::clamp(col, 0, img.width - 1);
    const float z = img.at(row, col);
    return z > 0.0f ? z : 0.0f;
  };
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      if (!img.valid(row, col)) continue;
      const float lap = value(row - 1, col) + value(row + 1, col) + value(row, col - 1) +
                        value(row, col + 1) - 4.0f * value(row, col);
      out(row, col) = std::abs(lap);
    }
  }
  return out;
}

Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> canny_edges(const DepthImage& img,
                                                                   double low, double high) {
  if (low > high) throw Error(ErrorKind::config, "canny: low threshold exceeds high");
  const int h = img.height, w = img.width;
  using ByteGrid = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
  ByteGrid edges = ByteGrid::Zero(h, w);
  if (h < 3 || w < 3) return edges;

  // Gaussian sigma = 1, radius 3, separable, replicate border.
  double kernel[7];
  double ksum = 0.0;
  for (int i = -3; i <= 3; ++i) ksum += kernel[i + 3] = std::exp(-0.5 * i * i);
  for (double& k : kernel) k /= ksum;

  Eigen::MatrixXd tmp(h, w), smooth(h, w);
  auto raw = [&](int row, int col) {
    const float z = img.at(std::clamp(row, 0, h - 1), std::clamp(col, 0, w - 1));
    return z > 0.0f ? static_cast<double>(z) : 0.0;
  };
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      double acc = 0.0;
      for (int i = -3; i <= 3; ++i) acc += kernel[i + 3] * raw(row, col + i);
      tmp(row, col) = acc;
    }
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      double acc = 0.0;
      for (int i = -3; i <= 3; ++i)
        acc += kernel[i + 3] * tmp(std::clamp(row + i, 0, h - 1), col);
      smooth(row, col) = acc;
    }

  // Sobel gradients.
  Eigen::MatrixXd mag = Eigen::MatrixXd::Zero(h, w), dir = Eigen::MatrixXd::Zero(h, w);
  for (int row = 1; row < h - 1; ++row) {
    for (int col = 1; col < w - 1; ++col) {
      const double gx = smooth(row - 1, col + 1) + 2 * smooth(row, col + 1) +
                        smooth(row + 1, col + 1) - smooth(row - 1, col - 1) -
                        2 * smooth(row, col - 1) - smooth(row + 1, col - 1);
      const double gy = smooth(row + 1, col - 1) + 2 * smooth(row + 1, col) +
                        smooth(row + 1, col + 1) - smooth(row - 1, col - 1) -
                        2 * smooth(row - 1, col) - smooth(row - 1, col + 1);
      mag(row, col) = std::hypot(gx, gy);
      dir(row, col) = std::atan2(gy, gx);
    }
  }

  // Non-maximum suppression along the quantized gradient direction.
  Eigen::MatrixXd thin = Eigen::MatrixXd::Zero(h, w);
  for (int row = 1; row < h - 1; ++row) {
    for (int col = 1; col < w - 1; ++col) {
      if (mag(row, col) <= 0.0) continue;
      double angle = dir(row, col) * kRad2Deg;
      if (angle < 0.0) angle += 180.0;
      int dr, dc;
      if (angle < 22.5 || angle >= 157.5) {
        dr = 0; dc = 1;
      } else if (angle < 67.5) {
        dr = 1; dc = 1;
      } else if (angle < 112.5) {
        dr = 1; dc = 0;
      } else {
        dr = 1; dc = -1;
      }
      const double m = mag(row, col);
      if (m >= mag(row + dr, col + dc) && m >= mag(row - dr, col - dc)) thin(row, col) = m;
    }
  }

  // Hysteresis: BFS from strong pixels through weak ones, 8-connected.
  std::deque<std::pair<int, int>> queue;
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col)
      if (thin(row, col) >= high) {
        edges(row, col) = 1;
        queue.emplace_back(row, col);
      }
  while (!queue.empty()) {
    const auto [row, col] = queue.front();
    queue.pop_front();
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int r = row + dr, c = col + dc;
        if (r < 0 || r >= h || c < 0 || c >= w || edges(r, c)) continue;
        if (thin(r, c) >= low) {
          edges(r, c) = 1;
          queue.emplace_back(r, c);
        }
      }
  }
  return edges;
}

AugmentedSample sim_to_real(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                            const AugmentOp& op, Rng& rng) {
  if (op.noise_std < 0.0) throw Error(ErrorKind::config, "noise std must be >= 0");
  AugmentedSample out;
  out.image = img;
  out.labels = labels;  // sim-to-real never changes the ground truth

  const bool paints = std::isfinite(op.paint_threshold);
  if (paints) {
    const Eigen::MatrixXf lap = laplacian_map(img);
    const auto edges = canny_edges(img, op.canny_low, op.canny_high);
    for (int row = 0; row < img.height; ++row)
      for (int col = 0; col < img.width; ++col) {
        if (!out.image.valid(row, col)) continue;
        if (lap(row, col) > op.paint_threshold || edges(row, col))
          if (rng.bernoulli(op.paint_prob)) out.image.at(row, col) = 0.0f;
      }
  }
  if (op.noise_std > 0.0) {
    for (float& z : out.image.pixels)
      if (z > 0.0f)
        z = std::max(z + static_cast<float>(rng.gaussian(0.0, op.noise_std)), 1e-4f);
  }
  return out;
}

AugmentedSample apply_op(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                         const AugmentOp& op, Rng& rng) {
  switch (op.kind) {
    case AugmentOp::Kind::rotate: return apply_rotate(img, labels, op.angle_deg);
    case AugmentOp::Kind::flip: return apply_flip(img, labels, op.axis);
    case AugmentOp::Kind::dropout: return apply_dropout(img, labels, op.fraction, rng);
    case AugmentOp::Kind::sim_to_real: return sim_to_real(img, labels, op, rng);
  }
  throw Error(ErrorKind::config, "unknown augment op");
}

AugmentedSample apply_pipeline(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                               const AugmentPipeline& pipeline, Rng& rng) {
  AugmentedSample sample;
  sample.image = img;
  sample.labels = labels;
  for (const AugmentOp& op : pipeline.ops) {
    AugmentedSample next = apply_op(sample.image, sample.labels, op, rng);
    sample.image = std::move(next.image);
    sample.labels = std::move(next.labels);
    sample.applied_ops.push_back(op);
  }
  return sample;
}

std::pair<AugmentPipeline, AugmentPipeline> sample_pair(const std::vector<AugmentOp>& family,
                                                        Rng& rng) {
  if (family.empty()) throw Error(ErrorKind::config, "empty augmentation family");
  auto draw = [&]() {
    AugmentPipeline pipe;
    AugmentOp tail = AugmentOp::sim_to_real_op(std::numeric_limits<double>::infinity(), 0.0);
    for (const AugmentOp& op : family) {
      const bool execute = rng.bernoulli(op.exec_probability);
      if (op.kind == AugmentOp::Kind::sim_to_real) {
        if (execute) tail = op;  // identity-strength otherwise
      } else if (execute) {
        pipe.ops.push_back(op);
      }
    }
    pipe.ops.push_back(tail);
    return pipe;
  };
  AugmentPipeline t = draw();
  AugmentPipeline t_prime = draw();
  return {t, t_prime};
}

}  // namespace gf
