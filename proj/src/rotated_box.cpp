#include "graspforge/rotated_box.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graspforge/errors.hpp"

namespace gf {

namespace {

constexpr double kDeg2Rad = 0.01745329251994329576923690768489;

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double acc = 0.0;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(acc);
}

// Clip a convex polygon against the half-plane left of edge a->b
// (counter-clockwise clip polygon).
std::vector<Eigen::Vector2d> clip_halfplane(const std::vector<Eigen::Vector2d>& poly,
                                            const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  std::vector<Eigen::Vector2d> out;
  const size_t n = poly.size();
  auto side = [&](const Eigen::Vector2d& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  };
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& cur = poly[i];
    const Eigen::Vector2d& nxt = poly[(i + 1) % n];
    const double sc = side(cur), sn = side(nxt);
    if (sc >= 0.0) out.push_back(cur);
    if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

bool counter_clockwise(const std::array<Eigen::Vector2d, 4>& q) {
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& p = q[i];
    const auto& r = q[(i + 1) % 4];
    acc += p.x() * r.y() - r.x() * p.y();
  }
  return acc > 0.0;
}

}  // namespace

std::array<Eigen::Vector2d, 4> RotatedBox::corners() const {
  const double t = theta * kDeg2Rad;
  const Eigen::Vector2d axis_w(std::sin(t), std::cos(t));
  const Eigen::Vector2d axis_h(std::cos(t), -std::sin(t));
  const Eigen::Vector2d c(x, y);
  const Eigen::Vector2d ew = 0.5 * w * axis_w;
  const Eigen::Vector2d eh = 0.5 * h * axis_h;
  return {c + ew + eh, c + ew - eh, c - ew - eh, c - ew + eh};
}

RotatedBox RotatedBox::from_grasp(const ImageGrasp& g) {
  RotatedBox b{g.x, g.y, g.w, g.h, g.theta};
  return normalize_box(b);
}

RotatedBox normalize_box(RotatedBox b) {
  while (b.theta >= 90.0) {
    b.theta -= 90.0;
    std::swap(b.w, b.h);
  }
  while (b.theta < -90.0) {
    b.theta += 90.0;
    std::swap(b.w, b.h);
  }
  return b;
}

double skew_iou(const RotatedBox& a, const RotatedBox& b) {
  if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0)
    throw Error(ErrorKind::config, "boxes must have positive extent");

  auto ca = a.corners();
  auto cb = b.corners();
  if (!counter_clockwise(cb)) std::reverse(cb.begin(), cb.end());

  std::vector<Eigen::Vector2d> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i)
    poly = clip_halfplane(poly, cb[i], cb[(i + 1) % 4]);

  const double inter = poly.size() >= 3 ? polygon_area(poly) : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

AnchorSet generate_anchors(int feat_h, int feat_w, double stride,
                           const std::vector<double>& scales, const std::vector<double>& ratios,
                           const std::vector<double>& angles) {
  if (scales.empty() || ratios.empty() || angles.empty())
    throw Error(ErrorKind::config, "anchor scales/ratios/angles must be non-empty");
  AnchorSet set;
  set.feat_h = feat_h;
  set.feat_w = feat_w;
  set.stride = stride;
  set.scales = scales;
  set.ratios = ratios;
  set.angles = angles;
  set.boxes.reserve(static_cast<size_t>(feat_h) * feat_w * set.per_cell());
  for (int i = 0; i < feat_h; ++i) {
    for (int j = 0; j < feat_w; ++j) {
      const double cx = (j + 0.5) * stride;
      const double cy = (i + 0.5) * stride;
      for (double s : scales)
        for (double r : ratios)
          for (double ang : angles) {
            // Area s^2 with w/h = r.
            const double w = s * std::sqrt(r);
            const double h = s / std::sqrt(r);
            set.boxes.push_back(normalize_box(RotatedBox{cx, cy, w, h, ang}));
          }
    }
  }
  return set;
}

MatchAssignment match_topk(const AnchorSet& anchors, const std::vector<RotatedBox>& gts,
                           double pos_thresh, double neg_thresh, int k, Rng& rng) {
  if (pos_thresh <= neg_thresh)
    throw Error(ErrorKind::config, "pos_thresh must exceed neg_thresh");
  if (k < 1) throw Error(ErrorKind::config, "k must be >= 1");

  MatchAssignment out;
  out.labels.assign(anchors.boxes.size(), -1);
  if (gts.empty()) {
    out.negatives = static_cast<int>(anchors.boxes.size());
    return out;
  }

  std::vector<double> ious(gts.size());
  std::vector<int> candidates;
  for (size_t ai = 0; ai < anchors.boxes.size(); ++ai) {
    double best = 0.0;
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      ious[gi] = skew_iou(anchors.boxes[ai], gts[gi]);
      best = std::max(best, ious[gi]);
    }
    if (best < neg_thresh) {
      out.labels[ai] = -1;
      ++out.negatives;
      continue;
    }
    if (best < pos_thresh) {
      out.labels[ai] = -2;
      ++out.ignores;
      continue;
    }
    // Top-k gts by IoU (ties by index), restricted to those above pos_thresh.
    candidates.clear();
    for (size_t gi = 0; gi < gts.size(); ++gi)
      if (ious[gi] >= pos_thresh) candidates.push_back(static_cast<int>(gi));
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int p, int q) { return ious[p] > ious[q]; });
    const size_t pool = std::min<size_t>(candidates.size(), static_cast<size_t>(k));
    out.labels[ai] = candidates[rng.uniform_int(pool)];
    ++out.positives;
  }
  return out;
}

BoxDelta encode_targets(const RotatedBox& anchor, const RotatedBox& gt) {
  // Pick the gt representation whose theta is closest to the anchor's.
  RotatedBox g = normalize_box(gt);
  RotatedBox alt{g.x, g.y, g.h, g.w, g.theta >= 0.0 ? g.theta - 90.0 : g.theta + 90.0};
  if (std::abs(alt.theta - anchor.theta) < std::abs(g.theta - anchor.theta)) g = alt;

  BoxDelta d;
  d.dx = (g.x - anchor.x) / anchor.w;
  d.dy = (g.y - anchor.y) / anchor.h;
  d.dw = std::log(g.w / anchor.w);
  d.dh = std::log(g.h / anchor.h);
  d.dtheta = (g.theta - anchor.theta) / 90.0;
  return d;
}

RotatedBox decode_box(const RotatedBox& anchor, const BoxDelta& d) {
  RotatedBox b;
  b.x = anchor.x + d.dx * anchor.w;
  b.y = anchor.y + d.dy * anchor.h;
  b.w = anchor.w * std::exp(d.dw);
  b.h = anchor.h * std::exp(d.dh);
  b.theta = anchor.theta + d.dtheta * 90.0;
  return normalize_box(b);
}

std::vector<int> rotated_nms(const std::vector<RotatedBox>& boxes,
                             const std::vector<double>& scores, double iou_thresh) {
  if (boxes.size() != scores.size())
    throw Error(ErrorKind::shape_mismatch, "boxes/scores length mismatch");
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  std::vector<int> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (int idx : order) {
    if (suppressed[idx]) continue;
    kept.push_back(idx);
    for (int other : order) {
      if (suppressed[other] || other == idx) continue;
      if (skew_iou(boxes[idx], boxes[other]) >= iou_thresh) suppressed[other] = true;
    }
  }
  return kept;
}

FeatureGrid rrpool(const FeatureGrid& feature, const RotatedBox& box, int out_h, int out_w) {
  if (box.x < 0.0 || box.x > feature.width - 1.0 || box.y < 0.0 || box.y > feature.height - 1.0)
    throw Error(ErrorKind::empty_region, "box center outside the feature extent");

  const double t = box.theta * kDeg2Rad;
  const Eigen::Vector2d axis_w(std::sin(t), std::cos(t));
  const Eigen::Vector2d axis_h(std::cos(t), -std::sin(t));

  auto bilinear = [&](double x, double y, int ch) {
    x = std::clamp(x, 0.0, feature.width - 1.0);
    y = std::clamp(y, 0.0, feature.height - 1.0);
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, feature.width - 1);
    const int y1 = std::min(y0 + 1, feature.height - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * feature.at(y0, x0, ch) + fx * feature.at(y0, x1, ch)) +
           fy * ((1 - fx) * feature.at(y1, x0, ch) + fx * feature.at(y1, x1, ch));
  };

  FeatureGrid out(out_h, out_w, feature.channels);
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      // Lattice of cell centers spanning the box.
      const double fw = (j + 0.5) / out_w - 0.5;
      const double fh = (i + 0.5) / out_h - 0.5;
      const Eigen::Vector2d p =
          Eigen::Vector2d(box.x, box.y) + fw * box.w * axis_w + fh * box.h * axis_h;
      for (int ch = 0; ch < feature.channels; ++ch)
        out.at(i, j, ch) = bilinear(p.x(), p.y(), ch);
    }
  }
  return out;
}

}  // namespace gf
