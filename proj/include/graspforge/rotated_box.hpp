#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

#include "graspforge/projection.hpp"
#include "graspforge/rng.hpp"

namespace gf {

// Oriented rectangle in the image plane. theta (degrees, [-90, 90)) rotates
// the w-axis from the +v direction, matching the grasp label convention;
// (w, h, theta) and (h, w, theta +- 90) describe the same point set.
struct RotatedBox {
  double x = 0.0, y = 0.0;
  double w = 1.0, h = 1.0;
  double theta = 0.0;

  std::array<Eigen::Vector2d, 4> corners() const;
  double area() const { return w * h; }

  static RotatedBox from_grasp(const ImageGrasp& g);
};

// Fold theta into [-90, 90), swapping w/h per quarter turn.
RotatedBox normalize_box(RotatedBox b);

struct AnchorSet {
  std::vector<RotatedBox> boxes;
  int feat_h = 0, feat_w = 0;
  double stride = 1.0;
  std::vector<double> scales, ratios, angles;
  int per_cell() const { return static_cast<int>(scales.size() * ratios.size() * angles.size()); }
};

struct MatchAssignment {
  // Per anchor: matched gt index, or -1 (negative), or -2 (ignore).
  std::vector<int> labels;
  int positives = 0, negatives = 0, ignores = 0;
};

struct BoxDelta {
  double dx = 0.0, dy = 0.0;  // offsets normalized by anchor size
  double dw = 0.0, dh = 0.0;  // log scale ratios
  double dtheta = 0.0;        // degrees difference / 90
};

// Exact IoU of two rotated rectangles via Sutherland-Hodgman clipping.
double skew_iou(const RotatedBox& a, const RotatedBox& b);

// |scales| * |ratios| * |angles| anchors per cell, centered on the stride
// grid; anchor area = scale^2 with w/h = ratio.
AnchorSet generate_anchors(int feat_h, int feat_w, double stride,
                           const std::vector<double>& scales, const std::vector<double>& ratios,
                           const std::vector<double>& angles);

// An anchor is negative when its best IoU < neg_thresh, positive when
// >= pos_thresh (matched to a uniform draw among its top-k gts that clear
// pos_thresh) and ignored in between.
MatchAssignment match_topk(const AnchorSet& anchors, const std::vector<RotatedBox>& gts,
                           double pos_thresh, double neg_thresh, int k, Rng& rng);

// Regression targets; gt is canonicalized to the theta representation
// closest to the anchor before differencing.
BoxDelta encode_targets(const RotatedBox& anchor, const RotatedBox& gt);
RotatedBox decode_box(const RotatedBox& anchor, const BoxDelta& d);

// Greedy descending-score suppression; kept boxes have pairwise IoU < thresh.
std::vector<int> rotated_nms(const std::vector<RotatedBox>& boxes,
                             const std::vector<double>& scores, double iou_thresh);

// Dense feature map (height x width x channels, row-major).
struct FeatureGrid {
  int height = 0, width = 0, channels = 0;
  std::vector<double> data;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int c)
      : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, 0.0) {}
  double& at(int row, int col, int ch) {
    return data[(static_cast<size_t>(row) * width + col) * channels + ch];
  }
  double at(int row, int col, int ch) const {
    return data[(static_cast<size_t>(row) * width + col) * channels + ch];
  }
};

// Bilinear sampling of an out_h x out_w lattice spanning the rotated box.
FeatureGrid rrpool(const FeatureGrid& feature, const RotatedBox& box, int out_h, int out_w);

}  // namespace gf
