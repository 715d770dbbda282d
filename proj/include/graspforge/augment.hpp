#pragma once

#include <Eigen/Core>

#include <limits>
#include <vector>

#include "graspforge/depth_image.hpp"
#include "graspforge/projection.hpp"
#include "graspforge/rng.hpp"

namespace gf {

enum class FlipAxis { horizontal, vertical };  // horizontal mirrors left-right

struct AugmentOp {
  enum class Kind { rotate, flip, dropout, sim_to_real };
  Kind kind = Kind::sim_to_real;
  double exec_probability = 1.0;

  double angle_deg = 0.0;                       // rotate
  FlipAxis axis = FlipAxis::horizontal;         // flip
  double fraction = 0.0;                        // dropout
  double paint_threshold = std::numeric_limits<double>::infinity();  // sim-to-real
  double noise_std = 0.0;
  double paint_prob = 0.5;
  double canny_low = 0.05;
  double canny_high = 0.15;

  static AugmentOp rotate(double angle_deg, double prob = 1.0);
  static AugmentOp flip(FlipAxis axis, double prob = 1.0);
  static AugmentOp dropout(double fraction, double prob = 1.0);
  static AugmentOp sim_to_real_op(double paint_threshold, double noise_std, double prob = 1.0);
};

// Ordered spatial ops followed by exactly one sim-to-real op.
struct AugmentPipeline {
  std::vector<AugmentOp> ops;
};

struct AugmentedSample {
  DepthImage image;
  std::vector<ImageGrasp> labels;
  std::vector<AugmentOp> applied_ops;
};

// Rotate about the image center (nearest-neighbor resampling; quarter turns
// are exact). Label centers rotate with the image, theta shifts by -angle and
// wraps into [-90, 90] with the gamma sign following the contact reordering.
// Labels whose centers leave the frame are dropped.
AugmentedSample apply_rotate(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                             double angle_deg);

AugmentedSample apply_flip(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                           FlipAxis axis);

// Invalidate an exact round(fraction * valid) count of valid pixels, sampled
// without replacement. Labels are untouched.
AugmentedSample apply_dropout(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                              double fraction, Rng& rng);

// |4-neighbor Laplacian| per pixel; invalid pixels contribute 0 and output 0.
Eigen::MatrixXf laplacian_map(const DepthImage& img);

// Canny on raw depth values: Gaussian sigma=1, Sobel, non-maximum
// suppression, double-threshold hysteresis (8-connected).
Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> canny_edges(const DepthImage& img,
                                                                   double low, double high);

// Paint high-Laplacian and Canny-edge pixels invalid with probability
// paint_prob, then add zero-mean Gaussian noise to the remaining valid
// pixels. Labels pass through unchanged.
AugmentedSample sim_to_real(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                            const AugmentOp& op, Rng& rng);

AugmentedSample apply_op(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                         const AugmentOp& op, Rng& rng);

AugmentedSample apply_pipeline(const DepthImage& img, const std::vector<ImageGrasp>& labels,
                               const AugmentPipeline& pipeline, Rng& rng);

// Draw two independent pipelines from the family: spatial ops kept in
// declared order per their execution probability, sim-to-real always last
// (identity-strength when not drawn).
std::pair<AugmentPipeline, AugmentPipeline> sample_pair(const std::vector<AugmentOp>& family,
                                                        Rng& rng);

}  // namespace gf
