#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "graspforge/augment.hpp"
#include "graspforge/depth_image.hpp"
#include "graspforge/rng.hpp"

namespace gf {

// Per-variable box regression weights (x, y, theta, w, h) plus the tilt/depth
// refinement weights and the (proposal, refinement, contrastive) stage
// schedule keyed by epoch.
struct LossWeights {
  std::array<double, 5> lambda_box = {5.0, 5.0, 5.0, 1.0, 1.0};
  double lambda_gamma = 1.0;
  double lambda_z = 1.0;
  std::array<double, 3> stage_early = {1.0, 1.0, 5.0};
  std::array<double, 3> stage_late = {5.0, 5.0, 2.0};
  int stage_switch_epoch = 20;

  std::array<double, 3> stage_weights(int epoch) const {
    return epoch < stage_switch_epoch ? stage_early : stage_late;
  }
};

double smooth_l1(double x);
double smooth_l1_grad(double x);

// -log s_pos + sum_v lambda_v * smooth_l1(gt_v - pred_v) over (x,y,theta,w,h).
double proposal_loss(double s_pos, const std::array<double, 5>& pred,
                     const std::array<double, 5>& gt, const std::array<double, 5>& lambda);
void proposal_loss_grad(double s_pos, const std::array<double, 5>& pred,
                        const std::array<double, 5>& gt, const std::array<double, 5>& lambda,
                        double& d_s_pos, std::array<double, 5>& d_pred);

double refinement_loss(double gamma_hat, double gamma, double z_hat, double z,
                       double lambda_gamma, double lambda_z);
void refinement_loss_grad(double gamma_hat, double gamma, double z_hat, double z,
                          double lambda_gamma, double lambda_z, double& d_gamma_hat,
                          double& d_z_hat);

// N keys, row 0 is the positive; negatives from the batch (plus an optional
// queue) fill the rest.
struct KeyBank {
  Eigen::MatrixXd keys;  // N x D
};

// InfoNCE: -log( exp(q.k+ / tau) / sum_i exp(q.k_i / tau) ), max-subtracted.
double info_nce(const Eigen::VectorXd& q, const KeyBank& bank, double tau);
double info_nce_with_grad(const Eigen::VectorXd& q, const KeyBank& bank, double tau,
                          Eigen::VectorXd& d_q, Eigen::MatrixXd& d_keys);

double overall_loss(double l_p, double l_r, double l_q, const std::array<double, 3>& stage);

// key <- m * key + (1 - m) * query, elementwise.
Eigen::VectorXd momentum_update(const Eigen::VectorXd& key_params,
                                const Eigen::VectorXd& query_params, double m);

// Stack of affine layers with optional tanh after each; the building block
// for the toy encoder and the projection head.
class DenseStack {
 public:
  DenseStack() = default;
  DenseStack(const std::vector<int>& sizes, const std::vector<bool>& tanh_after);

  void init(Rng& rng, double scale);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // cache[0] = x, cache[i+1] = post-activation output of layer i.
  Eigen::VectorXd forward_cached(const Eigen::VectorXd& x,
                                 std::vector<Eigen::VectorXd>& cache) const;
  // Accumulates parameter gradients into `grads` (same architecture) and
  // returns dL/dx.
  Eigen::VectorXd backward(const std::vector<Eigen::VectorXd>& cache,
                           const Eigen::VectorXd& grad_out, DenseStack& grads) const;

  DenseStack zeros_like() const;
  int param_count() const;
  Eigen::VectorXd flatten() const;
  void set_from_flat(const Eigen::VectorXd& flat);
  void add_scaled(const DenseStack& other, double factor);

  const std::vector<int>& sizes() const { return sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<bool> tanh_after_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// Query-side tower: encoder (two affine+tanh layers, feature dim D) and
// projection head (affine+tanh, affine, L2 normalize).
struct ContrastiveModel {
  DenseStack encoder;
  DenseStack head;

  Eigen::VectorXd features(const Eigen::VectorXd& x) const { return encoder.forward(x); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

// Mean-pool a depth image to side x side and flatten (invalid pixels enter
// as 0; the encoder learns around the sentinel).
Eigen::VectorXd downsample_patch(const DepthImage& img, int side);

struct ToyTrainConfig {
  int epochs = 50;
  int batch = 16;
  double lr = 0.05;
  double tau = 0.07;
  double momentum = 0.999;
  int input_side = 28;
  int hidden = 64;
  int feature_dim = 32;
  int proj_dim = 16;
  double init_scale = 1.0;
  std::vector<AugmentOp> family;
  uint64_t seed = 0;
};

struct ToyTrainResult {
  std::vector<double> epoch_loss;
  ContrastiveModel query;
  ContrastiveModel key;
};

// MoCo-style toy loop: per batch, sample (t, t'), build x_q / x_k, encode
// with the query/key towers, take in-batch negatives, gradient-step the
// query tower and momentum-update the key tower. Deterministic per seed.
ToyTrainResult toy_contrastive_train(const std::vector<DepthImage>& dataset,
                                     const ToyTrainConfig& config);

void write_loss_csv(const std::string& path, const std::vector<double>& epoch_loss);
void write_loss_svg(const std::string& path, const std::vector<double>& epoch_loss);

}  // namespace gf
