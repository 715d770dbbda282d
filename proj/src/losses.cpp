#include "graspforge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "graspforge/errors.hpp"

namespace gf {

double smooth_l1(double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; }

double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

double proposal_loss(double s_pos, const std::array<double, 5>& pred,
                     const std::array<double, 5>& gt, const std::array<double, 5>& lambda) {
  if (s_pos <= 0.0 || s_pos > 1.0 + 1e-12)
    throw Error(ErrorKind::invalid_score, "s_pos must be in (0, 1]");
  double loss = -std::log(s_pos);
  for (int i = 0; i < 5; ++i) loss += lambda[i] * smooth_l1(gt[i] - pred[i]);
  return loss;
}

void proposal_loss_grad(double s_pos, const std::array<double, 5>& pred,
                        const std::array<double, 5>& gt, const std::array<double, 5>& lambda,
                        double& d_s_pos, std::array<double, 5>& d_pred) {
  if (s_pos <= 0.0 || s_pos > 1.0 + 1e-12)
    throw Error(ErrorKind::invalid_score, "s_pos must be in (0, 1]");
  d_s_pos = -1.0 / s_pos;
  for (int i = 0; i < 5; ++i) d_pred[i] = -lambda[i] * smooth_l1_grad(gt[i] - pred[i]);
}

double refinement_loss(double gamma_hat, double gamma, double z_hat, double z,
                       double lambda_gamma, double lambda_z) {
  return lambda_gamma * std::abs(gamma_hat - gamma) + lambda_z * std::abs(z_hat - z);
}

void refinement_loss_grad(double gamma_hat, double gamma, double z_hat, double z,
                          double lambda_gamma, double lambda_z, double& d_gamma_hat,
                          double& d_z_hat) {
  d_gamma_hat = lambda_gamma * (gamma_hat >= gamma ? 1.0 : -1.0);
  d_z_hat = lambda_z * (z_hat >= z ? 1.0 : -1.0);
}

namespace {

Eigen::VectorXd nce_log_softmax(const Eigen::VectorXd& q, const KeyBank& bank, double tau,
                                Eigen::VectorXd& probs) {
  if (tau <= 0.0) throw Error(ErrorKind::invalid_temperature, "temperature must be > 0");
  if (bank.keys.rows() < 2)
    throw Error(ErrorKind::insufficient_negatives, "need at least one negative key");
  if (bank.keys.cols() != q.size())
    throw Error(ErrorKind::shape_mismatch, "query/key dimension mismatch");

  Eigen::VectorXd logits = bank.keys * q / tau;
  const double peak = logits.maxCoeff();
  Eigen::VectorXd shifted = (logits.array() - peak).exp();
  probs = shifted / shifted.sum();
  return logits;
}

}  // namespace

double info_nce(const Eigen::VectorXd& q, const KeyBank& bank, double tau) {
  Eigen::VectorXd probs;
  nce_log_softmax(q, bank, tau, probs);
  return -std::log(std::max(probs[0], 1e-300));
}

double info_nce_with_grad(const Eigen::VectorXd& q, const KeyBank& bank, double tau,
                          Eigen::VectorXd& d_q, Eigen::MatrixXd& d_keys) {
  Eigen::VectorXd probs;
  nce_log_softmax(q, bank, tau, probs);

  d_q = (bank.keys.transpose() * probs - bank.keys.row(0).transpose()) / tau;
  d_keys = probs * q.transpose() / tau;
  d_keys.row(0) -= q.transpose() / tau;
  return -std::log(std::max(probs[0], 1e-300));
}

double overall_loss(double l_p, double l_r, double l_q, const std::array<double, 3>& stage) {
  return stage[0] * l_p + stage[1] * l_r + stage[2] * l_q;
}

Eigen::VectorXd momentum_update(const Eigen::VectorXd& key_params,
                                const Eigen::VectorXd& query_params, double m) {
  if (key_params.size() != query_params.size())
    throw Error(ErrorKind::shape_mismatch, "parameter vectors differ in length");
  return m * key_params + (1.0 - m) * query_params;
}

DenseStack::DenseStack(const std::vector<int>& sizes, const std::vector<bool>& tanh_after)
    : sizes_(sizes), tanh_after_(tanh_after) {
  if (sizes.size() < 2 || tanh_after.size() != sizes.size() - 1)
    throw Error(ErrorKind::config, "bad dense stack shape");
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    weights_.emplace_back(Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]));
    biases_.emplace_back(Eigen::VectorXd::Zero(sizes[i + 1]));
  }
}

void DenseStack::init(Rng& rng, double scale) {
  for (auto& w : weights_) {
    const double std_dev = scale / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.gaussian(0.0, std_dev);
  }
  for (auto& b : biases_) b.setZero();
}

Eigen::VectorXd DenseStack::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (size_t i = 0; i < weights_.size(); ++i) {
    h = weights_[i] * h + biases_[i];
    if (tanh_after_[i]) h = h.array().tanh();
  }
  return h;
}

Eigen::VectorXd DenseStack::forward_cached(const Eigen::VectorXd& x,
                                           std::vector<Eigen::VectorXd>& cache) const {
  cache.clear();
  cache.push_back(x);
  Eigen::VectorXd h = x;
  for (size_t i = 0; i < weights_.size(); ++i) {
    h = weights_[i] * h + biases_[i];
    if (tanh_after_[i]) h = h.array().tanh();
    cache.push_back(h);
  }
  return h;
}

Eigen::VectorXd DenseStack::backward(const std::vector<Eigen::VectorXd>& cache,
                                     const Eigen::VectorXd& grad_out, DenseStack& grads) const {
  Eigen::VectorXd g = grad_out;
  for (int i = static_cast<int>(weights_.size()) - 1; i >= 0; --i) {
    if (tanh_after_[i]) {
      const Eigen::ArrayXd y = cache[i + 1].array();
      g = (g.array() * (1.0 - y * y)).matrix();
    }
    grads.weights_[i] += g * cache[i].transpose();
    grads.biases_[i] += g;
    g = weights_[i].transpose() * g;
  }
  return g;
}

DenseStack DenseStack::zeros_like() const { return DenseStack(sizes_, tanh_after_); }

int DenseStack::param_count() const {
  int n = 0;
  for (size_t i = 0; i < weights_.size(); ++i)
    n += static_cast<int>(weights_[i].size() + biases_[i].size());
  return n;
}

Eigen::VectorXd DenseStack::flatten() const {
  Eigen::VectorXd out(param_count());
  Eigen::Index pos = 0;
  for (size_t i = 0; i < weights_.size(); ++i) {
    out.segment(pos, weights_[i].size()) =
        Eigen::Map<const Eigen::VectorXd>(weights_[i].data(), weights_[i].size());
    pos += weights_[i].size();
    out.segment(pos, biases_[i].size()) = biases_[i];
    pos += biases_[i].size();
  }
  return out;
}

void DenseStack::set_from_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count())
    throw Error(ErrorKind::shape_mismatch, "flat parameter size mismatch");
  Eigen::Index pos = 0;
  for (size_t i = 0; i < weights_.size(); ++i) {
    Eigen::Map<Eigen::VectorXd>(weights_[i].data(), weights_[i].size()) =
        flat.segment(pos, weights_[i].size());
    pos += weights_[i].size();
    biases_[i] = flat.segment(pos, biases_[i].size());
    pos += biases_[i].size();
  }
}

void DenseStack::add_scaled(const DenseStack& other, double factor) {
  for (size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] += factor * other.weights_[i];
    biases_[i] += factor * other.biases_[i];
  }
}

Eigen::VectorXd ContrastiveModel::project(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = head.forward(encoder.forward(x));
  const double norm = g.norm();
  return norm > 0.0 ? Eigen::VectorXd(g / norm) : g;
}

Eigen::VectorXd downsample_patch(const DepthImage& img, int side) {
  Eigen::VectorXd out(side * side);
  for (int i = 0; i < side; ++i) {
    const int r0 = i * img.height / side;
    const int r1 = std::max((i + 1) * img.height / side, r0 + 1);
    for (int j = 0; j < side; ++j) {
      const int c0 = j * img.width / side;
      const int c1 = std::max((j + 1) * img.width / side, c0 + 1);
      double acc = 0.0;
      int count = 0;
      for (int r = r0; r < r1 && r < img.height; ++r)
        for (int c = c0; c < c1 && c < img.width; ++c) {
          acc += img.at(r, c);
          ++count;
        }
      out[i * side + j] = count > 0 ? acc / count : 0.0;
    }
  }
  return out;
}

namespace {

struct TowerCaches {
  std::vector<Eigen::VectorXd> encoder;
  std::vector<Eigen::VectorXd> head;
  Eigen::VectorXd pre_norm;
  double norm = 1.0;
};

Eigen::VectorXd project_cached(const ContrastiveModel& model, const Eigen::VectorXd& x,
                               TowerCaches& caches) {
  const Eigen::VectorXd f = model.encoder.forward_cached(x, caches.encoder);
  caches.pre_norm = model.head.forward_cached(f, caches.head);
  caches.norm = std::max(caches.pre_norm.norm(), 1e-12);
  return caches.pre_norm / caches.norm;
}

void backward_through_tower(const ContrastiveModel& model, const TowerCaches& caches,
                            const Eigen::VectorXd& d_q, DenseStack& grad_encoder,
                            DenseStack& grad_head) {
  const Eigen::VectorXd q = caches.pre_norm / caches.norm;
  // d/dy of y/|y| applied to the incoming gradient.
  const Eigen::VectorXd d_pre = (d_q - q * q.dot(d_q)) / caches.norm;
  const Eigen::VectorXd d_feature = model.head.backward(caches.head, d_pre, grad_head);
  model.encoder.backward(caches.encoder, d_feature, grad_encoder);
}

}  // namespace

ToyTrainResult toy_contrastive_train(const std::vector<DepthImage>& dataset,
                                     const ToyTrainConfig& config) {
  if (config.batch < 2)
    throw Error(ErrorKind::insufficient_negatives, "batch must be >= 2 for in-batch negatives");
  if (static_cast<int>(dataset.size()) < 2 * config.batch)
    throw Error(ErrorKind::config, "dataset must hold at least 2 * batch samples");
  if (config.family.empty()) throw Error(ErrorKind::config, "augmentation family is empty");

  const int in_dim = config.input_side * config.input_side;
  ContrastiveModel query;
  query.encoder = DenseStack({in_dim, config.hidden, config.feature_dim}, {true, true});
  query.head = DenseStack({config.feature_dim, config.feature_dim, config.proj_dim},
                          {true, false});
  Rng init_rng(Rng::derive(config.seed, 0xe0c0de));
  query.encoder.init(init_rng, config.init_scale);
  query.head.init(init_rng, config.init_scale);
  ContrastiveModel key = query;  // key tower starts as a copy

  Rng data_rng(Rng::derive(config.seed, 0xda7a));
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  ToyTrainResult result;
  const std::vector<ImageGrasp> no_labels;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates reshuffle per epoch.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[data_rng.uniform_int(i)]);

    double epoch_loss = 0.0;
    int steps = 0;
    const int n_batches = static_cast<int>(dataset.size()) / config.batch;
    for (int b = 0; b < n_batches; ++b) {
      std::vector<Eigen::VectorXd> x_q(config.batch), x_k(config.batch);
      for (int i = 0; i < config.batch; ++i) {
        const DepthImage& img = dataset[order[b * config.batch + i]];
        auto [t, t_prime] = sample_pair(config.family, data_rng);
        const AugmentedSample aug_q = apply_pipeline(img, no_labels, t, data_rng);
        const AugmentedSample aug_k = apply_pipeline(img, no_labels, t_prime, data_rng);
        x_q[i] = downsample_patch(aug_q.image, config.input_side);
        x_k[i] = downsample_patch(aug_k.image, config.input_side);
      }

      // Key projections carry no gradient.
      Eigen::MatrixXd keys(config.batch, config.proj_dim);
      for (int i = 0; i < config.batch; ++i) keys.row(i) = key.project(x_k[i]).transpose();

      DenseStack grad_encoder = query.encoder.zeros_like();
      DenseStack grad_head = query.head.zeros_like();
      double batch_loss = 0.0;
      for (int i = 0; i < config.batch; ++i) {
        TowerCaches caches;
        const Eigen::VectorXd q = project_cached(query, x_q[i], caches);

        KeyBank bank;
        bank.keys.resize(config.batch, config.proj_dim);
        bank.keys.row(0) = keys.row(i);  // positive first
        int row = 1;
        for (int j = 0; j < config.batch; ++j)
          if (j != i) bank.keys.row(row++) = keys.row(j);

        Eigen::VectorXd d_q;
        Eigen::MatrixXd d_keys;
        batch_loss += info_nce_with_grad(q, bank, config.tau, d_q, d_keys);
        backward_through_tower(query, caches, d_q / config.batch, grad_encoder, grad_head);
      }
      batch_loss /= config.batch;

      query.encoder.add_scaled(grad_encoder, -config.lr);
      query.head.add_scaled(grad_head, -config.lr);
      key.encoder.set_from_flat(
          momentum_update(key.encoder.flatten(), query.encoder.flatten(), config.momentum));
      key.head.set_from_flat(
          momentum_update(key.head.flatten(), query.head.flatten(), config.momentum));

      epoch_loss += batch_loss;
      ++steps;
    }
    result.epoch_loss.push_back(epoch_loss / std::max(steps, 1));
  }

  result.query = std::move(query);
  result.key = std::move(key);
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<double>& epoch_loss) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::io, "cannot open for writing: " + path);
  f << "epoch,mean_loss\n";
  f.precision(17);
  for (size_t i = 0; i < epoch_loss.size(); ++i) f << i << "," << epoch_loss[i] << "\n";
}

void write_loss_svg(const std::string& path, const std::vector<double>& epoch_loss) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::io, "cannot open for writing: " + path);
  const int w = 640, h = 400, margin = 50;
  double lo = 1e300, hi = -1e300;
  for (double v : epoch_loss) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (epoch_loss.empty()) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) hi = lo + 1.0;

  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<line x1='" << margin << "' y1='" << h - margin << "' x2='" << w - margin / 2
    << "' y2='" << h - margin << "' stroke='black'/>\n";
  f << "<line x1='" << margin << "' y1='" << h - margin << "' x2='" << margin << "' y2='"
    << margin / 2 << "' stroke='black'/>\n";
  f << "<text x='" << w / 2 << "' y='" << h - 10 << "' text-anchor='middle'>epoch</text>\n";
  f << "<text x='15' y='" << h / 2 << "' transform='rotate(-90 15 " << h / 2
    << ")' text-anchor='middle'>mean loss</text>\n";
  if (!epoch_loss.empty()) {
    f << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
    for (size_t i = 0; i < epoch_loss.size(); ++i) {
      const double px =
          margin + (w - 1.5 * margin) * (epoch_loss.size() == 1
                                             ? 0.0
                                             : static_cast<double>(i) / (epoch_loss.size() - 1));
      const double py = h - margin - (h - 1.5 * margin) * (epoch_loss[i] - lo) / (hi - lo);
      f << px << "," << py << " ";
    }
    f << "'/>\n";
  }
  f << "</svg>\n";
}

}  // namespace gf
