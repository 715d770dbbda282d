#include "graspforge/gradcheck.hpp"

#include <cmath>

#include "graspforge/losses.hpp"

namespace gf {

double central_difference(const std::function<double(double)>& f, double x, double step) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1.0});
}

GradCheckResult check_smooth_l1(Rng& rng, int trials, double tol) {
  GradCheckResult r{"smooth_l1", 0.0, 0, false};
  for (int t = 0; t < trials; ++t) {
    double x = rng.uniform(-3.0, 3.0);
    // The second derivative jumps at |x| = 1; stay clear of it.
    if (std::abs(std::abs(x) - 1.0) < 1e-3) x += 0.01;
    const double numeric = central_difference([](double v) { return smooth_l1(v); }, x);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(smooth_l1_grad(x), numeric));
    ++r.checks;
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

GradCheckResult check_proposal(Rng& rng, int trials, double tol) {
  GradCheckResult r{"proposal_loss", 0.0, 0, false};
  for (int t = 0; t < trials; ++t) {
    const double s_pos = rng.uniform(0.05, 1.0);
    std::array<double, 5> pred, gt, lambda;
    for (int i = 0; i < 5; ++i) {
      pred[i] = rng.uniform(-2.0, 2.0);
      gt[i] = rng.uniform(-2.0, 2.0);
      if (std::abs(std::abs(gt[i] - pred[i]) - 1.0) < 1e-3) pred[i] += 0.01;
      lambda[i] = rng.uniform(0.5, 5.0);
    }
    double d_s = 0.0;
    std::array<double, 5> d_pred{};
    proposal_loss_grad(s_pos, pred, gt, lambda, d_s, d_pred);

    const double numeric_s = central_difference(
        [&](double v) { return proposal_loss(v, pred, gt, lambda); }, s_pos, 1e-6);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(d_s, numeric_s));
    for (int i = 0; i < 5; ++i) {
      const double numeric = central_difference(
          [&](double v) {
            auto p = pred;
            p[i] = v;
            return proposal_loss(s_pos, p, gt, lambda);
          },
          pred[i]);
      r.max_rel_error = std::max(r.max_rel_error, rel_error(d_pred[i], numeric));
    }
    r.checks += 6;
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

GradCheckResult check_refinement(Rng& rng, int trials, double tol) {
  GradCheckResult r{"refinement_loss", 0.0, 0, false};
  for (int t = 0; t < trials; ++t) {
    const double gh = rng.uniform(-30.0, 30.0), g = rng.uniform(-30.0, 30.0);
    const double zh = rng.uniform(0.2, 1.5), z = rng.uniform(0.2, 1.5);
    const double lg = rng.uniform(0.5, 5.0), lz = rng.uniform(0.5, 5.0);
    if (std::abs(gh - g) < 1e-3 || std::abs(zh - z) < 1e-3) continue;  // kink of |.|
    double dg = 0.0, dz = 0.0;
    refinement_loss_grad(gh, g, zh, z, lg, lz, dg, dz);
    const double ng = central_difference(
        [&](double v) { return refinement_loss(v, g, zh, z, lg, lz); }, gh);
    const double nz = central_difference(
        [&](double v) { return refinement_loss(gh, g, v, z, lg, lz); }, zh);
    r.max_rel_error = std::max({r.max_rel_error, rel_error(dg, ng), rel_error(dz, nz)});
    r.checks += 2;
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

GradCheckResult check_info_nce(Rng& rng, int trials, double tol) {
  GradCheckResult r{"info_nce", 0.0, 0, false};
  const int dim = 16, n_keys = 8;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd q(dim);
    KeyBank bank;
    bank.keys.resize(n_keys, dim);
    for (int i = 0; i < dim; ++i) q[i] = rng.gaussian();
    for (int i = 0; i < n_keys; ++i)
      for (int j = 0; j < dim; ++j) bank.keys(i, j) = rng.gaussian();
    q.normalize();
    for (int i = 0; i < n_keys; ++i) bank.keys.row(i).normalize();
    const double tau = rng.uniform(0.05, 1.0);

    Eigen::VectorXd d_q;
    Eigen::MatrixXd d_keys;
    info_nce_with_grad(q, bank, tau, d_q, d_keys);

    for (int i = 0; i < dim; ++i) {
      const double numeric = central_difference(
          [&](double v) {
            Eigen::VectorXd qq = q;
            qq[i] = v;
            return info_nce(qq, bank, tau);
          },
          q[i]);
      r.max_rel_error = std::max(r.max_rel_error, rel_error(d_q[i], numeric));
      ++r.checks;
    }
    // Spot-check key gradients on two rows.
    for (int row : {0, 1}) {
      for (int j = 0; j < dim; ++j) {
        const double numeric = central_difference(
            [&](double v) {
              KeyBank kb = bank;
              kb.keys(row, j) = v;
              return info_nce(q, kb, tau);
            },
            bank.keys(row, j));
        r.max_rel_error = std::max(r.max_rel_error, rel_error(d_keys(row, j), numeric));
        ++r.checks;
      }
    }
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

// Backprop through the projection head + encoder against finite differences
// of the InfoNCE loss in parameter space.
GradCheckResult check_tower_backprop(Rng& rng, double tol) {
  GradCheckResult r{"encoder_backprop", 0.0, 0, false};
  const int in_dim = 12, hidden = 10, feat = 8, proj = 6, n_keys = 5;

  ContrastiveModel model;
  model.encoder = DenseStack({in_dim, hidden, feat}, {true, true});
  model.head = DenseStack({feat, feat, proj}, {true, false});
  model.encoder.init(rng, 1.0);
  model.head.init(rng, 1.0);

  Eigen::VectorXd x(in_dim);
  for (int i = 0; i < in_dim; ++i) x[i] = rng.gaussian();
  KeyBank bank;
  bank.keys.resize(n_keys, proj);
  for (int i = 0; i < n_keys; ++i) {
    for (int j = 0; j < proj; ++j) bank.keys(i, j) = rng.gaussian();
    bank.keys.row(i).normalize();
  }
  const double tau = 0.2;

  auto loss_at = [&](const Eigen::VectorXd& enc_flat, const Eigen::VectorXd& head_flat) {
    ContrastiveModel m = model;
    m.encoder.set_from_flat(enc_flat);
    m.head.set_from_flat(head_flat);
    return info_nce(m.project(x), bank, tau);
  };

  // Analytic gradient via the training-path backward pass.
  std::vector<Eigen::VectorXd> enc_cache, head_cache;
  const Eigen::VectorXd f = model.encoder.forward_cached(x, enc_cache);
  const Eigen::VectorXd g = model.head.forward_cached(f, head_cache);
  const double norm = g.norm();
  const Eigen::VectorXd q = g / norm;
  Eigen::VectorXd d_q;
  Eigen::MatrixXd d_keys;
  info_nce_with_grad(q, bank, tau, d_q, d_keys);
  const Eigen::VectorXd d_g = (d_q - q * q.dot(d_q)) / norm;

  DenseStack grad_enc = model.encoder.zeros_like();
  DenseStack grad_head = model.head.zeros_like();
  const Eigen::VectorXd d_f = model.head.backward(head_cache, d_g, grad_head);
  model.encoder.backward(enc_cache, d_f, grad_enc);

  const Eigen::VectorXd enc_flat = model.encoder.flatten();
  const Eigen::VectorXd head_flat = model.head.flatten();
  const Eigen::VectorXd genc = grad_enc.flatten();
  const Eigen::VectorXd ghead = grad_head.flatten();

  // Probe a deterministic subset of parameters in each stack.
  for (int probe = 0; probe < 40; ++probe) {
    const int i = static_cast<int>(rng.uniform_int(enc_flat.size()));
    const double numeric = central_difference(
        [&](double v) {
          Eigen::VectorXd e = enc_flat;
          e[i] = v;
          return loss_at(e, head_flat);
        },
        enc_flat[i]);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(genc[i], numeric));
    ++r.checks;
  }
  for (int probe = 0; probe < 40; ++probe) {
    const int i = static_cast<int>(rng.uniform_int(head_flat.size()));
    const double numeric = central_difference(
        [&](double v) {
          Eigen::VectorXd h = head_flat;
          h[i] = v;
          return loss_at(enc_flat, h);
        },
        head_flat[i]);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(ghead[i], numeric));
    ++r.checks;
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(uint64_t seed, int trials, double tolerance) {
  Rng rng(Rng::derive(seed, 0x96ad));
  std::vector<GradCheckResult> results;
  results.push_back(check_smooth_l1(rng, trials, tolerance));
  results.push_back(check_proposal(rng, trials, tolerance));
  results.push_back(check_refinement(rng, trials, tolerance));
  results.push_back(check_info_nce(rng, trials, tolerance));
  results.push_back(check_tower_backprop(rng, tolerance));
  return results;
}

}  // namespace gf
