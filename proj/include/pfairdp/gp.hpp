#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pfairdp/rng.hpp"

namespace pfairdp {

// Hyperparameters of a Matern-5/2 ARD kernel plus Gaussian observation noise,
// kept in log space (that is also the space the optimizer walks in):
//   k(x, x') = s^2 (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r),
//   r^2 = sum_i (x_i - x'_i)^2 / l_i^2.
struct GpHyperparams {
  Eigen::VectorXd log_lengthscales;
  double log_signal_var = 0.0;
  double log_noise_var = std::log(1e-2);
};

namespace gp_detail {

constexpr double kLogLsMin = -4.6051701859880914;   // log 0.01
constexpr double kLogLsMax = 2.995732273553991;     // log 20
constexpr double kLogSigMin = -9.210340371976182;   // log 1e-4
constexpr double kLogSigMax = 6.907755278982137;    // log 1e3
constexpr double kLogNoiseMin = -13.815510557964274; // log 1e-6 (noise floor)
constexpr double kLogNoiseMax = 0.6931471805599453;  // log 2

inline double matern52(double r) {
  const double sr = std::sqrt(5.0) * r;
  return (1.0 + sr + sr * r * std::sqrt(5.0) / 3.0) * std::exp(-sr);
}

// Pairwise scaled distances under the current lengthscales.
inline Eigen::MatrixXd scaled_distances(const Eigen::MatrixXd& X, const Eigen::VectorXd& ls) {
  const auto n = X.rows();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      double sq = 0.0;
      for (Eigen::Index i = 0; i < X.cols(); ++i) {
        const double d = (X(a, i) - X(b, i)) / ls(i);
        sq += d * d;
      }
      R(a, b) = R(b, a) = std::sqrt(sq);
    }
  }
  return R;
}

struct Factorized {
  Eigen::MatrixXd Kf;          // signal part, no noise on the diagonal
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;       // K^-1 y
  double jitter = 0.0;
  double lml = 0.0;
};

// Builds and factorizes K = Kf + (noise + jitter) I, escalating jitter from
// 1e-10 to 1e-4 until the Cholesky succeeds. Returns false if it never does.
inline bool factorize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const GpHyperparams& hp, Factorized& out) {
  const auto n = X.rows();
  const Eigen::VectorXd ls = hp.log_lengthscales.array().exp();
  const double s2 = std::exp(hp.log_signal_var);
  const double n2 = std::exp(hp.log_noise_var);
  const Eigen::MatrixXd R = scaled_distances(X, ls);
  out.Kf.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) out.Kf(a, b) = s2 * matern52(R(a, b));

  for (double jitter = 1e-10; jitter <= 1.0001e-4; jitter *= 10.0) {
    Eigen::MatrixXd K = out.Kf;
    K.diagonal().array() += n2 + jitter;
    out.llt.compute(K);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      out.alpha = out.llt.solve(y);
      const double logdet = 2.0 * out.llt.matrixLLT().diagonal().array().log().sum();
      out.lml = -0.5 * y.dot(out.alpha) - 0.5 * logdet -
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
      return true;
    }
  }
  return false;
}

// Log marginal likelihood and its gradient w.r.t. [log l_1..log l_d,
// log s^2, log noise^2], via the trace identity
//   dLML/dtheta = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta).
// For the lengthscales,
//   dK/d log l_i = s^2 (5/3)(1 + sqrt5 r) exp(-sqrt5 r) * dx_i^2 / l_i^2,
// where the 1/r from the chain rule cancels exactly, so r = 0 is benign.
inline bool lml_with_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const GpHyperparams& hp, double& lml, Eigen::VectorXd& grad) {
  Factorized f;
  if (!factorize(X, y, hp, f)) return false;
  lml = f.lml;

  const auto n = X.rows();
  const auto d = X.cols();
  const Eigen::VectorXd ls = hp.log_lengthscales.array().exp();
  const double s2 = std::exp(hp.log_signal_var);
  const double n2 = std::exp(hp.log_noise_var);
  const Eigen::MatrixXd Kinv = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd A = f.alpha * f.alpha.transpose() - Kinv;
  const Eigen::MatrixXd R = scaled_distances(X, ls);

  grad.resize(d + 2);
  grad(d) = 0.5 * (A.array() * f.Kf.array()).sum();  // d/d log s^2: dK = Kf
  grad(d + 1) = 0.5 * n2 * A.trace();                // d/d log noise^2: dK = n2 I

  const double sqrt5 = std::sqrt(5.0);
  for (Eigen::Index i = 0; i < d; ++i) grad(i) = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double r = R(a, b);
      const double w = A(a, b) * s2 * (5.0 / 3.0) * (1.0 + sqrt5 * r) * std::exp(-sqrt5 * r);
      for (Eigen::Index i = 0; i < d; ++i) {
        const double dx = X(a, i) - X(b, i);
        grad(i) += w * dx * dx / (ls(i) * ls(i));  // off-diagonal pairs count twice; diagonal is zero
      }
    }
  }
  return true;
}

inline void clamp_params(Eigen::VectorXd& theta, Eigen::Index d) {
  for (Eigen::Index i = 0; i < d; ++i)
    theta(i) = std::clamp(theta(i), kLogLsMin, kLogLsMax);
  theta(d) = std::clamp(theta(d), kLogSigMin, kLogSigMax);
  theta(d + 1) = std::clamp(theta(d + 1), kLogNoiseMin, kLogNoiseMax);
}

inline GpHyperparams unpack(const Eigen::VectorXd& theta, Eigen::Index d) {
  GpHyperparams hp;
  hp.log_lengthscales = theta.head(d);
  hp.log_signal_var = theta(d);
  hp.log_noise_var = theta(d + 1);
  return hp;
}

}  // namespace gp_detail

struct GpFitOptions {
  int restarts = 8;      // 1 default start + 7 seeded draws
  int iterations = 90;   // Adam steps per restart
  double learning_rate = 0.08;
};

// Gaussian-process regressor for one objective. Targets are standardized
// internally; posterior moments come back in the original units. The reported
// posterior variance is for the latent function (no observation noise), so at
// a training input it never exceeds the fitted noise variance.
class GpModel {
 public:
  using FitOptions = GpFitOptions;

  // Maximum-likelihood fit. Inputs are expected in the unit cube (not
  // enforced); at least two observations are required. All-identical inputs
  // collapse to a noise-only model whose prediction is the data mean.
  static GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed,
                     const FitOptions& options = FitOptions()) {
    if (X.rows() != y.size()) throw std::invalid_argument("GpModel: X/y size mismatch");
    if (X.rows() < 2) throw std::invalid_argument("GpModel: need at least two observations");
    const Eigen::Index d = X.cols();

    GpModel model;
    model.standardize(y);

    // Degenerate design: no information in the inputs, predict the mean.
    double spread = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      spread = std::max(spread, X.col(i).maxCoeff() - X.col(i).minCoeff());
    if (spread < 1e-12) {
      GpHyperparams hp;
      hp.log_lengthscales = Eigen::VectorXd::Zero(d);
      hp.log_signal_var = std::log(1e-10);
      hp.log_noise_var = 0.0;  // standardized variance
      model.adopt(X, hp);
      return model;
    }

    Rng rng(Rng::splitmix64(seed ^ 0x9e3779b97f4a7c15ULL));
    double best_lml = -std::numeric_limits<double>::infinity();
    GpHyperparams best_hp;
    bool any = false;

    for (int restart = 0; restart < options.restarts; ++restart) {
      Eigen::VectorXd theta(d + 2);
      if (restart == 0) {
        theta.head(d).setConstant(std::log(0.5));
        theta(d) = 0.0;              // signal var 1 on standardized targets
        theta(d + 1) = std::log(1e-2);
      } else {
        for (Eigen::Index i = 0; i < d; ++i) theta(i) = std::log(rng.log_uniform(0.05, 5.0));
        theta(d) = std::log(rng.log_uniform(0.1, 10.0));
        theta(d + 1) = std::log(rng.log_uniform(1e-5, 0.5));
      }
      gp_detail::clamp_params(theta, d);

      Eigen::VectorXd m = Eigen::VectorXd::Zero(d + 2);
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d + 2);
      double lml = 0.0;
      Eigen::VectorXd grad;
      for (int it = 1; it <= options.iterations; ++it) {
        if (!gp_detail::lml_with_gradient(X, model.y_std_space_, gp_detail::unpack(theta, d), lml,
                                          grad))
          break;  // hopelessly ill-conditioned corner; keep the last good theta
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(0.9, it);
        const double c2 = 1.0 - std::pow(0.999, it);
        for (Eigen::Index i = 0; i < d + 2; ++i)
          theta(i) += options.learning_rate * (m(i) / c1) / (std::sqrt(v(i) / c2) + 1e-8);
        gp_detail::clamp_params(theta, d);
      }
      gp_detail::Factorized f;
      if (gp_detail::factorize(X, model.y_std_space_, gp_detail::unpack(theta, d), f)) {
        any = true;
        if (f.lml > best_lml) {
          best_lml = f.lml;
          best_hp = gp_detail::unpack(theta, d);
        }
      }
    }
    if (!any) throw std::runtime_error("GpModel: every restart failed to factorize");
    model.adopt(X, best_hp);
    return model;
  }

  // Fixed-hyperparameter construction (tests, degenerate designs).
  static GpModel with_hyperparams(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const GpHyperparams& hp) {
    if (X.rows() != y.size() || X.rows() == 0)
      throw std::invalid_argument("GpModel: X/y size mismatch");
    if (hp.log_lengthscales.size() != X.cols())
      throw std::invalid_argument("GpModel: lengthscale count must match input dimension");
    GpModel model;
    model.standardize(y);
    model.adopt(X, hp);
    return model;
  }

  // Posterior mean and latent variance at one input, in original target units.
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const {
    if (x.size() != X_.cols()) throw std::invalid_argument("GpModel: query dimension mismatch");
    const Eigen::VectorXd ls = hp_.log_lengthscales.array().exp();
    const double s2 = std::exp(hp_.log_signal_var);
    const auto n = X_.rows();
    Eigen::VectorXd kstar(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      double sq = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double delta = (X_(a, i) - x(i)) / ls(i);
        sq += delta * delta;
      }
      kstar(a) = s2 * gp_detail::matern52(std::sqrt(sq));
    }
    const double mean_std = kstar.dot(fact_.alpha);
    const double var_std = std::max(0.0, s2 - kstar.dot(fact_.llt.solve(kstar)));
    return {y_mean_ + y_sd_ * mean_std, y_sd_ * y_sd_ * var_std};
  }

  const GpHyperparams& hyperparams() const { return hp_; }
  double log_marginal_likelihood() const { return fact_.lml; }  // standardized space
  double noise_variance() const { return y_sd_ * y_sd_ * std::exp(hp_.log_noise_var); }
  double y_mean() const { return y_mean_; }
  double y_sd() const { return y_sd_; }

  // Standardized-space LML of arbitrary hyperparameters on the same data
  // (shared definition for fit-quality comparisons in tests).
  static double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const GpHyperparams& hp) {
    GpModel tmp;
    tmp.standardize(y);
    gp_detail::Factorized f;
    if (!gp_detail::factorize(X, tmp.y_std_space_, hp, f))
      return -std::numeric_limits<double>::infinity();
    return f.lml;
  }

 private:
  void standardize(const Eigen::VectorXd& y) {
    y_mean_ = y.mean();
    const double var = (y.array() - y_mean_).square().mean();
    y_sd_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    y_std_space_ = (y.array() - y_mean_) / y_sd_;
  }

  void adopt(const Eigen::MatrixXd& X, const GpHyperparams& hp) {
    X_ = X;
    hp_ = hp;
    if (!gp_detail::factorize(X_, y_std_space_, hp_, fact_))
      throw std::runtime_error("GpModel: covariance factorization failed");
  }

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_std_space_;
  GpHyperparams hp_;
  gp_detail::Factorized fact_;
  double y_mean_ = 0.0;
  double y_sd_ = 1.0;
};

}  // namespace pfairdp
