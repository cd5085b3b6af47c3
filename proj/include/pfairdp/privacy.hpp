#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pfairdp/rng.hpp"

namespace pfairdp {

struct DpParams {
  double noise_multiplier = 1.0;  // sigma, in units of the clipping norm
  double clipping_norm = 1.0;
  double delta = 1e-5;

  void validate() const {
    if (!(noise_multiplier >= 0.0)) throw std::invalid_argument("DpParams: noise_multiplier < 0");
    if (!(clipping_norm > 0.0)) throw std::invalid_argument("DpParams: clipping_norm must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("DpParams: delta must be in (0,1)");
  }
};

struct PrivacySpend {
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t steps = 0;
  double sampling_rate = 0.0;
};

// Scale each per-sample gradient by min(1, C / ||g||_2).
inline std::vector<std::vector<double>> clip_per_sample(std::vector<std::vector<double>> grads,
                                                        double clipping_norm) {
  if (!(clipping_norm > 0.0)) throw std::invalid_argument("clip_per_sample: norm must be > 0");
  for (auto& g : grads) {
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > clipping_norm) {
      const double f = clipping_norm / norm;
      for (double& v : g) v *= f;
    }
  }
  return grads;
}

// (sum of clipped gradients + N(0, sigma^2 C^2 I)) / batch_size. sigma = 0 adds
// nothing and draws nothing, so non-noisy paths stay byte-deterministic.
inline std::vector<double> noisy_aggregate(const std::vector<std::vector<double>>& clipped,
                                           double clipping_norm, double noise_multiplier,
                                           std::size_t batch_size, Rng& rng) {
  if (clipped.empty()) throw std::invalid_argument("noisy_aggregate: empty batch");
  if (batch_size == 0) throw std::invalid_argument("noisy_aggregate: batch_size must be > 0");
  const std::size_t dim = clipped.front().size();
  std::vector<double> out(dim, 0.0);
  for (const auto& g : clipped) {
    if (g.size() != dim) throw std::invalid_argument("noisy_aggregate: ragged gradients");
    for (std::size_t j = 0; j < dim; ++j) out[j] += g[j];
  }
  if (noise_multiplier > 0.0) {
    const double scale = noise_multiplier * clipping_norm;
    for (std::size_t j = 0; j < dim; ++j) out[j] += rng.gaussian(0.0, scale);
  }
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (double& v : out) v *= inv;
  return out;
}

// Renyi orders used by the accountant. Dense integers cover the strong-noise
// regime; the sparse tail extends the conversion's reach, since the additive
// log(1/delta)/(alpha - 1) term alone exceeds 0.1 for every alpha <= 116 at
// delta = 1e-5 and small target epsilons are otherwise unreachable.
inline std::vector<int> default_rdp_orders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  for (int a : {72, 80, 96, 128, 160, 192, 256, 320, 384, 448, 512}) orders.push_back(a);
  return orders;
}

namespace detail {

inline double log_factorial(int n) {
  static const std::vector<double> table = [] {
    std::vector<double> t(600);
    for (int i = 0; i < 600; ++i) t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return t;
  }();
  if (n < static_cast<int>(table.size())) return table[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_binomial(int n, int k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

}  // namespace detail

// RDP of one step of the Poisson-subsampled Gaussian mechanism at an integer
// order alpha >= 2 (the binomial-expansion bound for integer orders):
//   RDP(alpha) = log( sum_{k=0..alpha} C(alpha,k) (1-q)^(alpha-k) q^k
//                     * exp((k^2 - k) / (2 sigma^2)) ) / (alpha - 1),
// evaluated by logsumexp. q = 1 reduces analytically to alpha / (2 sigma^2).
inline std::vector<double> rdp_subsampled_gaussian(double q, double sigma,
                                                   const std::vector<int>& orders) {
  if (!(q > 0.0 && q <= 1.0))
    throw std::invalid_argument("rdp_subsampled_gaussian: sampling rate must be in (0, 1]");
  if (!(sigma > 0.0))
    throw std::domain_error("rdp_subsampled_gaussian: sigma must be > 0 (sigma = 0 is not private)");
  if (orders.empty()) throw std::invalid_argument("rdp_subsampled_gaussian: no orders given");

  std::vector<double> rdp;
  rdp.reserve(orders.size());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (const int alpha : orders) {
    if (alpha < 2) throw std::invalid_argument("rdp_subsampled_gaussian: orders must be >= 2");
    if (q == 1.0) {
      rdp.push_back(alpha * inv2s2);
      continue;
    }
    const double logq = std::log(q);
    const double log1q = std::log1p(-q);
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(alpha + 1);
    for (int k = 0; k <= alpha; ++k) {
      terms[k] = detail::log_binomial(alpha, k) + k * logq + (alpha - k) * log1q +
                 (static_cast<double>(k) * k - k) * inv2s2;
      max_term = std::max(max_term, terms[k]);
    }
    double sum = 0.0;
    for (const double t : terms) sum += std::exp(t - max_term);
    const double log_a = max_term + std::log(sum);
    rdp.push_back(std::max(0.0, log_a) / (alpha - 1));
  }
  return rdp;
}

// Composition over `steps` identical mechanisms, then the standard RDP->(eps,
// delta) conversion, minimized over orders:
//   eps = min_alpha [ steps * rdp(alpha) + log(1/delta) / (alpha - 1) ].
// Zero steps spend nothing, by definition rather than by limit.
inline PrivacySpend epsilon_from_rdp(const std::vector<double>& rdp, const std::vector<int>& orders,
                                     std::int64_t steps, double delta) {
  if (rdp.size() != orders.size() || rdp.empty())
    throw std::invalid_argument("epsilon_from_rdp: orders and rdp values must align and be non-empty");
  if (steps < 0) throw std::invalid_argument("epsilon_from_rdp: steps must be >= 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("epsilon_from_rdp: delta must be in (0, 1)");
  PrivacySpend spend;
  spend.delta = delta;
  spend.steps = steps;
  if (steps == 0) return spend;  // epsilon stays exactly 0
  const double log_inv_delta = std::log(1.0 / delta);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rdp.size(); ++i) {
    if (orders[i] < 2) throw std::invalid_argument("epsilon_from_rdp: orders must be >= 2");
    best = std::min(best, static_cast<double>(steps) * rdp[i] + log_inv_delta / (orders[i] - 1));
  }
  spend.epsilon = best;
  return spend;
}

// End-to-end spend of a DP-SGD run: sampling rate q, noise sigma, step count.
inline PrivacySpend account_dp_sgd(double sigma, double q, std::int64_t steps, double delta,
                                   const std::vector<int>& orders = default_rdp_orders()) {
  if (steps == 0) {
    PrivacySpend spend;
    spend.delta = delta;
    spend.sampling_rate = q;
    return spend;
  }
  auto spend = epsilon_from_rdp(rdp_subsampled_gaussian(q, sigma, orders), orders, steps, delta);
  spend.sampling_rate = q;
  return spend;
}

// Smallest noise multiplier whose accounted epsilon lands in
// [target * (1 - 1e-3), target], found by bisection on [0.3, 100]. Epsilon is
// continuous and decreasing in sigma, so the bracket [eps(100), eps(0.3)] must
// contain the target; otherwise no sigma in range can hit the band and we say so.
inline double noise_for_target_epsilon(double target_epsilon, double q, std::int64_t steps,
                                       double delta,
                                       const std::vector<int>& orders = default_rdp_orders()) {
  if (!(target_epsilon > 0.0))
    throw std::invalid_argument("noise_for_target_epsilon: target must be > 0");
  if (steps < 1) throw std::invalid_argument("noise_for_target_epsilon: steps must be >= 1");
  constexpr double kLo = 0.3, kHi = 100.0;
  constexpr double kRelTol = 1e-3;
  const auto eps_at = [&](double sigma) {
    return account_dp_sgd(sigma, q, steps, delta, orders).epsilon;
  };
  const double eps_lo = eps_at(kLo);   // largest achievable epsilon
  const double eps_hi = eps_at(kHi);   // smallest achievable epsilon
  if (eps_lo <= target_epsilon) {
    if (eps_lo >= target_epsilon * (1.0 - kRelTol)) return kLo;
    throw std::domain_error("noise_for_target_epsilon: target " + std::to_string(target_epsilon) +
                            " exceeds what sigma = 0.3 spends (" + std::to_string(eps_lo) + ")");
  }
  if (eps_hi > target_epsilon)
    throw std::domain_error("noise_for_target_epsilon: target " + std::to_string(target_epsilon) +
                            " unreachable even at sigma = 100 (" + std::to_string(eps_hi) + ")");
  double lo = kLo, hi = kHi;  // invariant: eps(lo) > target >= eps(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) > target_epsilon)
      lo = mid;
    else
      hi = mid;
  }
  const double achieved = eps_at(hi);
  if (!(achieved <= target_epsilon && achieved >= target_epsilon * (1.0 - kRelTol)))
    throw std::runtime_error("noise_for_target_epsilon: bisection failed to converge");
  return hi;
}

}  // namespace pfairdp
