#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfairdp/gp.hpp"
#include "pfairdp/pipeline.hpp"
#include "pfairdp/rng.hpp"

namespace pfairdp {

// Maximization dominance: a >= b everywhere and > somewhere.
inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("dominates: dimension mismatch");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

// Indices (ascending) of the non-dominated points. Points are visited in
// descending lexicographic order, so every potential dominator of a point has
// already been examined — each point only needs checking against the kept
// front. Exact duplicates are all retained (neither dominates the other).
inline std::vector<std::size_t> pareto_filter(const std::vector<std::vector<double>>& points) {
  if (points.empty()) return {};
  const std::size_t m = points.front().size();
  for (const auto& p : points)
    if (p.size() != m || m == 0) throw std::invalid_argument("pareto_filter: ragged points");

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a] != points[b]) return points[a] > points[b];  // lexicographic, descending
    return a < b;
  });

  std::vector<std::size_t> kept;
  for (const std::size_t idx : order) {
    bool dominated = false;
    for (const std::size_t k : kept) {
      if (dominates(points[k], points[idx])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

namespace hv_detail {

// 2-D staircase area over points already filtered to dominate the reference,
// sorted by x descending (y descending within ties).
inline double staircase_area(const std::vector<std::array<double, 2>>& pts, double rx, double ry) {
  double area = 0.0;
  double best_y = ry;
  for (const auto& p : pts) {
    if (p[1] > best_y) {
      area += (p[0] - rx) * (p[1] - best_y);
      best_y = p[1];
    }
  }
  return area;
}

// 3-D hypervolume by sweeping z downward: between consecutive z-levels the
// cross-section is the 2-D staircase of every point at or above that level.
// `pts` must strictly dominate ref and arrive sorted by z descending.
// O(n^2) with an incrementally maintained x-sorted projection.
inline double sweep_volume(const std::vector<std::array<double, 3>>& pts,
                           const std::array<double, 3>& ref,
                           std::vector<std::array<double, 2>>& xy_scratch) {
  xy_scratch.clear();
  double volume = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const std::array<double, 2> proj{pts[k][0], pts[k][1]};
    auto pos = std::lower_bound(xy_scratch.begin(), xy_scratch.end(), proj,
                                [](const auto& a, const auto& b) { return a > b; });
    xy_scratch.insert(pos, proj);
    const double z_lo = (k + 1 < pts.size()) ? pts[k + 1][2] : ref[2];
    const double dz = pts[k][2] - z_lo;
    if (dz > 0.0) volume += staircase_area(xy_scratch, ref[0], ref[1]) * dz;
  }
  return volume;
}

}  // namespace hv_detail

// Exact hypervolume dominated by `points` relative to `reference`
// (maximization; points at or below the reference in any coordinate
// contribute nothing). Supports 1, 2, and 3 objectives.
inline double hypervolume(const std::vector<std::vector<double>>& points,
                          const std::vector<double>& reference) {
  const std::size_t m = reference.size();
  if (m == 0 || m > 3) throw std::invalid_argument("hypervolume: supports 1-3 objectives");
  for (const auto& p : points)
    if (p.size() != m) throw std::invalid_argument("hypervolume: point/reference dimension mismatch");

  if (m == 1) {
    double best = 0.0;
    for (const auto& p : points) best = std::max(best, p[0] - reference[0]);
    return best;
  }
  if (m == 2) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : points)
      if (p[0] > reference[0] && p[1] > reference[1]) pts.push_back({p[0], p[1]});
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a > b; });
    return hv_detail::staircase_area(pts, reference[0], reference[1]);
  }
  std::vector<std::array<double, 3>> pts;
  for (const auto& p : points)
    if (p[0] > reference[0] && p[1] > reference[1] && p[2] > reference[2])
      pts.push_back({p[0], p[1], p[2]});
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a[2] != b[2] ? a[2] > b[2] : a > b; });
  std::vector<std::array<double, 2>> scratch;
  return hv_detail::sweep_volume(pts, {reference[0], reference[1], reference[2]}, scratch);
}

// Every evaluation ever made, its non-dominated subset, and the hypervolume
// after each addition (non-decreasing by construction: the dominated region
// only ever grows).
struct ArchiveEntry {
  PipelineConfig config;
  ObjectiveTriple objectives;
};

class ParetoArchive {
 public:
  explicit ParetoArchive(std::array<double, 3> reference = transformed_reference())
      : reference_(reference) {}

  void add(const PipelineConfig& config, const ObjectiveTriple& objectives) {
    entries_.push_back({config, objectives});
    std::vector<std::vector<double>> pts;
    pts.reserve(entries_.size());
    for (const auto& e : entries_)
      pts.push_back({e.objectives.transformed[0], e.objectives.transformed[1],
                     e.objectives.transformed[2]});
    front_ = pareto_filter(pts);
    std::vector<std::vector<double>> front_pts;
    front_pts.reserve(front_.size());
    for (const auto idx : front_) front_pts.push_back(pts[idx]);
    hv_trace_.push_back(
        hypervolume(front_pts, {reference_[0], reference_[1], reference_[2]}));
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  const std::vector<std::size_t>& front() const { return front_; }
  const std::vector<double>& hv_trace() const { return hv_trace_; }
  double current_hypervolume() const { return hv_trace_.empty() ? 0.0 : hv_trace_.back(); }
  const std::array<double, 3>& reference() const { return reference_; }

  std::vector<std::array<double, 3>> front_points() const {
    std::vector<std::array<double, 3>> pts;
    pts.reserve(front_.size());
    for (const auto idx : front_) pts.push_back(entries_[idx].objectives.transformed);
    return pts;
  }

 private:
  std::array<double, 3> reference_;
  std::vector<ArchiveEntry> entries_;
  std::vector<std::size_t> front_;
  std::vector<double> hv_trace_;
};

// One GP per transformed objective over unit-cube configs.
struct SurrogateSet {
  GpModel utility, fairness, privacy;
};

inline SurrogateSet fit_surrogates(const ParetoArchive& archive, const Domains& domains,
                                   std::uint64_t seed) {
  const auto& entries = archive.entries();
  if (entries.size() < 2)
    throw std::invalid_argument("fit_surrogates: need at least two evaluations");
  Eigen::MatrixXd X(entries.size(), 6);
  Eigen::VectorXd yu(entries.size()), yf(entries.size()), yp(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto u = domains.to_unit(entries[i].config);
    for (int j = 0; j < 6; ++j) X(static_cast<Eigen::Index>(i), j) = u[j];
    yu(i) = entries[i].objectives.transformed[0];
    yf(i) = entries[i].objectives.transformed[1];
    yp(i) = entries[i].objectives.transformed[2];
  }
  return {GpModel::fit(X, yu, Rng::splitmix64(seed ^ 0x1111ULL)),
          GpModel::fit(X, yf, Rng::splitmix64(seed ^ 0x2222ULL)),
          GpModel::fit(X, yp, Rng::splitmix64(seed ^ 0x3333ULL))};
}

// Monte-Carlo expected hypervolume improvement with common random numbers:
// one fixed matrix of standard normals is shared by every candidate scored by
// the same estimator, so comparisons are noise-free and the argmax is exactly
// reproducible. Per sample the improvement uses the clipping identity
//   HV(F + {y}) - HV(F) = prod_i (y_i - ref_i)+  -  HV({min(p, y) : p in F}),
// which avoids recomputing the union volume from scratch.
class EhviEstimator {
 public:
  EhviEstimator(std::vector<std::array<double, 3>> front, std::array<double, 3> reference,
                int n_mc, std::uint64_t seed)
      : front_(std::move(front)), ref_(reference) {
    if (n_mc < 1) throw std::invalid_argument("EhviEstimator: n_mc must be >= 1");
    // Keep only ref-dominating points, pre-sorted by z descending. Clipping by
    // min(., y) preserves that order, so per-sample volumes skip the sort.
    std::erase_if(front_, [&](const auto& p) {
      return !(p[0] > ref_[0] && p[1] > ref_[1] && p[2] > ref_[2]);
    });
    std::sort(front_.begin(), front_.end(),
              [](const auto& a, const auto& b) { return a[2] != b[2] ? a[2] > b[2] : a > b; });
    Rng rng(Rng::splitmix64(seed ^ 0x45564849ULL));
    z_.resize(static_cast<std::size_t>(n_mc) * 3);
    for (auto& z : z_) z = rng.gaussian();
  }

  double operator()(const std::array<double, 3>& mean, const std::array<double, 3>& var) const {
    std::array<double, 3> sd{};
    for (int i = 0; i < 3; ++i) sd[i] = std::sqrt(std::max(0.0, var[i]));
    const std::size_t n = z_.size() / 3;
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      std::array<double, 3> y;
      for (int i = 0; i < 3; ++i) y[i] = mean[i] + sd[i] * z_[s * 3 + i];
      total += improvement(y);
    }
    return total / static_cast<double>(n);
  }

  double improvement(const std::array<double, 3>& y) const {
    double box = 1.0;
    for (int i = 0; i < 3; ++i) {
      if (!(y[i] > ref_[i])) return 0.0;
      box *= y[i] - ref_[i];
    }
    clipped_.clear();
    for (const auto& p : front_) {
      const std::array<double, 3> q{std::min(p[0], y[0]), std::min(p[1], y[1]),
                                    std::min(p[2], y[2])};
      if (q[0] > ref_[0] && q[1] > ref_[1] && q[2] > ref_[2]) clipped_.push_back(q);
    }
    return box - hv_detail::sweep_volume(clipped_, ref_, xy_scratch_);
  }

 private:
  std::vector<std::array<double, 3>> front_;
  std::array<double, 3> ref_;
  std::vector<double> z_;
  mutable std::vector<std::array<double, 3>> clipped_;
  mutable std::vector<std::array<double, 2>> xy_scratch_;
};

// EHVI of one unit-cube candidate under the fitted surrogates.
inline double ehvi(const SurrogateSet& surrogates, const std::array<double, 6>& x_unit,
                   const ParetoArchive& archive, int n_mc = 512, std::uint64_t seed = 0) {
  if (archive.size() == 0) throw std::invalid_argument("ehvi: empty archive");
  EhviEstimator estimator(archive.front_points(), archive.reference(), n_mc, seed);
  Eigen::VectorXd x(6);
  for (int i = 0; i < 6; ++i) x(i) = x_unit[i];
  const auto [mu, vu] = surrogates.utility.posterior(x);
  const auto [mf, vf] = surrogates.fairness.posterior(x);
  const auto [mp, vp] = surrogates.privacy.posterior(x);
  return estimator({mu, mf, mp}, {vu, vf, vp});
}

struct ProposeOptions {
  int candidates = 2048;    // quasi-random candidate pool
  int n_mc = 512;           // Monte-Carlo samples per EHVI estimate
  double jitter_sd = 0.05;  // spread of extra candidates around front configs
  bool include_front_jitter = true;  // off = pure quasi-random pool (ablation)
};

namespace mobo_detail {

inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, value = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    value += f * static_cast<double>(index % base);
    index /= base;
  }
  return value;
}

}  // namespace mobo_detail

// Next configuration to evaluate: argmax of MC-EHVI over a Halton candidate
// pool (rotated by a seeded shift) plus jittered copies of current front
// configs. Candidates are snapped through the domain (integers round) before
// scoring, so the chosen point is scored exactly where it would be evaluated.
// Ties break toward the lowest candidate index.
inline PipelineConfig propose_next(const SurrogateSet& surrogates, const ParetoArchive& archive,
                                   const Domains& domains, const PipelineConfig& base,
                                   std::uint64_t seed, const ProposeOptions& options = {}) {
  if (archive.size() == 0) throw std::invalid_argument("propose_next: empty archive");
  if (options.candidates < 1) throw std::invalid_argument("propose_next: need candidates >= 1");
  constexpr std::uint64_t kBases[6] = {2, 3, 5, 7, 11, 13};

  Rng rng(Rng::splitmix64(seed ^ 0x70726f70ULL));
  std::array<double, 6> shift;
  for (auto& s : shift) s = rng.uniform01();

  std::vector<std::array<double, 6>> pool;
  pool.reserve(static_cast<std::size_t>(options.candidates) + archive.front().size());
  for (int k = 0; k < options.candidates; ++k) {
    std::array<double, 6> u;
    for (int i = 0; i < 6; ++i) {
      const double h = mobo_detail::halton(static_cast<std::uint64_t>(k) + 1, kBases[i]) + shift[i];
      u[i] = h - std::floor(h);
    }
    pool.push_back(u);
  }
  if (options.include_front_jitter) {
    for (const auto idx : archive.front()) {
      auto u = domains.to_unit(archive.entries()[idx].config);
      for (auto& v : u) v = std::min(1.0, std::max(0.0, v + rng.gaussian(0.0, options.jitter_sd)));
      pool.push_back(u);
    }
  }

  EhviEstimator estimator(archive.front_points(), archive.reference(), options.n_mc,
                          Rng::splitmix64(seed ^ 0x65687669ULL));
  double best_score = -std::numeric_limits<double>::infinity();
  PipelineConfig best_config = base;
  for (const auto& u : pool) {
    const PipelineConfig candidate = domains.from_unit(u, base);
    const auto snapped = domains.to_unit(candidate);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = snapped[i];
    const auto [mu, vu] = surrogates.utility.posterior(x);
    const auto [mf, vf] = surrogates.fairness.posterior(x);
    const auto [mp, vp] = surrogates.privacy.posterior(x);
    const double score = estimator({mu, mf, mp}, {vu, vf, vp});
    if (score > best_score) {
      best_score = score;
      best_config = candidate;
    }
  }
  return best_config;
}

using EvaluateFn = std::function<ObjectiveTriple(const PipelineConfig&)>;

struct RunResult {
  ParetoArchive archive;
  std::vector<EvalRecord> records;  // in evaluation order, with wall times
};

namespace mobo_detail {

inline EvalRecord timed_eval(const EvaluateFn& evaluate, const PipelineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  ObjectiveTriple obj = evaluate(config);
  const auto t1 = std::chrono::steady_clock::now();
  return {config, obj, std::chrono::duration<double>(t1 - t0).count()};
}

inline void push(RunResult& result, EvalRecord record) {
  result.archive.add(record.config, record.objectives);
  result.records.push_back(std::move(record));
}

}  // namespace mobo_detail

struct MoboOptions {
  std::size_t budget = 250;  // total evaluations, initialization included
  std::size_t n_init = 16;
  std::uint64_t seed = 0;
  ProposeOptions propose;
};

// Surrogate-guided search: space-filling initialization, then fit-propose-
// evaluate until the budget is spent.
inline RunResult run_mobo(const EvaluateFn& evaluate, const Domains& domains,
                          const PipelineConfig& base, const MoboOptions& options) {
  domains.validate();
  if (options.n_init < 2) throw std::invalid_argument("run_mobo: n_init must be >= 2");
  if (options.budget < options.n_init)
    throw std::invalid_argument("run_mobo: budget must cover initialization");
  RunResult result;
  Rng rng(options.seed);
  for (std::size_t i = 0; i < options.n_init; ++i) {
    PipelineConfig config = domains.sample(rng, base);
    config.seed = rng.next_u64();
    mobo_detail::push(result, mobo_detail::timed_eval(evaluate, config));
  }
  std::size_t round = 0;
  while (result.archive.size() < options.budget) {
    const std::uint64_t round_seed = Rng::splitmix64(options.seed + 0x524f554eULL * (++round));
    const SurrogateSet surrogates = fit_surrogates(result.archive, domains, round_seed);
    PipelineConfig config =
        propose_next(surrogates, result.archive, domains, base, round_seed, options.propose);
    config.seed = rng.next_u64();
    mobo_detail::push(result, mobo_detail::timed_eval(evaluate, config));
  }
  return result;
}

// Independent uniform draws from the domain (log-uniform on log knobs).
inline RunResult run_random_search(const EvaluateFn& evaluate, const Domains& domains,
                                   const PipelineConfig& base, std::size_t budget,
                                   std::uint64_t seed) {
  domains.validate();
  if (budget == 0) throw std::invalid_argument("run_random_search: budget must be >= 1");
  RunResult result;
  Rng rng(seed);
  for (std::size_t i = 0; i < budget; ++i) {
    PipelineConfig config = domains.sample(rng, base);
    config.seed = rng.next_u64();
    mobo_detail::push(result, mobo_detail::timed_eval(evaluate, config));
  }
  return result;
}

// Full factorial over repair / noise / clip / epochs with `levels` points per
// axis (endpoints included, spaced in each knob's natural scale); batch size
// and learning rate stay fixed. levels=4 gives the 256-point reference grid.
inline RunResult run_grid_search(const EvaluateFn& evaluate, const Domains& domains,
                                 const PipelineConfig& base, int levels = 4,
                                 std::size_t fixed_batch = 32, double fixed_lr = 1e-2,
                                 std::uint64_t seed = 0) {
  domains.validate();
  if (levels < 2) throw std::invalid_argument("run_grid_search: need at least 2 levels");
  RunResult result;
  Rng rng(seed);
  const auto level = [&](const Domains::Range& r, int j) {
    return Domains::decode(r, static_cast<double>(j) / static_cast<double>(levels - 1));
  };
  for (int a = 0; a < levels; ++a)
    for (int b = 0; b < levels; ++b)
      for (int c = 0; c < levels; ++c)
        for (int d = 0; d < levels; ++d) {
          PipelineConfig config = base;
          config.repair_level = level(domains.repair_level, a);
          config.noise_multiplier = level(domains.noise_multiplier, b);
          config.clipping_norm = level(domains.clipping_norm, c);
          config.epochs = static_cast<std::size_t>(level(domains.epochs, d));
          config.batch_size = fixed_batch;
          config.learning_rate = fixed_lr;
          config.seed = rng.next_u64();
          mobo_detail::push(result, mobo_detail::timed_eval(evaluate, config));
        }
  return result;
}

}  // namespace pfairdp
