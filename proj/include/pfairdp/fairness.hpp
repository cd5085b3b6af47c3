#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pfairdp/dataset.hpp"

namespace pfairdp {

namespace detail {

// Favorable rate per group; throws if either group is absent.
inline std::array<double, 2> group_rates(const std::vector<int>& outcomes,
                                         const std::vector<int>& protected_group) {
  if (outcomes.size() != protected_group.size())
    throw std::invalid_argument("group_rates: length mismatch");
  double favorable[2] = {0, 0};
  double count[2] = {0, 0};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const int g = protected_group[i];
    if (g != 0 && g != 1) throw std::invalid_argument("group_rates: protected values must be 0/1");
    if (outcomes[i] != 0 && outcomes[i] != 1)
      throw std::invalid_argument("group_rates: outcomes must be 0/1");
    count[g] += 1;
    favorable[g] += outcomes[i];
  }
  if (count[0] == 0 || count[1] == 0)
    throw std::invalid_argument("group_rates: both protected groups must be present");
  return {favorable[0] / count[0], favorable[1] / count[1]};
}

}  // namespace detail

// SPD = P(favorable | privileged) - P(favorable | unprivileged). Positive
// values mean the privileged group is favored.
inline double statistical_parity_difference(const std::vector<int>& outcomes,
                                            const std::vector<int>& protected_group) {
  const auto r = detail::group_rates(outcomes, protected_group);
  return r[1] - r[0];
}

// DI = P(favorable | unprivileged) / P(favorable | privileged).
inline double disparate_impact(const std::vector<int>& outcomes,
                               const std::vector<int>& protected_group) {
  const auto r = detail::group_rates(outcomes, protected_group);
  if (r[1] == 0.0) throw std::domain_error("disparate_impact: privileged favorable rate is zero");
  return r[0] / r[1];
}

struct FairnessReport {
  double spd = 0.0;
  double di = 0.0;
  double risk_difference = 0.0;  // |SPD|
};

inline FairnessReport fairness_report(const std::vector<int>& outcomes,
                                      const std::vector<int>& protected_group) {
  FairnessReport rep;
  rep.spd = statistical_parity_difference(outcomes, protected_group);
  const auto r = detail::group_rates(outcomes, protected_group);
  rep.di = r[1] > 0.0 ? r[0] / r[1] : std::numeric_limits<double>::infinity();
  rep.risk_difference = std::abs(rep.spd);
  return rep;
}

// Disparate-impact removal by quantile repair. For each continuous column the
// per-group empirical distributions are recorded on the training split; a
// value v in group g maps to its mid-distribution quantile
//   u = (#below + 0.5 * #equal) / group_size,
// and is moved toward the median distribution
//   Q_med(u) = (Q_group0(u) + Q_group1(u)) / 2,
// where each Q interpolates linearly between order statistics placed at
// quantiles (j + 0.5) / m and clamps beyond them. The repaired value is
//   (1 - level) * v + level * Q_med(u),
// so level 0 is the identity and level 1 gives both groups the same feature
// distribution (identical multisets when group sizes match). Rank order within
// each group is preserved because both maps are monotone. One-hot columns are
// untouched. Fitting on train and reapplying the same maps to dev/test keeps
// the splits consistent.
class DirRepairer {
 public:
  explicit DirRepairer(const Dataset& train) {
    train.validate();
    for (std::size_t c = 0; c < train.dim(); ++c) {
      if (train.schema[c].kind != ColumnKind::continuous) continue;
      PerColumn col;
      col.index = c;
      for (std::size_t i = 0; i < train.size(); ++i)
        col.sorted[train.protected_group[i]].push_back(train.features.at(i, c));
      for (auto& s : col.sorted) {
        if (s.empty())
          throw std::invalid_argument("DirRepairer: a protected group has no training rows");
        std::sort(s.begin(), s.end());
      }
      columns_.push_back(std::move(col));
    }
  }

  Dataset apply(const Dataset& data, double repair_level) const {
    if (!(repair_level >= 0.0 && repair_level <= 1.0))
      throw std::invalid_argument("DirRepairer: repair level must be in [0, 1]");
    Dataset out = data;
    if (repair_level == 0.0) return out;
    for (const auto& col : columns_) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out.features.at(i, col.index);
        const double u = quantile_of(col.sorted[out.protected_group[i]], v);
        const double target =
            0.5 * (value_at(col.sorted[0], u) + value_at(col.sorted[1], u));
        out.features.at(i, col.index) = (1.0 - repair_level) * v + repair_level * target;
      }
    }
    return out;
  }

 private:
  struct PerColumn {
    std::size_t index = 0;
    std::array<std::vector<double>, 2> sorted;
  };

  // Mid-distribution quantile of v in a sorted sample; values between training
  // points interpolate between neighboring mid-quantiles, values outside clamp.
  static double quantile_of(const std::vector<double>& s, double v) {
    const auto m = static_cast<double>(s.size());
    const auto lo = std::lower_bound(s.begin(), s.end(), v);
    const auto hi = std::upper_bound(s.begin(), s.end(), v);
    const double below = static_cast<double>(lo - s.begin());
    const double equal = static_cast<double>(hi - lo);
    if (equal > 0) return (below + 0.5 * equal) / m;
    if (lo == s.begin()) return 0.0;
    if (lo == s.end()) return 1.0;
    const double a = *(lo - 1);
    const double b = *lo;
    const double ua = (below - 1 + 0.5) / m;
    const double ub = (below + 0.5) / m;
    return ua + (ub - ua) * (v - a) / (b - a);
  }

  // Inverse map: order statistic j sits at quantile (j + 0.5) / m, linear in
  // between, clamped to the extreme values outside.
  static double value_at(const std::vector<double>& s, double u) {
    const auto m = static_cast<double>(s.size());
    const double idx = u * m - 0.5;
    if (idx <= 0.0) return s.front();
    if (idx >= m - 1) return s.back();
    const auto j = static_cast<std::size_t>(idx);
    const double frac = idx - static_cast<double>(j);
    return s[j] + frac * (s[j + 1] - s[j]);
  }

  std::vector<PerColumn> columns_;
};

// Fit-and-apply on the same data (the common single-split form).
inline Dataset dir_repair(const Dataset& data, double repair_level) {
  return DirRepairer(data).apply(data, repair_level);
}

// Reject-option band around the decision threshold. Scores inside
// [threshold - margin, threshold + margin] flip to favorable for the
// unprivileged group and unfavorable for the privileged group; a zero margin
// means an empty band, i.e. plain thresholding with ties going favorable.
struct RocParams {
  double classification_threshold = 0.5;
  double margin = 0.0;

  void validate() const {
    if (!(classification_threshold > 0.0 && classification_threshold < 1.0))
      throw std::invalid_argument("RocParams: threshold must be in (0, 1)");
    if (margin < 0.0) throw std::invalid_argument("RocParams: margin must be >= 0");
    if (margin > 0.0 &&
        !(classification_threshold - margin > 0.0 && classification_threshold + margin < 1.0))
      throw std::invalid_argument("RocParams: band must sit inside (0, 1)");
  }
};

inline std::vector<int> roc_postprocess(const std::vector<double>& scores,
                                        const std::vector<int>& protected_group,
                                        const RocParams& params) {
  params.validate();
  if (scores.size() != protected_group.size())
    throw std::invalid_argument("roc_postprocess: length mismatch");
  std::vector<int> preds(scores.size());
  const double t = params.classification_threshold;
  const double m = params.margin;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (!(s > 0.0 && s < 1.0))
      throw std::invalid_argument("roc_postprocess: scores must lie strictly inside (0, 1)");
    if (m > 0.0 && s >= t - m && s <= t + m)
      preds[i] = protected_group[i] == 0 ? 1 : 0;
    else
      preds[i] = s >= t ? 1 : 0;
  }
  return preds;
}

struct RocGridSpec {
  std::vector<double> thresholds;
  std::vector<double> margins;

  // Thresholds 0.01..0.99 step 0.01; margins 0 and 0.01..0.25 step 0.01.
  static RocGridSpec standard() {
    RocGridSpec g;
    for (int i = 1; i <= 99; ++i) g.thresholds.push_back(i / 100.0);
    for (int i = 0; i <= 25; ++i) g.margins.push_back(i / 100.0);
    return g;
  }
};

// Grid fit on held-out scores: minimize |SPD|, break ties toward higher
// accuracy, then toward the smaller margin. Pairs whose band would poke out of
// (0, 1) are skipped.
inline RocParams fit_roc_params(const std::vector<double>& scores,
                                const std::vector<int>& protected_group,
                                const std::vector<int>& labels,
                                const RocGridSpec& grid = RocGridSpec::standard()) {
  if (scores.size() != labels.size() || scores.size() != protected_group.size())
    throw std::invalid_argument("fit_roc_params: length mismatch");
  if (scores.empty()) throw std::invalid_argument("fit_roc_params: empty inputs");

  bool found = false;
  RocParams best;
  double best_spd = 0.0, best_acc = 0.0;
  for (const double t : grid.thresholds) {
    for (const double m : grid.margins) {
      RocParams p{t, m};
      if (m > 0.0 && !(t - m > 0.0 && t + m < 1.0)) continue;
      const auto preds = roc_postprocess(scores, protected_group, p);
      const double spd = std::abs(statistical_parity_difference(preds, protected_group));
      double correct = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
      const double acc = correct / static_cast<double>(preds.size());
      const bool better = !found || spd < best_spd ||
                          (spd == best_spd && acc > best_acc) ||
                          (spd == best_spd && acc == best_acc && m < best.margin);
      if (better) {
        found = true;
        best = p;
        best_spd = spd;
        best_acc = acc;
      }
    }
  }
  if (!found) throw std::invalid_argument("fit_roc_params: empty parameter grid");
  return best;
}

}  // namespace pfairdp
