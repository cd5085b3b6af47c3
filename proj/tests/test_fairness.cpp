#include "pfairdp/fairness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pfairdp/dataset.hpp"
#include "pfairdp/rng.hpp"

namespace pf = pfairdp;

namespace {

// Single-column dataset wrapper for repair tests.
pf::Dataset one_column(const std::vector<double>& values, const std::vector<int>& groups) {
  pf::Dataset d;
  d.schema = {{"x", pf::ColumnKind::continuous, "x"}};
  d.features = pf::Matrix(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) d.features.at(i, 0) = values[i];
  d.protected_group = groups;
  d.labels.assign(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); i += 2) d.labels[i] = 1;
  return d;
}

std::vector<double> column(const pf::Dataset& d, std::size_t c = 0) {
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = d.features.at(i, c);
  return out;
}

}  // namespace

TEST(ParityMetrics, HandComputedRatesAndSigns) {
  // Privileged (1): 4/5 favorable. Unprivileged (0): 2/4 favorable.
  const std::vector<int> outcomes = {1, 1, 1, 1, 0, 1, 1, 0, 0};
  const std::vector<int> groups = {1, 1, 1, 1, 1, 0, 0, 0, 0};
  EXPECT_NEAR(pf::statistical_parity_difference(outcomes, groups), 0.8 - 0.5, 1e-15);
  EXPECT_NEAR(pf::disparate_impact(outcomes, groups), 0.5 / 0.8, 1e-15);
  const auto rep = pf::fairness_report(outcomes, groups);
  EXPECT_NEAR(rep.spd, 0.3, 1e-15);
  EXPECT_NEAR(rep.di, 0.625, 1e-15);
  EXPECT_NEAR(rep.risk_difference, 0.3, 1e-15);

  // Balanced outcomes: SPD 0, DI 1.
  EXPECT_DOUBLE_EQ(pf::statistical_parity_difference({1, 0, 1, 0}, {1, 1, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(pf::disparate_impact({1, 0, 1, 0}, {1, 1, 0, 0}), 1.0);

  // Sign convention: favoring the unprivileged group makes SPD negative.
  EXPECT_LT(pf::statistical_parity_difference({0, 0, 1, 1}, {1, 1, 0, 0}), 0.0);
}

TEST(ParityMetrics, RejectsBadInputs) {
  EXPECT_THROW(pf::statistical_parity_difference({1, 0}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(pf::statistical_parity_difference({1, 0, 1}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(pf::statistical_parity_difference({1, 2}, {1, 0}), std::invalid_argument);
  EXPECT_THROW(pf::statistical_parity_difference({1, 0}, {1, 2}), std::invalid_argument);
  EXPECT_THROW(pf::disparate_impact({0, 0, 1, 0}, {1, 1, 0, 0}), std::domain_error);
  // fairness_report tolerates a zero privileged rate via infinite DI.
  const auto rep = pf::fairness_report({0, 0, 1, 0}, {1, 1, 0, 0});
  EXPECT_TRUE(std::isinf(rep.di));
}

TEST(QuantileRepair, WorkedExampleFullAndHalfStrength) {
  // Group 0 holds {1,2,3}, group 1 holds {11,12,13}. The median distribution
  // averages matching order statistics: {6,7,8}.
  const auto data = one_column({1, 2, 3, 11, 12, 13}, {0, 0, 0, 1, 1, 1});
  const auto full = pf::dir_repair(data, 1.0);
  EXPECT_EQ(column(full), (std::vector<double>{6, 7, 8, 6, 7, 8}));
  const auto half = pf::dir_repair(data, 0.5);
  EXPECT_EQ(column(half), (std::vector<double>{3.5, 4.5, 5.5, 8.5, 9.5, 10.5}));
  const auto off = pf::dir_repair(data, 0.0);
  EXPECT_EQ(column(off), column(data));
}

TEST(QuantileRepair, FullRepairEqualizesGroupMultisets) {
  pf::Rng rng(6);
  std::vector<double> vals(120);
  std::vector<int> groups(120);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    groups[i] = i < 60 ? 0 : 1;
    vals[i] = groups[i] == 0 ? rng.gaussian(0.0, 1.0) : rng.gaussian(2.5, 0.5);
  }
  const auto repaired = pf::dir_repair(one_column(vals, groups), 1.0);
  std::vector<double> g0, g1;
  for (std::size_t i = 0; i < vals.size(); ++i)
    (groups[i] == 0 ? g0 : g1).push_back(repaired.features.at(i, 0));
  std::sort(g0.begin(), g0.end());
  std::sort(g1.begin(), g1.end());
  ASSERT_EQ(g0.size(), g1.size());
  for (std::size_t i = 0; i < g0.size(); ++i) EXPECT_NEAR(g0[i], g1[i], 1e-9);
}

TEST(QuantileRepair, PreservesWithinGroupOrderAtEveryLevel) {
  pf::Rng rng(8);
  std::vector<double> vals(90);
  std::vector<int> groups(90);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    groups[i] = static_cast<int>(rng.uniform01() < 0.4);
    vals[i] = groups[i] == 0 ? rng.gaussian(0.0, 1.0) : rng.gaussian(1.5, 2.0);
  }
  const auto data = one_column(vals, groups);
  for (const double level : {0.3, 0.7, 1.0}) {
    const auto repaired = pf::dir_repair(data, level);
    for (std::size_t i = 0; i < vals.size(); ++i)
      for (std::size_t j = 0; j < vals.size(); ++j) {
        if (groups[i] != groups[j] || !(vals[i] < vals[j])) continue;
        EXPECT_LE(repaired.features.at(i, 0), repaired.features.at(j, 0) + 1e-12)
            << "level " << level;
      }
  }
}

TEST(QuantileRepair, MovesFeatureDisparityTowardParity) {
  // A feature-threshold decision proxy: how often each group clears the
  // pooled median. Repair must pull the group pass rates together
  // monotonically in the level.
  pf::Rng rng(14);
  const std::size_t n = 2000;
  std::vector<double> vals(n);
  std::vector<int> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    groups[i] = i % 2;
    vals[i] = groups[i] == 0 ? rng.gaussian(0.0, 1.0) : rng.gaussian(1.2, 1.0);
  }
  const auto data = one_column(vals, groups);
  const auto gap_at = [&](double level) {
    const auto repaired = pf::dir_repair(data, level);
    const auto v = column(repaired);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[n / 2];
    double pass[2] = {0, 0}, count[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      count[groups[i]] += 1;
      pass[groups[i]] += v[i] > median;
    }
    return std::abs(pass[1] / count[1] - pass[0] / count[0]);
  };
  const double g0 = gap_at(0.0), g5 = gap_at(0.5), g1 = gap_at(1.0);
  EXPECT_GT(g0, 0.3);        // groups start far apart
  EXPECT_LT(g5, g0 + 1e-9);  // halfway helps
  EXPECT_LT(g1, g5 + 1e-9);  // full repair helps most
  EXPECT_LT(g1, 0.02);       // and lands at (near) parity
}

TEST(QuantileRepair, FitOnTrainAppliesConsistentlyElsewhere) {
  // Unseen values between training points must interpolate monotonically and
  // extremes must clamp to the training envelope's repaired ends.
  const auto train = one_column({1, 2, 3, 11, 12, 13}, {0, 0, 0, 1, 1, 1});
  const pf::DirRepairer repairer(train);
  const auto probe = one_column({1.5, 2.5, -100.0, 100.0}, {0, 0, 0, 0});
  const auto mapped = pf::DirRepairer(train).apply(probe, 1.0);
  const auto out = column(mapped);
  EXPECT_GT(out[1], out[0]);      // order preserved between train points
  EXPECT_DOUBLE_EQ(out[2], 6.0);  // below everything -> lowest repaired value
  EXPECT_DOUBLE_EQ(out[3], 8.0);  // above everything -> highest repaired value
  EXPECT_GE(out[0], 6.0);
  EXPECT_LE(out[1], 8.0);
}

TEST(QuantileRepair, IgnoresOneHotColumnsAndValidatesLevel) {
  pf::Dataset d;
  d.schema = {{"x", pf::ColumnKind::continuous, "x"}, {"c=a", pf::ColumnKind::one_hot, "c"}};
  d.features = pf::Matrix(4, 2);
  const double xs[4] = {0.0, 1.0, 10.0, 11.0};
  for (std::size_t i = 0; i < 4; ++i) {
    d.features.at(i, 0) = xs[i];
    d.features.at(i, 1) = static_cast<double>(i % 2);
  }
  d.labels = {0, 1, 0, 1};
  d.protected_group = {0, 0, 1, 1};
  const auto repaired = pf::dir_repair(d, 1.0);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_DOUBLE_EQ(repaired.features.at(i, 1), static_cast<double>(i % 2));
  EXPECT_NE(repaired.features.at(0, 0), 0.0);  // continuous column did move
  EXPECT_THROW(pf::dir_repair(d, -0.1), std::invalid_argument);
  EXPECT_THROW(pf::dir_repair(d, 1.1), std::invalid_argument);
}

TEST(RejectOption, ZeroMarginIsPlainThresholdingWithTiesFavorable) {
  const std::vector<double> scores = {0.2, 0.5, 0.7, 0.49999, 0.500001};
  const std::vector<int> groups = {0, 1, 0, 1, 0};
  pf::RocParams p;
  p.classification_threshold = 0.5;
  p.margin = 0.0;
  const auto preds = pf::roc_postprocess(scores, groups, p);
  EXPECT_EQ(preds, (std::vector<int>{0, 1, 1, 0, 1}));  // score == t counts favorable
}

TEST(RejectOption, BandFlipsByGroupMembership) {
  // Band [0.4, 0.6]: inside it, unprivileged -> 1, privileged -> 0.
  pf::RocParams p;
  p.classification_threshold = 0.5;
  p.margin = 0.1;
  const std::vector<double> scores = {0.40, 0.40, 0.60, 0.60, 0.39, 0.61, 0.5, 0.5};
  const std::vector<int> groups = {0, 1, 0, 1, 0, 1, 0, 1};
  const auto preds = pf::roc_postprocess(scores, groups, p);
  EXPECT_EQ(preds, (std::vector<int>{1, 0, 1, 0, 0, 1, 1, 0}));
}

TEST(RejectOption, ValidatesParamsAndScores) {
  pf::RocParams bad_t;
  bad_t.classification_threshold = 0.0;
  EXPECT_THROW(bad_t.validate(), std::invalid_argument);
  pf::RocParams bad_m;
  bad_m.classification_threshold = 0.5;
  bad_m.margin = -0.01;
  EXPECT_THROW(bad_m.validate(), std::invalid_argument);
  pf::RocParams poking_out;
  poking_out.classification_threshold = 0.1;
  poking_out.margin = 0.2;  // band [-0.1, 0.3] leaves (0, 1)
  EXPECT_THROW(poking_out.validate(), std::invalid_argument);
  pf::RocParams ok;
  ok.classification_threshold = 0.1;
  ok.margin = 0.05;
  ok.validate();

  pf::RocParams p;
  EXPECT_THROW(pf::roc_postprocess({0.0}, {0}, p), std::invalid_argument);   // score not in (0,1)
  EXPECT_THROW(pf::roc_postprocess({1.0}, {0}, p), std::invalid_argument);
  EXPECT_THROW(pf::roc_postprocess({0.5, 0.5}, {0}, p), std::invalid_argument);  // length mismatch
}

TEST(RejectOptionFit, SymmetricGroupsSelectTheEmptyBand) {
  // Identical score/label multisets per group: every (t, m=0) pair scores
  // |SPD| = 0, while any band with points inside shifts the groups apart.
  // The fit must therefore land on margin 0 and the accuracy-best threshold.
  std::vector<double> scores;
  std::vector<int> groups, labels;
  const double vals[] = {0.1, 0.3, 0.45, 0.55, 0.7, 0.9};
  const int ys[] = {0, 0, 0, 1, 1, 1};
  for (int g = 0; g < 2; ++g)
    for (int i = 0; i < 6; ++i) {
      scores.push_back(vals[i]);
      groups.push_back(g);
      labels.push_back(ys[i]);
    }
  const auto p = pf::fit_roc_params(scores, groups, labels);
  EXPECT_DOUBLE_EQ(p.margin, 0.0);
  // Any threshold in (0.45, 0.55] classifies perfectly; the grid scans
  // ascending and prefers nothing once |SPD| and accuracy tie, so the first
  // perfect threshold wins: t = 0.46.
  EXPECT_DOUBLE_EQ(p.classification_threshold, 0.46);
  const auto preds = pf::roc_postprocess(scores, groups, p);
  double correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  EXPECT_DOUBLE_EQ(correct / static_cast<double>(preds.size()), 1.0);
}

TEST(RejectOptionFit, PrefersAccuracyAmongEqualParity) {
  // Group-balanced scores make |SPD| = 0 everywhere with m = 0, but only
  // thresholds below 0.35 classify the high scorers of both groups correctly.
  const std::vector<double> scores = {0.2, 0.4, 0.2, 0.4};
  const std::vector<int> groups = {0, 0, 1, 1};
  const std::vector<int> labels = {0, 1, 0, 1};
  const auto p = pf::fit_roc_params(scores, groups, labels);
  EXPECT_DOUBLE_EQ(p.margin, 0.0);
  EXPECT_GT(p.classification_threshold, 0.2);
  EXPECT_LE(p.classification_threshold, 0.4);
  const auto preds = pf::roc_postprocess(scores, groups, p);
  EXPECT_EQ(preds, labels);
}

TEST(RejectOptionFit, ReducesParityGapOnBiasedScores) {
  // Privileged scores sit above the threshold, unprivileged just below: the
  // raw 0.5 rule yields |SPD| = 1; the fitted band must shrink it to 0.
  std::vector<double> scores;
  std::vector<int> groups, labels;
  pf::Rng rng(19);
  for (int i = 0; i < 40; ++i) {
    const int g = i % 2;
    scores.push_back(g == 1 ? rng.uniform(0.52, 0.60) : rng.uniform(0.40, 0.48));
    groups.push_back(g);
    labels.push_back(i % 4 < 2 ? 0 : 1);  // labels uncorrelated with group
  }
  const auto before = pf::roc_postprocess(scores, groups, pf::RocParams{0.5, 0.0});
  EXPECT_DOUBLE_EQ(std::abs(pf::statistical_parity_difference(before, groups)), 1.0);
  const auto p = pf::fit_roc_params(scores, groups, labels);
  const auto after = pf::roc_postprocess(scores, groups, p);
  EXPECT_LE(std::abs(pf::statistical_parity_difference(after, groups)), 0.05 + 1e-12);
}

TEST(RejectOptionFit, ValidatesInputs) {
  EXPECT_THROW(pf::fit_roc_params({}, {}, {}), std::invalid_argument);
  EXPECT_THROW(pf::fit_roc_params({0.5}, {0}, {0, 1}), std::invalid_argument);
  pf::RocGridSpec empty_grid;
  EXPECT_THROW(pf::fit_roc_params({0.5, 0.5}, {0, 1}, {0, 1}, empty_grid),
               std::invalid_argument);
}
