// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace promptseg::stats {

struct SummaryStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

/// Quantile of sorted data by linear interpolation between order statistics,
/// h = (n - 1)·p.
double quantile_sorted(std::span<const double> sorted, double p);

/// Mean, median and quartiles. Throws StatsError on empty input.
SummaryStats summarize(std::span<const double> values);

/// 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact = false;
};

inline constexpr std::size_t kSignedRankExactMax = 25;
inline constexpr std::size_t kRankSumExactMax = 12;

/// Wilcoxon signed-rank test on paired differences. Zeros are dropped; the
/// statistic is the sum of ranks of positive differences. Exact null
/// distribution (conditional on tied ranks) for n <= 25, otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction. Throws StatsError when every difference is zero.
TestResult wilcoxon_signed_rank(std::span<const double> differences);

/// Wilcoxon rank-sum (Mann-Whitney) test. The statistic is U for group `a`,
/// R_a - n_a(n_a + 1)/2. Exact for n_a + n_b <= 12, otherwise the
/// tie-corrected normal approximation with continuity correction.
TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);

struct Correlation {
    double rho = 0.0;
    double p_value = 1.0;
};

/// Pearson correlation of average ranks; p from the t distribution with
/// n - 2 degrees of freedom. Needs n >= 3 and equal lengths.
Correlation spearman_rho(std::span<const double> x, std::span<const double> y);

struct MaxstatOptions {
    double min_prop = 0.1;
    double max_prop = 0.9;
    double alpha = 0.05;
};

struct CutpointStatistic {
    double cutpoint = 0.0;
    std::size_t n_below = 0;  // covariate < cutpoint
    std::size_t n_above = 0;  // covariate >= cutpoint
    double z = 0.0;
    double p_unadjusted = 1.0;
    /// min(1, p · number of candidates); a conservative bound, not the
    /// exact distribution of the maximum.
    double p_bonferroni = 1.0;
};

struct ThresholdResult {
    /// Minimum covariate value of the upper group.
    double threshold = 0.0;
    double max_abs_z = 0.0;
    bool significant = false;  // p_bonferroni of the winner < alpha
    std::vector<CutpointStatistic> candidates;
};

/// Maximally selected two-sample rank statistic. Candidates are the distinct
/// covariate values c whose split {x < c} / {x >= c} puts a fraction of
/// observations in [min_prop, max_prop] below. Returns the candidate with
/// the largest |Z| of the standardized rank sum of `outcome` below the cut
/// (ties: smaller cutpoint). Needs >= 20 observations; throws StatsError
/// when no candidate is admissible.
ThresholdResult maxstat_threshold(std::span<const double> covariate, std::span<const double> outcome,
                                  const MaxstatOptions& options = {});

/// Two-sided normal tail probability 2·(1 - Φ(|z|)).
double two_sided_normal_p(double z);

}  // namespace promptseg::stats
