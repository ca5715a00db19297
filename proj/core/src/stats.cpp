// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg::stats {

namespace {

// Σ (t³ - t) over groups of tied values.
double tie_term(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        const auto t = static_cast<double>(j - i);
        term += t * t * t - t;
        i = j;
    }
    return term;
}

// Average ranks are multiples of 1/2; doubling makes them exact integers.
std::vector<int> doubled_ranks(std::span<const double> ranks) {
    std::vector<int> out(ranks.size());
    std::transform(ranks.begin(), ranks.end(), out.begin(),
                   [](double r) { return static_cast<int>(std::lround(2.0 * r)); });
    return out;
}

double two_sided_from_tails(double lower, double upper) {
    return std::clamp(2.0 * std::min(lower, upper), 0.0, 1.0);
}

}  // namespace

double two_sided_normal_p(double z) {
    if (!std::isfinite(z)) {
        return 0.0;
    }
    const boost::math::normal_distribution<double> normal;
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(z))), 0.0, 1.0);
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        throw StatsError("quantile of empty data");
    }
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SummaryStats summarize(std::span<const double> values) {
    if (values.empty()) {
        throw StatsError("summarize: no values");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    SummaryStats s;
    s.n = sorted.size();
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(s.n);
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    return s;
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) {
            ++j;
        }
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j;
    }
    return ranks;
}

TestResult wilcoxon_signed_rank(std::span<const double> differences) {
    std::vector<double> nonzero;
    for (const double d : differences) {
        if (d != 0.0) {
            nonzero.push_back(d);
        }
    }
    if (nonzero.empty()) {
        throw StatsError("wilcoxon_signed_rank: no nonzero pairs");
    }
    const std::size_t n = nonzero.size();
    std::vector<double> magnitude(n);
    std::transform(nonzero.begin(), nonzero.end(), magnitude.begin(), [](double d) { return std::abs(d); });
    const auto ranks = average_ranks(magnitude);

    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (nonzero[i] > 0.0) {
            w_plus += ranks[i];
        }
    }

    TestResult result;
    result.statistic = w_plus;
    const auto nd = static_cast<double>(n);
    if (n <= kSignedRankExactMax) {
        // Null: each rank carries a + sign independently with probability 1/2.
        const auto r2 = doubled_ranks(ranks);
        const int total = std::accumulate(r2.begin(), r2.end(), 0);
        std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
        ways[0] = 1.0;
        for (const int r : r2) {
            for (int s = total; s >= r; --s) {
                ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r)];
            }
        }
        const double denom = std::ldexp(1.0, static_cast<int>(n));
        const auto observed = static_cast<int>(std::lround(2.0 * w_plus));
        double lower = 0.0;
        double upper = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= observed) {
                lower += ways[static_cast<std::size_t>(s)];
            }
            if (s >= observed) {
                upper += ways[static_cast<std::size_t>(s)];
            }
        }
        result.p_value = two_sided_from_tails(lower / denom, upper / denom);
        result.exact = true;
        return result;
    }

    const double mean = nd * (nd + 1.0) / 4.0;
    const double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term(magnitude) / 48.0;
    const double delta = w_plus - mean;
    if (variance <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    const double corrected = delta - (delta > 0 ? 0.5 : (delta < 0 ? -0.5 : 0.0));
    result.p_value = two_sided_normal_p(corrected / std::sqrt(variance));
    return result;
}

TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw StatsError("wilcoxon_rank_sum: both groups must be nonempty");
    }
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::size_t n = na + nb;
    const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(na), 0.0);
    const auto nad = static_cast<double>(na);
    const auto nbd = static_cast<double>(nb);

    TestResult result;
    result.statistic = rank_sum_a - nad * (nad + 1.0) / 2.0;

    if (n <= kRankSumExactMax) {
        // ways[k][s]: subsets of size k whose doubled ranks sum to s.
        const auto r2 = doubled_ranks(ranks);
        const int total = std::accumulate(r2.begin(), r2.end(), 0);
        std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
        ways[0][0] = 1.0;
        for (const int r : r2) {
            for (std::size_t k = na; k >= 1; --k) {
                for (int s = total; s >= r; --s) {
                    ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - r)];
                }
            }
        }
        const auto observed = static_cast<int>(std::lround(2.0 * rank_sum_a));
        double lower = 0.0;
        double upper = 0.0;
        double all = 0.0;
        for (int s = 0; s <= total; ++s) {
            const double w = ways[na][static_cast<std::size_t>(s)];
            all += w;
            if (s <= observed) {
                lower += w;
            }
            if (s >= observed) {
                upper += w;
            }
        }
        result.p_value = two_sided_from_tails(lower / all, upper / all);
        result.exact = true;
        return result;
    }

    const auto nd = static_cast<double>(n);
    const double mean = nad * nbd / 2.0;
    const double variance = nad * nbd / 12.0 * ((nd + 1.0) - tie_term(pooled) / (nd * (nd - 1.0)));
    if (variance <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    const double delta = result.statistic - mean;
    const double corrected = delta - (delta > 0 ? 0.5 : (delta < 0 ? -0.5 : 0.0));
    result.p_value = two_sided_normal_p(corrected / std::sqrt(variance));
    return result;
}

Correlation spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw StatsError("spearman_rho: sequences differ in length");
    }
    if (x.size() < 3) {
        throw StatsError("spearman_rho: need at least 3 observations");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw StatsError("spearman_rho: a sequence is constant");
    }
    Correlation c;
    c.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    if (std::abs(c.rho) >= 1.0) {
        c.p_value = 0.0;
        return c;
    }
    const double df = n - 2.0;
    const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
    const boost::math::students_t_distribution<double> student(df);
    c.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(student, std::abs(t))), 0.0, 1.0);
    return c;
}

ThresholdResult maxstat_threshold(std::span<const double> covariate, std::span<const double> outcome,
                                  const MaxstatOptions& options) {
    if (covariate.size() != outcome.size()) {
        throw StatsError("maxstat_threshold: sequences differ in length");
    }
    const std::size_t n = covariate.size();
    if (n < 20) {
        throw StatsError(fmt::format("maxstat_threshold: need at least 20 observations, got {}", n));
    }
    const auto ranks = average_ranks(outcome);
    const auto nd = static_cast<double>(n);
    const double mean_rank = std::accumulate(ranks.begin(), ranks.end(), 0.0) / nd;
    double spread = 0.0;
    for (const double r : ranks) {
        spread += (r - mean_rank) * (r - mean_rank);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return covariate[a] < covariate[b]; });

    ThresholdResult result;
    // Sweep ascending covariate values; before reaching the group of value c,
    // `below` holds every observation with covariate < c.
    double below_rank_sum = 0.0;
    std::size_t below = 0;
    for (std::size_t i = 0; i < n;) {
        const double c = covariate[order[i]];
        const double prop = static_cast<double>(below) / nd;
        if (below > 0 && prop >= options.min_prop && prop <= options.max_prop) {
            const auto m = static_cast<double>(below);
            const double expected = m * mean_rank;
            const double variance = m * (nd - m) / (nd * (nd - 1.0)) * spread;
            const double z = variance > 0.0 ? (below_rank_sum - expected) / std::sqrt(variance) : 0.0;
            CutpointStatistic stat;
            stat.cutpoint = c;
            stat.n_below = below;
            stat.n_above = n - below;
            stat.z = z;
            stat.p_unadjusted = two_sided_normal_p(z);
            result.candidates.push_back(stat);
        }
        while (i < n && covariate[order[i]] == c) {
            below_rank_sum += ranks[order[i]];
            ++below;
            ++i;
        }
    }
    if (result.candidates.empty()) {
        throw StatsError("maxstat_threshold: no admissible cutpoint in the quantile band");
    }

    const auto k = static_cast<double>(result.candidates.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        auto& cand = result.candidates[i];
        cand.p_bonferroni = std::min(1.0, cand.p_unadjusted * k);
        if (std::abs(cand.z) > std::abs(result.candidates[best].z)) {
            best = i;
        }
    }
    result.threshold = result.candidates[best].cutpoint;
    result.max_abs_z = std::abs(result.candidates[best].z);
    result.significant = result.candidates[best].p_bonferroni < options.alpha;
    return result;
}

}  // namespace promptseg::stats
