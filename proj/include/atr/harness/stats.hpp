// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------
//
// Small statistics toolbox used by the scenario checks.

#pragma once

#include <span>
#include <vector>

namespace atr::stats
{

double mean(std::span<const double> x);
double stddev(std::span<const double> x); // sample standard deviation (n - 1)
double median(std::span<const double> x);

// Linear interpolation between order statistics, q in [0, 1].
double quantile(std::span<const double> x, double q);

// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

struct linear_fit
{
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

linear_fit fit_line(std::span<const double> x, std::span<const double> y);

struct rank_test
{
    double u = 0.0;       // U statistic of the first sample
    double z = 0.0;       // normal approximation with tie and continuity correction
    double p_value = 1.0; // two-sided
};

// Mann-Whitney U (Wilcoxon rank-sum) test.
rank_test mann_whitney(std::span<const double> a, std::span<const double> b);

} // namespace atr::stats
