#pragma once

#include <functional>
#include <span>
#include <vector>

namespace radial::stats {

double normal_cdf(double x);
double normal_pdf(double x);
double half_normal_cdf(double x);
double half_normal_pdf(double x);

double mean(std::span<const double> xs);
/// Unbiased (n - 1) sample variance.
double variance(std::span<const double> xs);
double stddev(std::span<const double> xs);
/// Sample excess kurtosis (moment estimator, normal = 0).
double excess_kurtosis(std::span<const double> xs);
/// Sample Pearson correlation.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
/// Asymptotic KS critical value sqrt(-ln(alpha / 2) / 2) / sqrt(n).
double ks_critical_value(std::size_t n, double alpha);

}  // namespace radial::stats
