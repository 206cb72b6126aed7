#pragma once

#include <span>
#include <vector>

namespace elicit::stats {

double chi2_sf(double x, double dof);
double normal_cdf(double x);
double normal_quantile(double p);

double mean(std::span<const double> xs);
/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sd(std::span<const double> xs);
double median(std::vector<double> xs);
/// Type-7 (linear interpolation) quantile.
double quantile(std::vector<double> xs, double prob);

/// Standard bivariate normal CDF Pr(X <= h, Y <= k) with correlation r.
double bivariate_normal_cdf(double h, double k, double r);

}  // namespace elicit::stats
