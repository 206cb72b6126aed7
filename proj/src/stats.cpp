#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace elicit::stats {

double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return std::nan("");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

double quantile(std::vector<double> xs, double prob) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

// Phi2(h,k;r) = Phi(h)Phi(k) + integral_0^r phi2(h,k;s) ds.
double bivariate_normal_cdf(double h, double k, double r) {
  const double base = normal_cdf(h) * normal_cdf(k);
  if (r == 0.0) return base;
  auto density = [&](double s) {
    const double one_minus = 1.0 - s * s;
    return std::exp(-(h * h - 2.0 * s * h * k + k * k) / (2.0 * one_minus)) /
           (2.0 * std::numbers::pi * std::sqrt(one_minus));
  };
  const double integral =
      boost::math::quadrature::gauss<double, 30>::integrate(density, 0.0, r);
  return base + integral;
}

}  // namespace elicit::stats
