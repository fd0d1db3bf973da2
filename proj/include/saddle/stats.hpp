#pragma once

// Small statistics toolbox: log-log least squares, Kolmogorov-Smirnov
// statistics, and the asymptotic Kolmogorov tail.

#include <functional>
#include <utility>
#include <vector>

namespace saddle {

struct LineFit {
    double slope{0.0};
    double intercept{0.0};
    double r_sq{0.0};
};

/// Ordinary least squares y = slope*x + intercept.
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

/// Survival function of the Kolmogorov distribution:
/// Q(x) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2).
double kolmogorov_q(double x);

/// One-sample KS statistic of a sample against a CDF.  The sample is copied
/// and sorted internally.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

struct KsReport {
    double ks_stat{0.0};
    double p_value{0.0};
    std::size_t n1{0};
    std::size_t n2{0};
    bool agree_at_1pct{false};
};

/// Two-sample KS statistic and asymptotic p-value (effective-sample-size
/// corrected argument).
KsReport ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace saddle
