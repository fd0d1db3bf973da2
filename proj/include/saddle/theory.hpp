#pragma once

// Closed-form and quadrature predictions: the variance seed sigma_inf^2 of
// the unstable direction, the hitting density, the one-parameter fit family,
// the predicted coefficient a, and hitting-distance moments.
//
// Scale conventions.  Rounding injects per-step errors whose size does not
// shrink with h, so the accumulated perturbation grows as the number of
// steps 1/h: the Gaussian Z seeding the unstable direction has variance
//     sigma^2 = sigma_inf^2 / h,
// and the hitting distance is |Z|^(mu/(lambda+mu)).  Consequently the fitted
// coefficient obeys a = 4/(sqrt(2 pi) sigma) \propto sqrt(h), and
// a h^(-1/2) = 8.220 x 2^p for lambda = mu = 1, phi = pi/5.

#include <functional>

#include "saddle/system.hpp"

namespace saddle {

struct TheoryPrediction {
    double sigma_inf_sq{0.0};  // variance seed, proportional to 2^-2p
    double sigma_sq{0.0};      // effective Gaussian variance sigma_inf_sq / h
    double a_predicted{0.0};   // family coefficient (lambda == mu), +inf if sigma == 0
    double gamma{0.0};         // magnitude exponent mu / (2 (lambda + mu))
    double mean_hit{0.0};      // predicted E[y]
    double std_hit{0.0};       // predicted StdDev[y]
};

/// Closed form for the linear rotated system:
/// (1 / (3 (lambda+mu))) 2^-2p |x0|^2 (cos phi sin phi)^2.
/// p may be fractional (effective precision).
double sigma_inf_sq_linear(const SaddleSpec& spec, double p);

struct QuadratureResult {
    double value{0.0};
    double tail_bound{0.0};
};

/// Integral form of sigma_inf^2 for a general system
///     int_0^inf e^(-2 lambda s) D_s a(x_s) D_s^* ds,
/// a(x) = (1/3) 2^-2p diag(x1^2, x2^2), with D_s obtained by integrating the
/// variational equation from each quadrature node until e^(-lambda t) v2' J
/// stabilizes.  The reported tail bound uses |D_s| <= 2 and the stable decay
/// of |x_s| past t_cut.  Throws if the D_s limit does not converge within
/// the 50/lambda horizon.
QuadratureResult sigma_inf_sq_quadrature(const GeneralSystem& system, const Vec2& x0,
                                         double p, double t_cut, double quad_tol);

/// Density of |Z|^(mu/(lambda+mu)) for Z ~ N(0, sigma^2).
double hitting_density(double y, double lambda, double mu, double sigma);

/// CDF of the same law: erf(y^((lambda+mu)/mu) / (sigma sqrt(2))).
double hitting_cdf(double y, double lambda, double mu, double sigma);

/// The fit family f(x) = a x exp(-(pi/16) a^2 x^4) (lambda = mu case).
double family_f(double x, double a);

/// CDF of family_f: erf((sqrt(pi)/4) a x^2).
double family_f_cdf(double x, double a);

/// Predicted coefficient a = 4 / (sqrt(2 pi) sigma), sigma^2 =
/// sigma_inf_sq_linear / h.  Requires lambda == mu; returns +inf when the
/// angle makes sigma vanish (phi = 0).
double predicted_a(const SaddleSpec& spec, double h, double p);

struct Moments {
    double mean{0.0};
    double stddev{0.0};
};

/// Mean and standard deviation of |Z|^(mu/(lambda+mu)), Z ~ N(0, sigma^2),
/// via E|Z|^q = sigma^q 2^(q/2) Gamma((q+1)/2) / sqrt(pi).
Moments hit_moments(double lambda, double mu, double sigma);

/// All predictions for one (spec, h, p).
TheoryPrediction predict(const SaddleSpec& spec, double h, double p);

}  // namespace saddle
