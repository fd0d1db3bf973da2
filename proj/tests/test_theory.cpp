#include <cmath>
#include <vector>

#include "doctest.h"

#include "saddle/stats.hpp"
#include "saddle/theory.hpp"
#include "test_util.hpp"

using namespace saddle;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
const SaddleSpec kCanonicalSpec{1.0, 1.0, kPi / 5.0, 1.0};
}

TEST_CASE("sigma_inf_sq_linear: degenerate angle, closed value, p-scaling") {
    CHECK(sigma_inf_sq_linear({1.0, 1.0, 0.0, 1.0}, 10.0) == 0.0);

    // (cos 36deg sin 36deg)^2 / 6 at p = 0
    const double cs = std::cos(kPi / 5.0) * std::sin(kPi / 5.0);
    const double expected = cs * cs / 6.0;
    CHECK(sigma_inf_sq_linear(kCanonicalSpec, 0.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(sigma_inf_sq_linear(kCanonicalSpec, 0.0) ==
          doctest::Approx(0.0376878540494781).epsilon(1e-12));

    for (double p : {3.0, 10.5, 23.0}) {
        const double lo = sigma_inf_sq_linear(kCanonicalSpec, p);
        const double hi = sigma_inf_sq_linear(kCanonicalSpec, p + 1.0);
        CHECK(hi / lo == 0.25);
    }
}

TEST_CASE("sigma_inf_sq_quadrature: closed form is the oracle on the linear system") {
    for (int i = 1; i <= 10; ++i) {
        const double phi = 1.5 * static_cast<double>(i) / 10.5;  // spread over (0, pi/2)
        const SaddleSpec spec{1.0, 1.0, phi, 1.0};
        const auto quad =
            sigma_inf_sq_quadrature(make_linear_system(spec), initial_value(spec), 4.0, 25.0, 1e-9);
        const double closed = sigma_inf_sq_linear(spec, 4.0);
        CHECK(quad.value ==
              doctest::Approx(closed).epsilon(1e-6 + quad.tail_bound / closed));
        CHECK(quad.tail_bound < 1e-6 * closed);
    }
}

TEST_CASE("sigma_inf_sq_quadrature: asymmetric eigenvalues, degenerate angle, bound") {
    const SaddleSpec spec{2.0, 1.0, kPi / 5.0, 1.0};
    const auto quad =
        sigma_inf_sq_quadrature(make_linear_system(spec), initial_value(spec), 2.0, 20.0, 1e-9);
    CHECK(quad.value == doctest::Approx(sigma_inf_sq_linear(spec, 2.0)).epsilon(1e-6));

    const SaddleSpec flat{1.0, 1.0, 0.0, 1.0};
    const auto zero =
        sigma_inf_sq_quadrature(make_linear_system(flat), initial_value(flat), 2.0, 20.0, 1e-9);
    CHECK(zero.value <= 1e-9);

    // universal bound (2 / (3 lambda)) 2^-2p
    CHECK(quad.value + quad.tail_bound <=
          (2.0 / (3.0 * spec.lambda)) * std::exp2(-4.0) * (1.0 + 1e-9));
}

TEST_CASE("sigma_inf_sq_quadrature: quadratic nonlinearity stays within the bound") {
    // Nonlinearity built in eigen-coordinates so the stable manifold stays
    // the u2 = 0 line and the starting ray remains admissible:
    //   u1' = -u1 + kappa u1^2,  u2' = u2 + kappa u1 u2.
    const SaddleSpec spec{1.0, 1.0, kPi / 5.0, 0.5};
    const EigenStructure eig = eigenstructure(spec);
    const double kappa = 0.2;
    auto outer = [](const Vec2& col, const Vec2& row) {
        return Mat2{col.c1 * row.c1, col.c1 * row.c2, col.c2 * row.c1, col.c2 * row.c2};
    };
    GeneralSystem sys = make_linear_system(spec);
    sys.tau = [=](const Vec2& x) {
        const double u1 = eig.v1p.dot(x);
        const double u2 = eig.v2p.dot(x);
        return kappa * u1 * u1 * eig.v1 + kappa * u1 * u2 * eig.v2;
    };
    sys.tau_jacobian = [=](const Vec2& x) {
        const double u1 = eig.v1p.dot(x);
        const double u2 = eig.v2p.dot(x);
        Mat2 j = outer(eig.v1, eig.v1p) * (2.0 * kappa * u1);
        j = j + outer(eig.v2, eig.v1p) * (kappa * u2);
        j = j + outer(eig.v2, eig.v2p) * (kappa * u1);
        return j;
    };
    const double p = 3.0;
    const auto quad = sigma_inf_sq_quadrature(sys, initial_value(spec), p, 20.0, 1e-8);
    CHECK(quad.value > 0.0);
    CHECK(quad.value + quad.tail_bound <=
          (2.0 / (3.0 * spec.lambda)) * std::exp2(-2.0 * p) * (1.0 + 1e-8));
    // near the linear value for a mild perturbation, but not equal to it
    const double linear = sigma_inf_sq_linear(spec, p);
    CHECK(quad.value > 0.5 * linear);
    CHECK(quad.value < 2.0 * linear);
}

TEST_CASE("hitting_density: normalization, reduction to the family, origin") {
    struct Case {
        double lambda, mu, sigma;
    };
    for (const Case c : {Case{1.0, 1.0, 0.1}, Case{2.0, 1.0, 0.05}, Case{1.0, 2.0, 0.05}}) {
        // support scale: y ~ sigma^(mu/(lambda+mu))
        const double y_scale = std::pow(c.sigma, c.mu / (c.lambda + c.mu));
        const double upper = 12.0 * y_scale;
        const double integral = testutil::simpson(
            [&](double y) { return hitting_density(y, c.lambda, c.mu, c.sigma); }, 0.0, upper,
            1 << 20);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-8));
    }

    const double sigma = 0.07;
    const double a = 4.0 / (std::sqrt(2.0 * kPi) * sigma);
    for (int i = 0; i <= 60; ++i) {
        const double y = 3.0 * static_cast<double>(i) / 60.0;
        const double lhs = hitting_density(y, 1.0, 1.0, sigma);
        const double rhs = family_f(y, a);
        CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, rhs));
    }

    CHECK(hitting_density(0.0, 1.0, 1.0, 0.1) == 0.0);
    CHECK(hitting_cdf(0.0, 1.0, 1.0, 0.1) == 0.0);

    // CDF differentiates back to the density
    for (double y : {0.05, 0.2, 0.5}) {
        const double dy = 1e-6;
        const double deriv = (hitting_cdf(y + dy, 2.0, 1.0, 0.05) -
                              hitting_cdf(y - dy, 2.0, 1.0, 0.05)) /
                             (2.0 * dy);
        CHECK(deriv == doctest::Approx(hitting_density(y, 2.0, 1.0, 0.05)).epsilon(1e-6));
    }
}

TEST_CASE("family_f: normalization, mode, boundary") {
    for (double a : {0.5, 1.0, 1000.0}) {
        const double x_star = std::pow(4.0 / (kPi * a * a), 0.25);
        const double integral =
            testutil::simpson([&](double x) { return family_f(x, a); }, 0.0, 10.0 * x_star,
                              1 << 20);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(family_f_cdf(10.0 * x_star, a) == doctest::Approx(1.0).epsilon(1e-10));

        // stationary point of log f
        const double eps = 1e-7 * x_star;
        CHECK(family_f(x_star, a) >= family_f(x_star - eps, a));
        CHECK(family_f(x_star, a) >= family_f(x_star + eps, a));
    }
    CHECK(family_f(0.0, 1.0) == 0.0);
}

TEST_CASE("predicted_a: the 8.220 x 2^p law and the per-precision brackets") {
    const double h = 1e-4;
    for (double p : {0.0, 10.0, 23.0, 52.0}) {
        const double value = predicted_a(kCanonicalSpec, h, p) / std::sqrt(h);
        CHECK(value / std::exp2(p) == doctest::Approx(8.220).epsilon(0.001 / 8.220));
    }
    CHECK(predicted_a(kCanonicalSpec, h, 23.0) / std::sqrt(h) ==
          doctest::Approx(6.895e7).epsilon(1e-3));
    CHECK(predicted_a(kCanonicalSpec, h, 24.0) / std::sqrt(h) ==
          doctest::Approx(1.379e8).epsilon(1e-3));
    CHECK(predicted_a(kCanonicalSpec, h, 52.0) / std::sqrt(h) ==
          doctest::Approx(3.702e16).epsilon(1e-3));
    CHECK(predicted_a(kCanonicalSpec, h, 53.0) / std::sqrt(h) ==
          doctest::Approx(7.404e16).epsilon(1e-3));
}

TEST_CASE("predicted_a: homogeneity and the unsupported family") {
    const double base = predicted_a(kCanonicalSpec, 1.0, 30.0);
    for (double h : {1e-4, 1e-3, 1e-2}) {
        CHECK(predicted_a(kCanonicalSpec, h, 30.0) / std::sqrt(h) ==
              doctest::Approx(base).epsilon(1e-12));
        CHECK(predicted_a(kCanonicalSpec, h, 31.0) ==
              doctest::Approx(2.0 * predicted_a(kCanonicalSpec, h, 30.0)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(predicted_a({2.0, 1.0, 0.3, 1.0}, 1e-3, 30.0), std::domain_error);
    CHECK(std::isinf(predicted_a({1.0, 1.0, 0.0, 1.0}, 1e-3, 30.0)));
}

TEST_CASE("hit_moments: Gamma-function value and Monte Carlo cross-check") {
    const Moments m = hit_moments(1.0, 1.0, 1.0);
    // 2^(1/4) Gamma(3/4) / sqrt(pi)
    const double expected = std::pow(2.0, 0.25) * std::tgamma(0.75) / std::sqrt(kPi);
    CHECK(m.mean == doctest::Approx(expected).epsilon(1e-14));
    CHECK(m.mean == doctest::Approx(0.82217).epsilon(3e-5));

    SplitMix64 rng(2024);
    const long n = 10000000;
    double sum = 0.0, sum2 = 0.0;
    for (long i = 0; i < n; ++i) {
        const double y = std::sqrt(std::fabs(testutil::normal(rng)));
        sum += y;
        sum2 += y * y;
    }
    const double mc_mean = sum / static_cast<double>(n);
    const double mc_std =
        std::sqrt((sum2 - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1));
    CHECK(mc_mean == doctest::Approx(m.mean).epsilon(1e-3));
    CHECK(mc_std == doctest::Approx(m.stddev).epsilon(1e-3));
}

TEST_CASE("hit_moments: power-law scaling in sigma and gamma = 1/4") {
    const Moments base = hit_moments(1.0, 1.0, 0.3);
    for (double c : {2.0, 7.0}) {
        const Moments scaled = hit_moments(1.0, 1.0, c * 0.3);
        CHECK(scaled.mean == doctest::Approx(std::sqrt(c) * base.mean).epsilon(1e-12));
        CHECK(scaled.stddev == doctest::Approx(std::sqrt(c) * base.stddev).epsilon(1e-12));
    }
    const TheoryPrediction t = predict(kCanonicalSpec, 1e-4, 52.5);
    CHECK(t.gamma == 0.25);
    CHECK(t.sigma_sq == t.sigma_inf_sq * 1e4);
    CHECK(t.a_predicted == doctest::Approx(predicted_a(kCanonicalSpec, 1e-4, 52.5)).epsilon(1e-15));
    CHECK(t.mean_hit == doctest::Approx(hit_moments(1.0, 1.0, std::sqrt(t.sigma_sq)).mean)
                            .epsilon(1e-15));
}

TEST_CASE("sampling oracle: transformed normals follow the hitting law") {
    const double lambda = 2.0, mu = 1.0, sigma = 0.05;
    const long n = 1000000;
    std::vector<double> sample;
    sample.reserve(n);
    SplitMix64 rng(31415);
    for (long i = 0; i < n; ++i) {
        const double z = sigma * testutil::normal(rng);
        sample.push_back(std::pow(std::fabs(z), mu / (lambda + mu)));
    }
    const double d = ks_statistic(std::move(sample), [&](double y) {
        return hitting_cdf(y, lambda, mu, sigma);
    });
    CHECK(d <= 2.0 / std::sqrt(static_cast<double>(n)));
}
