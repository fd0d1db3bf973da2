#include <cmath>
#include <vector>

#include "doctest.h"

#include "saddle/stats.hpp"
#include "saddle/steppers.hpp"
#include "test_util.hpp"

using namespace saddle;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
const SaddleSpec kCanonicalSpec{1.0, 1.0, kPi / 5.0, 1.0};
}

TEST_CASE("euler_step: hand-checked exact binary cases") {
    const auto full = PrecisionPolicy::native_double();
    const Vec2 a = euler_step({1.0, 0.0}, 0.5, Mat2::diagonal(-1.0, 1.0), full);
    CHECK(a.c1 == 0.5);
    CHECK(a.c2 == 0.0);

    const Vec2 origin = euler_step({0.0, 0.0}, 0.125, Mat2{0.3, -0.2, 0.9, 0.4}, full);
    CHECK(origin.c1 == 0.0);
    CHECK(origin.c2 == 0.0);

    const Vec2 sym = euler_step({1.0, 1.0}, 0.25, Mat2{0.0, -1.0, -1.0, 0.0}, full);
    CHECK(sym.c1 == 0.75);
    CHECK(sym.c2 == 0.75);
}

TEST_CASE("rk4_step: truncated exponential series on the diagonal system") {
    const auto full = PrecisionPolicy::native_double();
    const Vec2 r = rk4_step({1.0, 0.0}, 0.1, Mat2::diagonal(-1.0, 1.0), full);
    // 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
    const double series = 1.0 - 0.1 + 0.005 - 1.0 / 6000.0 + 1.0 / 240000.0;
    CHECK(r.c1 == doctest::Approx(series).epsilon(1e-15));
    CHECK(r.c1 == doctest::Approx(0.90483750).epsilon(1e-9));
    CHECK(r.c2 == 0.0);

    const Vec2 z = rk4_step({0.0, 0.0}, 0.1, Mat2{0.4, 1.0, -0.3, 0.2}, full);
    CHECK(z.c1 == 0.0);
    CHECK(z.c2 == 0.0);
}

TEST_CASE("rk4_step: one step stays within |x| h^5 of the exact flow") {
    const SaddleSpec spec{1.0, 1.0, kPi / 5.0, 1.0};
    const Mat2 m = build_rotated_matrix(spec);
    const double h = 0.01;
    const Vec2 x{0.7, -0.4};
    const Vec2 stepped = rk4_step(x, h, m, PrecisionPolicy::native_double());
    const Vec2 exact = exact_linear_flow(spec, x, h);
    const double err = (stepped - exact).norm();
    CHECK(err <= x.norm() * std::pow(h, 5.0));
}

TEST_CASE("steppers: global convergence orders against the exact flow") {
    const SaddleSpec spec{1.0, 1.0, kPi / 5.0, 1.0};
    const Mat2 m = build_rotated_matrix(spec);
    const Vec2 x0 = initial_value(spec);
    const Vec2 ref = exact_linear_flow(spec, x0, 1.0);
    const auto full = PrecisionPolicy::native_double();

    auto global_error = [&](bool rk4, int log2_inv_h) {
        const long n = 1L << log2_inv_h;
        const double h = 1.0 / static_cast<double>(n);
        Vec2 x = x0;
        for (long i = 0; i < n; ++i)
            x = rk4 ? rk4_step(x, h, m, full) : euler_step(x, h, m, full);
        return (x - ref).norm();
    };

    std::vector<double> lh, le;
    for (int k = 6; k <= 12; ++k) {
        lh.push_back(std::log(std::exp2(-k)));
        le.push_back(std::log(global_error(false, k)));
    }
    const LineFit euler_fit = least_squares(lh, le);
    CHECK(euler_fit.slope == doctest::Approx(1.0).epsilon(0.1));

    lh.clear();
    le.clear();
    for (int k = 2; k <= 7; ++k) {
        lh.push_back(std::log(std::exp2(-k)));
        le.push_back(std::log(global_error(true, k)));
    }
    const LineFit rk4_fit = least_squares(lh, le);
    CHECK(rk4_fit.slope == doctest::Approx(4.0).epsilon(0.025));
}

TEST_CASE("steppers: step defect against h b(x)") {
    const SaddleSpec spec{1.0, 1.0, kPi / 5.0, 1.0};
    const Mat2 m = build_rotated_matrix(spec);
    const Vec2 x{0.8, 0.3};
    const auto full = PrecisionPolicy::native_double();

    // Euler realizes x + h b(x) identically; the defect is pure roundoff.
    for (double h : {1e-2, 1e-3, 1e-4}) {
        const Vec2 b = m * x;
        const Vec2 defect = euler_step(x, h, m, full) - (x + h * b);
        CHECK(defect.norm() <= 4.0 * std::exp2(-52.0) * x.norm());
    }

    // RK4's defect shrinks like h^2, comfortably faster than h^(3/2).
    std::vector<double> lh, ld;
    for (int k = 4; k <= 10; ++k) {
        const double h = std::exp2(-k);
        const Vec2 b = m * x;
        const Vec2 defect = rk4_step(x, h, m, full) - (x + h * b);
        lh.push_back(std::log(h));
        ld.push_back(std::log(defect.norm()));
    }
    const LineFit fit = least_squares(lh, ld);
    CHECK(fit.slope >= 1.5);
}

TEST_CASE("euler recurrence matches the analytic matrix power") {
    const SaddleSpec spec = kCanonicalSpec;
    const Mat2 m = build_rotated_matrix(spec);
    const double h = 1e-3;
    const long n = 5000;
    Vec2 x = initial_value(spec);
    const auto full = PrecisionPolicy::native_double();
    for (long i = 0; i < n; ++i) x = euler_step(x, h, m, full);

    // (I + h Bbar)^n x0 = R diag((1-h mu)^n, (1+h lambda)^n) R^T x0; the
    // initial point has no unstable component, so the stable factor alone
    // carries it.
    const double factor = std::pow(1.0 - h, static_cast<double>(n));
    const Vec2 analytic{factor * std::cos(spec.phi), factor * std::sin(spec.phi)};
    const double tol = static_cast<double>(n) * std::exp2(-50.0);
    CHECK(std::fabs(x.c1 - analytic.c1) <= tol);
    CHECK(std::fabs(x.c2 - analytic.c2) <= tol);
}

TEST_CASE("noise_injection_step: degenerate noise, determinism, variance") {
    const Mat2 m = build_rotated_matrix(kCanonicalSpec);
    const Vec2 x{0.7, -0.3};
    const double h = 1e-3;

    // exp2(-p) underflows to zero far below the double range: pure Euler
    SplitMix64 rng_a(1), rng_b(1);
    const Vec2 clean = euler_step(x, h, m, PrecisionPolicy::native_double());
    const Vec2 injected = noise_injection_step(x, h, m, 1100.0, rng_a);
    CHECK(injected.c1 == clean.c1);
    CHECK(injected.c2 == clean.c2);

    const Vec2 r1 = noise_injection_step(x, h, m, 20.0, rng_a);
    SplitMix64 rng_a2(1);
    (void)noise_injection_step(x, h, m, 1100.0, rng_a2);  // same draw count
    const Vec2 r2 = noise_injection_step(x, h, m, 20.0, rng_a2);
    CHECK(r1.c1 == r2.c1);
    CHECK(r1.c2 == r2.c2);
    (void)rng_b;

    // empirical variance of the injected perturbation: |x'_i|^2 2^-2p / 3
    const double p = 20.0;
    SplitMix64 rng(77);
    const long n = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (long i = 0; i < n; ++i) {
        const Vec2 r = noise_injection_step(x, h, m, p, rng);
        const double eps = r.c1 - clean.c1;
        const double delta = eps - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (eps - mean);
    }
    const double var = m2 / static_cast<double>(n - 1);
    const double expected = clean.c1 * clean.c1 * std::exp2(-2.0 * p) / 3.0;
    CHECK(var == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("run_trajectory: phi = 0 keeps the second component at exactly zero") {
    TrajectoryConfig cfg;
    cfg.spec = {1.0, 1.0, 0.0, 1.0};
    cfg.h = 1e-3;
    cfg.t_max = 20.0;
    cfg.policy = PrecisionPolicy::native_double();

    long long violations = 0;
    const auto out = run_trajectory(cfg, StopCondition::line(kPi / 4.0),
                                    [&](long long, double, const Vec2& x) {
                                        if (x.c2 != 0.0) ++violations;
                                    });
    CHECK(violations == 0);
    CHECK(out.reason == StopReason::TimeLimit);
    CHECK(!out.hit.has_value());
    CHECK(out.steps == 20000);
}

TEST_CASE("run_trajectory: phi = pi/4 keeps both components exactly equal") {
    TrajectoryConfig cfg;
    cfg.spec = {1.0, 1.0, kPi / 4.0, 1.0};
    cfg.h = 1e-3;
    cfg.t_max = 1001.0;  // over 1e6 steps
    cfg.max_steps = 1100000;
    cfg.policy = PrecisionPolicy::native_double();

    long long unequal = 0;
    const auto out = run_trajectory(cfg, StopCondition::line(kPi / 4.0),
                                    [&](long long, double, const Vec2& x) {
                                        if (x.c1 != x.c2) ++unequal;
                                    });
    CHECK(unequal == 0);
    CHECK(!out.hit.has_value());
    CHECK(out.steps >= 1000000);
}

TEST_CASE("run_trajectory: double-precision hit lands in the predicted window") {
    TrajectoryConfig cfg;
    cfg.spec = kCanonicalSpec;
    cfg.h = 1e-4;
    cfg.t_max = 60.0;
    cfg.policy = PrecisionPolicy::native_double();

    const auto out = run_trajectory(cfg, StopCondition::line(kPi / 4.0));
    REQUIRE(out.hit.has_value());
    CHECK(out.reason == StopReason::LineHit);
    CHECK(out.hit->y > 0.0);
    CHECK(out.hit->y < 1e-5);

    // Transition time: the decaying stable part x0 e^-t meets the growing
    // perturbation sqrt(sigma_inf^2 / h) e^t (effective p about 52.5).
    const double sigma_inf =
        std::exp2(-52.5) * std::cos(kPi / 5.0) * std::sin(kPi / 5.0) / std::sqrt(6.0);
    const double t_star = std::log(1.0 / (sigma_inf / std::sqrt(cfg.h))) / 2.0;
    CHECK(std::fabs(out.hit->t_hit - t_star) <= 3.0);
    CHECK(out.t_end == doctest::Approx(out.hit->t_hit).epsilon(1e-3));
}

TEST_CASE("run_trajectory: noise-injection runs are reproducible") {
    TrajectoryConfig cfg;
    cfg.spec = kCanonicalSpec;
    cfg.stepper = StepperKind::NoiseInjection;
    cfg.h = 1e-3;
    cfg.inject_p = 23.5;
    cfg.stream_seed = 1234567;
    cfg.t_max = 60.0;

    const auto a = run_trajectory(cfg, StopCondition::line(kPi / 4.0));
    const auto b = run_trajectory(cfg, StopCondition::line(kPi / 4.0));
    REQUIRE(a.hit.has_value());
    REQUIRE(b.hit.has_value());
    CHECK(a.hit->y == b.hit->y);
    CHECK(a.hit->t_hit == b.hit->t_hit);
    CHECK(a.steps == b.steps);
}

TEST_CASE("public step functions replay the trajectory loop bitwise") {
    for (const auto& policy :
         {PrecisionPolicy::native_double(), PrecisionPolicy::native_single(),
          PrecisionPolicy::emulated(30)}) {
        TrajectoryConfig cfg;
        cfg.spec = kCanonicalSpec;
        cfg.policy = policy;
        cfg.h = 1e-3;
        cfg.t_max = 0.2001;  // 200 steps
        const auto out = run_trajectory(cfg, StopCondition::none());

        const Mat2 m = build_rotated_matrix(cfg.spec);
        Vec2 x = quantize(initial_value(cfg.spec), policy);
        for (int i = 0; i < 200; ++i) x = euler_step(x, cfg.h, m, policy);
        CHECK(out.steps == 200);
        CHECK(x.c1 == out.final_state.c1);
        CHECK(x.c2 == out.final_state.c2);

        cfg.stepper = StepperKind::RK4;
        const auto out_rk = run_trajectory(cfg, StopCondition::none());
        Vec2 xr = quantize(initial_value(cfg.spec), policy);
        for (int i = 0; i < 200; ++i) xr = rk4_step(xr, cfg.h, m, policy);
        CHECK(xr.c1 == out_rk.final_state.c1);
        CHECK(xr.c2 == out_rk.final_state.c2);
    }
}

TEST_CASE("run_trajectory: step budget reported as an outcome") {
    TrajectoryConfig cfg;
    cfg.spec = kCanonicalSpec;
    cfg.h = 1e-3;
    cfg.t_max = 50.0;
    cfg.max_steps = 100;
    const auto out = run_trajectory(cfg, StopCondition::none());
    CHECK(out.reason == StopReason::StepBudget);
    CHECK(out.steps == 100);
}
