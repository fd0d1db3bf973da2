#pragma once

// The experimental protocol end to end: step-size sweep, hit detection,
// histogramming, coefficient fitting, power-law regression, and the
// rounding-versus-injected-noise model validation.
//
// Repetitions are independent work items.  run_sweep fans them out with
// OpenMP; run_sweep_serial is the reference implementation kept for testing
// and benchmarking.  Both write each repetition's result into its own slot,
// so the aggregated output is identical for any worker count.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "saddle/stats.hpp"
#include "saddle/steppers.hpp"

namespace saddle {

struct SweepConfig {
    double base_h{1e-4};
    double delta_h{1e-10};
    long k{10000};                     // L = 2k + 1 repetitions
    double theta{0.7853981633974483};  // detection-line angle, default pi/4
    SaddleSpec spec{};
    StepperKind stepper{StepperKind::Euler};
    PrecisionPolicy policy{};
    int bins{100};
    std::uint64_t master_seed{0};      // NoiseInjection only
    double inject_p{23.5};             // NoiseInjection model precision
    double t_max{60.0};
    long long max_steps{200000000};

    long repetitions() const { return 2 * k + 1; }

    /// Enforces the protocol constraints; throws std::domain_error naming
    /// the offending field.
    void validate() const;
};

/// One trajectory's crossing of a detection line.
struct HitRecord {
    long repetition{0};  // 1-based index into the schedule
    double h_i{0.0};
    double y{0.0};
    double t_hit{0.0};
    int branch{0};
};

struct SweepResult {
    std::vector<HitRecord> hits;  // ordered by repetition index
    long n_no_hit{0};             // time limit or step budget reached
    long n_diverged{0};
    long long total_steps{0};
    /// Set when more than 1% of repetitions diverged or exhausted the step
    /// budget; the sweep data is still returned.
    std::optional<std::string> aggregate_error;
};

/// h_i = h + delta_h (i - 1 - k), 1 <= i <= 2k+1.
double step_size_schedule(const SweepConfig& cfg, long i);

/// Crossing test between two consecutive post-step states, in the
/// eigen-coordinates u = (v1' x, v2' x): fires on the sign change of
/// g(u) = tan(theta) |u1| - |u2|.  The returned fragment carries the
/// interpolated crossing point, its distance y, the interpolation fraction,
/// and the branch sign; t_hit is left at zero (the caller knows the step).
std::optional<HitFragment> detect_hit(const Vec2& x_prev, const Vec2& x_next,
                                      const EigenStructure& eig, double theta);

/// Runs the full schedule.  workers = 0 uses all available parallelism,
/// 1 forces the serial path, N pins the OpenMP team size.
SweepResult run_sweep(const SweepConfig& cfg, int workers = 0);

/// Serial reference implementation; produces bit-identical results.
SweepResult run_sweep_serial(const SweepConfig& cfg);

struct Histogram {
    int bins{0};
    double bin_width{0.0};
    std::vector<long> counts;      // equal-width bins on [0, 1)
    long overflow{0};              // y >= 1, excluded from the fit
    long total{0};
    std::vector<double> density;   // counts / (total * bin_width)
};

/// Equal-width histogram of hit distances on [0, 1].  Throws on an empty
/// hit list or bins < 4.
Histogram build_histogram(const std::vector<HitRecord>& hits, int bins);

struct FitResult {
    double a_mle{0.0};
    double a_lsq{0.0};
    double a_stderr{0.0};
    double chi_sq{0.0};
    long dof{0};
    double ks_stat{0.0};
    long n_hits{0};
    long n_no_hit{0};
};

/// Fits the one-parameter family to the hit distances.  a_mle is the
/// closed-form likelihood maximizer sqrt(8 n / (pi sum y^4)); a_lsq matches
/// the family against the normalized histogram densities; chi_sq uses the
/// occupied bins only.  Requires at least 100 hits.
FitResult fit_a(const std::vector<HitRecord>& hits, const Histogram& histogram,
                long n_no_hit = 0);

struct RegressionResult {
    double slope{0.0};
    double intercept{0.0};  // natural log; exp(intercept) is the prefactor
    double r_sq{0.0};
};

/// OLS on (log h, log a).  Requires >= 4 points spanning >= 1.5 decades.
RegressionResult exponent_regression(const std::vector<std::pair<double, double>>& points);

/// Two-sample Kolmogorov-Smirnov comparison of the hit distances produced by
/// native rounding and by the injected-noise model.  The two configs must
/// share the system and h-schedule; each side must yield >= 1000 hits.
KsReport validate_oracle(const SweepConfig& cfg_native, const SweepConfig& cfg_injected,
                         int workers = 0);

}  // namespace saddle
