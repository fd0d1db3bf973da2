#include "saddle/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "saddle/rng.hpp"
#include "saddle/theory.hpp"

namespace saddle {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double policy_epsilon(const SweepConfig& cfg) {
    const int bits = (cfg.stepper == StepperKind::NoiseInjection)
                         ? kCarrierFractionBits
                         : cfg.policy.fraction_bits();
    return std::exp2(-bits);
}

}  // namespace

void SweepConfig::validate() const {
    spec.validate();
    if (!(base_h > 0.0)) throw std::domain_error("SweepConfig: base_h must be > 0");
    if (base_h > 0.1)
        throw std::domain_error(
            "SweepConfig: base_h > 1e-1 leaves too few rounding errors to accumulate");
    if (!(delta_h > 0.0)) throw std::domain_error("SweepConfig: delta_h must be > 0");
    if (k < 1) throw std::domain_error("SweepConfig: k must be >= 1");
    if (static_cast<double>(k) * delta_h > base_h / 10.0)
        throw std::domain_error(
            "SweepConfig: k * delta_h must be <= base_h / 10 (schedule too wide)");
    if (delta_h / base_h < policy_epsilon(*this))
        throw std::domain_error(
            "SweepConfig: delta_h / base_h is below the arithmetic precision; "
            "the schedule would not vary");
    if (!(theta > 0.0 && theta < 1.5707963267948966))
        throw std::domain_error("SweepConfig: theta must be in (0, pi/2)");
    if (bins < 4) throw std::domain_error("SweepConfig: bins must be >= 4");
    if (!(t_max > 0.0)) throw std::domain_error("SweepConfig: t_max must be > 0");
    if (t_max / base_h > static_cast<double>(max_steps))
        throw std::domain_error("SweepConfig: t_max / base_h exceeds the step budget");
}

double step_size_schedule(const SweepConfig& cfg, long i) {
    if (i < 1 || i > cfg.repetitions())
        throw std::out_of_range("step_size_schedule: index outside 1..2k+1");
    return cfg.base_h + cfg.delta_h * static_cast<double>(i - 1 - cfg.k);
}

std::optional<HitFragment> detect_hit(const Vec2& x_prev, const Vec2& x_next,
                                      const EigenStructure& eig, double theta) {
    const double tt = std::tan(theta);
    auto g = [&](const Vec2& x) {
        const double u1 = eig.v1p.dot(x);
        const double u2 = eig.v2p.dot(x);
        return tt * std::fabs(u1) - std::fabs(u2);
    };
    const double g_prev = g(x_prev);
    const double g_next = g(x_next);
    if (!(g_next < 0.0 && g_prev >= 0.0)) return std::nullopt;
    HitFragment frag;
    frag.fraction = g_prev / (g_prev - g_next);
    frag.x_cross = x_prev + frag.fraction * (x_next - x_prev);
    frag.y = frag.x_cross.norm();
    frag.branch = (eig.v2p.dot(frag.x_cross) >= 0.0) ? +1 : -1;
    return frag;
}

namespace {

struct RepetitionOutcome {
    std::optional<HitRecord> hit;
    bool diverged{false};
    bool budget{false};
    long long steps{0};
};

RepetitionOutcome run_repetition(const SweepConfig& cfg, long i) {
    TrajectoryConfig tc;
    tc.stepper = cfg.stepper;
    tc.policy = cfg.policy;
    tc.h = step_size_schedule(cfg, i);
    tc.t_max = cfg.t_max;
    tc.max_steps = cfg.max_steps;
    tc.spec = cfg.spec;
    tc.inject_p = cfg.inject_p;
    tc.stream_seed = SplitMix64::derive(cfg.master_seed, static_cast<std::uint64_t>(i));

    const TrajectoryOutcome out = run_trajectory(tc, StopCondition::line(cfg.theta));
    RepetitionOutcome rep;
    rep.steps = out.steps;
    switch (out.reason) {
        case StopReason::LineHit:
            rep.hit = HitRecord{i, tc.h, out.hit->y, out.hit->t_hit, out.hit->branch};
            break;
        case StopReason::Diverged: rep.diverged = true; break;
        case StopReason::StepBudget: rep.budget = true; break;
        case StopReason::TimeLimit: break;
    }
    return rep;
}

SweepResult aggregate(const SweepConfig& cfg, std::vector<RepetitionOutcome>& slots) {
    SweepResult res;
    long n_budget = 0;
    for (auto& slot : slots) {
        res.total_steps += slot.steps;
        if (slot.hit) {
            res.hits.push_back(*slot.hit);
        } else if (slot.diverged) {
            ++res.n_diverged;
        } else {
            ++res.n_no_hit;
            if (slot.budget) ++n_budget;
        }
    }
    const long bad = res.n_diverged + n_budget;
    const long total = cfg.repetitions();
    if (bad * 100 > total)
        res.aggregate_error = std::to_string(res.n_diverged) + " diverged and " +
                              std::to_string(n_budget) + " budget-exhausted repetitions out of " +
                              std::to_string(total) + " (> 1%)";
    return res;
}

}  // namespace

SweepResult run_sweep_serial(const SweepConfig& cfg) {
    cfg.validate();
    const long total = cfg.repetitions();
    std::vector<RepetitionOutcome> slots(static_cast<std::size_t>(total));
    for (long i = 1; i <= total; ++i)
        slots[static_cast<std::size_t>(i - 1)] = run_repetition(cfg, i);
    return aggregate(cfg, slots);
}

SweepResult run_sweep(const SweepConfig& cfg, int workers) {
    if (workers == 1) return run_sweep_serial(cfg);
    cfg.validate();
    const long total = cfg.repetitions();
    std::vector<RepetitionOutcome> slots(static_cast<std::size_t>(total));
#ifdef _OPENMP
    const int team = (workers > 0) ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(team)
    for (long i = 1; i <= total; ++i)
        slots[static_cast<std::size_t>(i - 1)] = run_repetition(cfg, i);
#else
    for (long i = 1; i <= total; ++i)
        slots[static_cast<std::size_t>(i - 1)] = run_repetition(cfg, i);
#endif
    return aggregate(cfg, slots);
}

Histogram build_histogram(const std::vector<HitRecord>& hits, int bins) {
    if (bins < 4) throw std::domain_error("build_histogram: bins must be >= 4");
    if (hits.empty()) throw std::runtime_error("build_histogram: empty hit list");
    Histogram h;
    h.bins = bins;
    h.bin_width = 1.0 / static_cast<double>(bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.total = static_cast<long>(hits.size());
    for (const auto& hit : hits) {
        if (hit.y >= 1.0) {
            ++h.overflow;
            continue;
        }
        auto idx = static_cast<std::size_t>(hit.y * static_cast<double>(bins));
        if (idx >= h.counts.size()) idx = h.counts.size() - 1;  // y just below 1
        ++h.counts[idx];
    }
    h.density.resize(h.counts.size());
    const double norm = static_cast<double>(h.total) * h.bin_width;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        h.density[i] = static_cast<double>(h.counts[i]) / norm;
    return h;
}

namespace {

// Sum of squared residuals of the family against the histogram densities.
double lsq_objective(const Histogram& hist, double a) {
    double sse = 0.0;
    for (std::size_t i = 0; i < hist.density.size(); ++i) {
        const double center = (static_cast<double>(i) + 0.5) * hist.bin_width;
        const double diff = hist.density[i] - family_f(center, a);
        sse += diff * diff;
    }
    return sse;
}

double lsq_minimize(const Histogram& hist, double a_start) {
    // Coarse bracket in log space around the likelihood estimate, then
    // golden-section refinement.
    double best = a_start;
    double best_val = lsq_objective(hist, a_start);
    for (int i = -120; i <= 120; ++i) {
        const double a = a_start * std::exp2(static_cast<double>(i) / 10.0);
        const double v = lsq_objective(hist, a);
        if (v < best_val) {
            best_val = v;
            best = a;
        }
    }
    double lo = best * 0.75, hi = best * 1.25;
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = lsq_objective(hist, x1), f2 = lsq_objective(hist, x2);
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * best; ++it) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = lsq_objective(hist, x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = lsq_objective(hist, x2);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

FitResult fit_a(const std::vector<HitRecord>& hits, const Histogram& histogram,
                long n_no_hit) {
    if (hits.size() < 100)
        throw std::invalid_argument("fit_a: need at least 100 hits, got " +
                                    std::to_string(hits.size()));
    const double n = static_cast<double>(hits.size());
    double sum4 = 0.0;
    double y_min = hits.front().y, y_max = hits.front().y;
    for (const auto& h : hits) {
        const double y2 = h.y * h.y;
        sum4 += y2 * y2;
        y_min = std::min(y_min, h.y);
        y_max = std::max(y_max, h.y);
    }
    if (!(sum4 > 0.0) || y_min == y_max)
        throw std::runtime_error("fit_a: degenerate sample (all distances equal)");

    FitResult fit;
    fit.n_hits = static_cast<long>(hits.size());
    fit.n_no_hit = n_no_hit;
    fit.a_mle = std::sqrt(8.0 * n / (kPi * sum4));
    fit.a_stderr = fit.a_mle / (2.0 * std::sqrt(n));
    fit.a_lsq = lsq_minimize(histogram, fit.a_mle);

    // Pearson chi-square over occupied bins against the fitted family.
    long occupied = 0;
    double chi = 0.0;
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        if (histogram.counts[i] == 0) continue;
        ++occupied;
        const double left = static_cast<double>(i) * histogram.bin_width;
        const double right = left + histogram.bin_width;
        const double expected =
            n * (family_f_cdf(right, fit.a_mle) - family_f_cdf(left, fit.a_mle));
        if (expected > 0.0) {
            const double d = static_cast<double>(histogram.counts[i]) - expected;
            chi += d * d / expected;
        }
    }
    fit.chi_sq = chi;
    fit.dof = std::max(1L, occupied - 2);

    std::vector<double> ys;
    ys.reserve(hits.size());
    for (const auto& h : hits) ys.push_back(h.y);
    const double a = fit.a_mle;
    fit.ks_stat = ks_statistic(std::move(ys), [a](double y) { return family_f_cdf(y, a); });
    return fit;
}

RegressionResult exponent_regression(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 4)
        throw std::invalid_argument("exponent_regression: need >= 4 points");
    std::vector<double> lx, ly;
    double h_min = points.front().first, h_max = points.front().first;
    for (const auto& [h, a] : points) {
        if (!(h > 0.0) || !(a > 0.0))
            throw std::invalid_argument("exponent_regression: points must be positive");
        h_min = std::min(h_min, h);
        h_max = std::max(h_max, h);
        lx.push_back(std::log(h));
        ly.push_back(std::log(a));
    }
    if (std::log10(h_max / h_min) < 1.5)
        throw std::invalid_argument(
            "exponent_regression: h values must span at least 1.5 decades");
    const LineFit fit = least_squares(lx, ly);
    return {fit.slope, fit.intercept, fit.r_sq};
}

KsReport validate_oracle(const SweepConfig& cfg_native, const SweepConfig& cfg_injected,
                         int workers) {
    if (cfg_injected.stepper != StepperKind::NoiseInjection)
        throw std::invalid_argument("validate_oracle: second config must use NoiseInjection");
    const auto& a = cfg_native.spec;
    const auto& b = cfg_injected.spec;
    const bool same_system = a.lambda == b.lambda && a.mu == b.mu && a.phi == b.phi &&
                             a.x0_magnitude == b.x0_magnitude;
    const bool same_schedule = cfg_native.base_h == cfg_injected.base_h &&
                               cfg_native.delta_h == cfg_injected.delta_h &&
                               cfg_native.k == cfg_injected.k &&
                               cfg_native.theta == cfg_injected.theta;
    if (!same_system || !same_schedule)
        throw std::invalid_argument(
            "validate_oracle: configs must share the system and h-schedule");

    const SweepResult native = run_sweep(cfg_native, workers);
    const SweepResult injected = run_sweep(cfg_injected, workers);
    if (native.hits.size() < 1000 || injected.hits.size() < 1000)
        throw std::runtime_error("validate_oracle: need >= 1000 hits per side, got " +
                                 std::to_string(native.hits.size()) + " and " +
                                 std::to_string(injected.hits.size()));
    std::vector<double> ya, yb;
    ya.reserve(native.hits.size());
    yb.reserve(injected.hits.size());
    for (const auto& h : native.hits) ya.push_back(h.y);
    for (const auto& h : injected.hits) yb.push_back(h.y);
    return ks_two_sample(std::move(ya), std::move(yb));
}

}  // namespace saddle
