#include "saddle/steppers.hpp"

#include <cmath>

namespace saddle {

namespace {

// Policy-resolved scalar arithmetic.  Real is the storage type of the state
// inside the integration loop; add/mul produce values already rounded to the
// policy grid.

struct DoubleOps {
    using Real = double;
    static Real load(double x) { return x; }
    static Real add(Real a, Real b) { return a + b; }
    static Real mul(Real a, Real b) { return a * b; }
};

struct SingleOps {
    using Real = float;
    static Real load(double x) { return static_cast<float>(x); }
    static Real add(Real a, Real b) { return a + b; }
    static Real mul(Real a, Real b) { return a * b; }
};

struct EmulatedOps {
    using Real = double;
    int p;
    Real load(double x) const { return round_to_p(x, p); }
    Real add(Real a, Real b) const { return detail::round_to_p_unchecked(a + b, p); }
    Real mul(Real a, Real b) const { return detail::round_to_p_unchecked(a * b, p); }
};

template <class Ops>
struct State {
    typename Ops::Real x1, x2;
};

template <class Ops>
struct LoadedSystem {
    typename Ops::Real m11, m12, m21, m22;
    typename Ops::Real h;
    typename Ops::Real half_h;  // exact scaling by 0.5
    typename Ops::Real h_sixth; // rounded h*(1/6) for the RK4 combine

    LoadedSystem(const Ops& ops, const Mat2& m, double step) {
        m11 = ops.load(m.a11);
        m12 = ops.load(m.a12);
        m21 = ops.load(m.a21);
        m22 = ops.load(m.a22);
        h = ops.load(step);
        half_h = h * typename Ops::Real(0.5);
        h_sixth = ops.mul(h, ops.load(1.0 / 6.0));
    }
};

template <class Ops>
struct EulerKernel {
    State<Ops> operator()(const Ops& ops, const LoadedSystem<Ops>& sys,
                          const State<Ops>& s) const {
        const auto y1 = ops.add(ops.mul(sys.m11, s.x1), ops.mul(sys.m12, s.x2));
        const auto y2 = ops.add(ops.mul(sys.m21, s.x1), ops.mul(sys.m22, s.x2));
        return {ops.add(s.x1, ops.mul(sys.h, y1)), ops.add(s.x2, ops.mul(sys.h, y2))};
    }
};

template <class Ops>
struct Rk4Kernel {
    State<Ops> operator()(const Ops& ops, const LoadedSystem<Ops>& sys,
                          const State<Ops>& s) const {
    using R = typename Ops::Real;
    const auto mv1 = [&](R a, R b) { return ops.add(ops.mul(sys.m11, a), ops.mul(sys.m12, b)); };
    const auto mv2 = [&](R a, R b) { return ops.add(ops.mul(sys.m21, a), ops.mul(sys.m22, b)); };

    const R k11 = mv1(s.x1, s.x2), k12 = mv2(s.x1, s.x2);
    const R t21 = ops.add(s.x1, ops.mul(sys.half_h, k11));
    const R t22 = ops.add(s.x2, ops.mul(sys.half_h, k12));
    const R k21 = mv1(t21, t22), k22 = mv2(t21, t22);
    const R t31 = ops.add(s.x1, ops.mul(sys.half_h, k21));
    const R t32 = ops.add(s.x2, ops.mul(sys.half_h, k22));
    const R k31 = mv1(t31, t32), k32 = mv2(t31, t32);
    const R t41 = ops.add(s.x1, ops.mul(sys.h, k31));
    const R t42 = ops.add(s.x2, ops.mul(sys.h, k32));
    const R k41 = mv1(t41, t42), k42 = mv2(t41, t42);

    const R two{2};
    const R s1 = ops.add(ops.add(ops.add(k11, two * k21), two * k31), k41);
    const R s2 = ops.add(ops.add(ops.add(k12, two * k22), two * k32), k42);
    return {ops.add(s.x1, ops.mul(sys.h_sixth, s1)), ops.add(s.x2, ops.mul(sys.h_sixth, s2))};
    }
};

struct InjectionNoise {
    double two_pow_neg_p;
    SplitMix64 rng;

    void perturb(State<DoubleOps>& s) {
        s.x1 += std::fabs(s.x1) * two_pow_neg_p * rng.next_symmetric();
        s.x2 += std::fabs(s.x2) * two_pow_neg_p * rng.next_symmetric();
    }
};

// Line-crossing detector in eigen-coordinates u = (v1' x, v2' x).  The
// wedge function g(u) = tan(theta)|u1| - |u2| is positive around the stable
// axis; the first transition to g < 0 is the crossing.
struct HitDetector {
    double v1p1, v1p2, v2p1, v2p2;
    double tan_theta;
    double g_prev;

    HitDetector(const EigenStructure& eig, double theta, const Vec2& x0)
        : v1p1(eig.v1p.c1), v1p2(eig.v1p.c2), v2p1(eig.v2p.c1), v2p2(eig.v2p.c2),
          tan_theta(std::tan(theta)) {
        g_prev = eval(x0.c1, x0.c2);
    }

    double eval(double x1, double x2) const {
        const double u1 = v1p1 * x1 + v1p2 * x2;
        const double u2 = v2p1 * x1 + v2p2 * x2;
        return tan_theta * std::fabs(u1) - std::fabs(u2);
    }

    // Returns the interpolation fraction in [0, 1] on a detected crossing.
    bool check(double x1, double x2, double& fraction) {
        const double g = eval(x1, x2);
        const bool crossed = (g < 0.0) && (g_prev >= 0.0);
        if (crossed) fraction = g_prev / (g_prev - g);
        g_prev = g;
        return crossed;
    }
};

HitFragment make_fragment(const Vec2& prev, const Vec2& next, double fraction,
                          long long completed_steps, double h,
                          const EigenStructure& eig) {
    HitFragment frag;
    frag.fraction = fraction;
    frag.x_cross = prev + fraction * (next - prev);
    frag.y = frag.x_cross.norm();
    frag.t_hit = (static_cast<double>(completed_steps - 1) + fraction) * h;
    const double u2 = eig.v2p.dot(frag.x_cross);
    frag.branch = (u2 >= 0.0) ? +1 : -1;
    return frag;
}

template <class Ops, class Kernel, class Perturb>
TrajectoryOutcome run_loop(const Ops& ops, Kernel kernel, Perturb perturb,
                           const TrajectoryConfig& cfg, const StopCondition& stop,
                           const std::function<void(long long, double, const Vec2&)>* observer) {
    const Mat2 m = build_rotated_matrix(cfg.spec);
    const LoadedSystem<Ops> sys(ops, m, cfg.h);
    const Vec2 x0 = initial_value(cfg.spec);
    const EigenStructure eig = eigenstructure(cfg.spec);

    State<Ops> s{ops.load(x0.c1), ops.load(x0.c2)};
    Vec2 cur{static_cast<double>(s.x1), static_cast<double>(s.x2)};
    Vec2 prev = cur;

    HitDetector detector(eig, stop.theta, cur);

    long long by_time = (cfg.h > 0.0) ? static_cast<long long>(cfg.t_max / cfg.h) : 0;
    if (by_time < 0) by_time = 0;
    const bool budget_limited = cfg.max_steps < by_time;
    const long long n_max = budget_limited ? cfg.max_steps : by_time;

    TrajectoryOutcome out;
    if (observer) (*observer)(0, 0.0, cur);

    long long n = 0;
    while (n < n_max) {
        State<Ops> next = kernel(ops, sys, s);
        perturb(next);
        ++n;
        prev = cur;
        cur = {static_cast<double>(next.x1), static_cast<double>(next.x2)};
        s = next;
        if (observer) (*observer)(n, static_cast<double>(n) * cfg.h, cur);
        if (stop.line_hit) {
            double fraction = 0.0;
            if (detector.check(cur.c1, cur.c2, fraction)) {
                out.reason = StopReason::LineHit;
                out.hit = make_fragment(prev, cur, fraction, n, cfg.h, eig);
                break;
            }
        }
        if (!cur.finite()) {
            out.reason = StopReason::Diverged;
            break;
        }
    }

    if (!out.hit && out.reason != StopReason::Diverged)
        out.reason = (n >= n_max && budget_limited) ? StopReason::StepBudget
                                                    : StopReason::TimeLimit;
    if (!cur.finite() && out.reason != StopReason::LineHit) out.reason = StopReason::Diverged;

    out.final_state = cur;
    out.prev_state = prev;
    out.steps = n;
    out.t_end = static_cast<double>(n) * cfg.h;
    return out;
}

struct NoPerturb {
    template <class S>
    void operator()(S&) const {}
};

template <class Ops>
TrajectoryOutcome dispatch_kernel(const Ops& ops, const TrajectoryConfig& cfg,
                                  const StopCondition& stop,
                                  const std::function<void(long long, double, const Vec2&)>* obs) {
    if (cfg.stepper == StepperKind::RK4)
        return run_loop(ops, Rk4Kernel<Ops>{}, NoPerturb{}, cfg, stop, obs);
    return run_loop(ops, EulerKernel<Ops>{}, NoPerturb{}, cfg, stop, obs);
}

TrajectoryOutcome run_impl(const TrajectoryConfig& cfg, const StopCondition& stop,
                           const std::function<void(long long, double, const Vec2&)>* obs) {
    cfg.spec.validate();
    if (!(cfg.h > 0.0)) throw std::domain_error("TrajectoryConfig: h must be > 0");
    if (!(cfg.t_max > 0.0)) throw std::domain_error("TrajectoryConfig: t_max must be > 0");
    if (cfg.policy.kind == PrecisionKind::Emulated &&
        (cfg.policy.p < kEmulatedPMin || cfg.policy.p > kEmulatedPMax))
        throw std::domain_error("TrajectoryConfig: emulated p out of range");

    if (cfg.stepper == StepperKind::NoiseInjection) {
        InjectionNoise noise{std::exp2(-cfg.inject_p), SplitMix64(cfg.stream_seed)};
        DoubleOps ops;
        return run_loop(ops, EulerKernel<DoubleOps>{},
                        [&noise](State<DoubleOps>& s) { noise.perturb(s); }, cfg, stop, obs);
    }
    switch (cfg.policy.kind) {
        case PrecisionKind::NativeDouble: return dispatch_kernel(DoubleOps{}, cfg, stop, obs);
        case PrecisionKind::NativeSingle: return dispatch_kernel(SingleOps{}, cfg, stop, obs);
        case PrecisionKind::Emulated:
            return dispatch_kernel(EmulatedOps{cfg.policy.p}, cfg, stop, obs);
    }
    throw std::logic_error("run_trajectory: unknown precision kind");
}

}  // namespace

Vec2 euler_step(const Vec2& x, double h, const Mat2& m, const PrecisionPolicy& policy) {
    if (!x.finite() || !(h > 0.0)) throw std::domain_error("euler_step: invalid input");
    Vec2 r;
    switch (policy.kind) {
        case PrecisionKind::NativeDouble: {
            DoubleOps ops;
            LoadedSystem<DoubleOps> sys(ops, m, h);
            auto s = EulerKernel<DoubleOps>{}(ops, sys, State<DoubleOps>{x.c1, x.c2});
            r = {s.x1, s.x2};
            break;
        }
        case PrecisionKind::NativeSingle: {
            SingleOps ops;
            LoadedSystem<SingleOps> sys(ops, m, h);
            auto s = EulerKernel<SingleOps>{}(ops, sys,
                                              State<SingleOps>{ops.load(x.c1), ops.load(x.c2)});
            r = {static_cast<double>(s.x1), static_cast<double>(s.x2)};
            break;
        }
        case PrecisionKind::Emulated: {
            EmulatedOps ops{policy.p};
            LoadedSystem<EmulatedOps> sys(ops, m, h);
            auto s = EulerKernel<EmulatedOps>{}(
                ops, sys, State<EmulatedOps>{ops.load(x.c1), ops.load(x.c2)});
            r = {s.x1, s.x2};
            break;
        }
    }
    if (!r.finite()) throw divergence_error("euler_step: non-finite state");
    return r;
}

Vec2 rk4_step(const Vec2& x, double h, const Mat2& m, const PrecisionPolicy& policy) {
    if (!x.finite() || !(h > 0.0)) throw std::domain_error("rk4_step: invalid input");
    Vec2 r;
    switch (policy.kind) {
        case PrecisionKind::NativeDouble: {
            DoubleOps ops;
            LoadedSystem<DoubleOps> sys(ops, m, h);
            auto s = Rk4Kernel<DoubleOps>{}(ops, sys, State<DoubleOps>{x.c1, x.c2});
            r = {s.x1, s.x2};
            break;
        }
        case PrecisionKind::NativeSingle: {
            SingleOps ops;
            LoadedSystem<SingleOps> sys(ops, m, h);
            auto s = Rk4Kernel<SingleOps>{}(ops, sys,
                                            State<SingleOps>{ops.load(x.c1), ops.load(x.c2)});
            r = {static_cast<double>(s.x1), static_cast<double>(s.x2)};
            break;
        }
        case PrecisionKind::Emulated: {
            EmulatedOps ops{policy.p};
            LoadedSystem<EmulatedOps> sys(ops, m, h);
            auto s = Rk4Kernel<EmulatedOps>{}(ops, sys,
                                              State<EmulatedOps>{ops.load(x.c1), ops.load(x.c2)});
            r = {s.x1, s.x2};
            break;
        }
    }
    if (!r.finite()) throw divergence_error("rk4_step: non-finite state");
    return r;
}

Vec2 noise_injection_step(const Vec2& x, double h, const Mat2& m, double p, SplitMix64& rng) {
    Vec2 r = euler_step(x, h, m, PrecisionPolicy::native_double());
    const double scale = std::exp2(-p);
    r.c1 += std::fabs(r.c1) * scale * rng.next_symmetric();
    r.c2 += std::fabs(r.c2) * scale * rng.next_symmetric();
    if (!r.finite()) throw divergence_error("noise_injection_step: non-finite state");
    return r;
}

TrajectoryOutcome run_trajectory(const TrajectoryConfig& cfg, const StopCondition& stop) {
    return run_impl(cfg, stop, nullptr);
}

TrajectoryOutcome run_trajectory(const TrajectoryConfig& cfg, const StopCondition& stop,
                                 const std::function<void(long long, double, const Vec2&)>& observer) {
    return run_impl(cfg, stop, &observer);
}

}  // namespace saddle
