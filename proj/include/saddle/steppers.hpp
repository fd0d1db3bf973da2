#pragma once

// Fixed-step integrators running under a PrecisionPolicy, plus the stochastic
// noise-injection stepper that realizes the per-step uniform error model at
// full carrier precision.
//
// Operation order inside a step is frozen (it determines which roundings
// occur, and therefore the exact trajectory):
//   Euler: y = M x (per component: two multiplies, one add), z = h*y,
//          x' = x + z componentwise.
//   RK4:   k1 = M x, k2 = M(x + (h/2) k1), k3 = M(x + (h/2) k2),
//          k4 = M(x + h k3), s = ((k1 + 2 k2) + 2 k3) + k4,
//          x' = x + (h*(1/6)) s, with 1/6 loaded as a policy-rounded
//          constant and every multiply/add rounded per policy.
// Multiplications by 0.5 and 2 are exact in binary arithmetic and do not
// round.

#include <cstdint>
#include <functional>
#include <optional>

#include "saddle/numerics.hpp"
#include "saddle/rng.hpp"
#include "saddle/system.hpp"

namespace saddle {

enum class StepperKind { Euler, RK4, NoiseInjection };

/// One Euler step x + h*(M x) with every operation rounded per policy.
Vec2 euler_step(const Vec2& x, double h, const Mat2& m, const PrecisionPolicy& policy);

/// One classical RK4 step with every operation rounded per policy.
Vec2 rk4_step(const Vec2& x, double h, const Mat2& m, const PrecisionPolicy& policy);

/// Full-precision Euler step followed by an additive perturbation
/// eps_i ~ U[-|x'_i| 2^-p, |x'_i| 2^-p] drawn per component from rng.
/// p may be fractional (an effective precision).
Vec2 noise_injection_step(const Vec2& x, double h, const Mat2& m, double p, SplitMix64& rng);

/// Stop condition evaluated once per step on the post-step state: crossing
/// of the lines through the origin in the directions
/// cos(theta) v1 +/- sin(theta) v2.
struct StopCondition {
    bool line_hit{true};
    double theta{0.7853981633974483};  // pi/4

    static StopCondition none() { return {false, 0.0}; }
    static StopCondition line(double theta) { return {true, theta}; }
};

struct TrajectoryConfig {
    StepperKind stepper{StepperKind::Euler};
    PrecisionPolicy policy{};       // arithmetic for Euler/RK4
    double h{1e-4};                 // step size, > 0
    double t_max{60.0};             // safety cap on integrated time
    long long max_steps{200000000}; // per-trajectory step budget
    SaddleSpec spec{};
    double inject_p{23.5};          // NoiseInjection model precision
    std::uint64_t stream_seed{0};   // NoiseInjection stream
};

enum class StopReason { LineHit, TimeLimit, StepBudget, Diverged };

/// Crossing data produced by linear interpolation between the two states
/// bracketing a detected sign change.
struct HitFragment {
    double y{0.0};         // |x| at the interpolated crossing
    double t_hit{0.0};     // (completed steps + fraction) * h
    double fraction{0.0};  // position of the crossing between the states
    int branch{0};         // sign of the unstable eigen-coordinate
    Vec2 x_cross{};
};

struct TrajectoryOutcome {
    StopReason reason{StopReason::TimeLimit};
    Vec2 final_state{};            // post-step state when the run ended
    Vec2 prev_state{};             // state one step earlier (event bracket)
    long long steps{0};
    double t_end{0.0};
    std::optional<HitFragment> hit{};
};

/// Iterates the configured stepper from initial_value(spec) until the stop
/// condition fires, t_max is reached, or the step budget runs out.  The
/// initial state, matrix and step size are quantized into the policy grid
/// before the loop.  Budget exhaustion is an outcome, not an error;
/// divergence is reported via StopReason::Diverged.
TrajectoryOutcome run_trajectory(const TrajectoryConfig& cfg, const StopCondition& stop);

/// Diagnostic variant invoking observer(step_index, t, state) after every
/// step (step 0 reports the initial state).  Considerably slower; intended
/// for trajectory dumps and tests.
TrajectoryOutcome run_trajectory(const TrajectoryConfig& cfg, const StopCondition& stop,
                                 const std::function<void(long long, double, const Vec2&)>& observer);

}  // namespace saddle
