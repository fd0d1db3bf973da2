#include "saddle/numerics.hpp"

#include <limits>

namespace saddle {

double round_to_p(double x, int p) {
    if (!std::isfinite(x)) throw std::domain_error("round_to_p: non-finite input");
    if (p < kEmulatedPMin || p > kEmulatedPMax)
        throw std::domain_error("round_to_p: p out of range [" +
                                std::to_string(kEmulatedPMin) + ", " +
                                std::to_string(kEmulatedPMax) + "]");
    if (x == 0.0) return 0.0;
    // Subnormal carrier values have fewer than 53 significand bits; route
    // them through frexp so the bit-twiddling fast path stays valid.
    if (std::fabs(x) < std::numeric_limits<double>::min()) {
        int e = 0;
        double m = std::frexp(x, &e);           // x = m * 2^e, |m| in [0.5, 1)
        double scaled = std::ldexp(m, p + 1);   // |scaled| in [2^p, 2^(p+1))
        return std::ldexp(std::nearbyint(scaled), e - (p + 1));
    }
    return detail::round_to_p_unchecked(x, p);
}

TrigPair rotation_trig(double phi) {
    TrigPair t{std::cos(phi), std::sin(phi)};
    constexpr double quarter_pi = 0.25 * 3.141592653589793238462643383279502884;
    if (phi == quarter_pi) t.sin_phi = t.cos_phi;
    return t;
}

Mat2 rotation(double phi) {
    const auto [c, s] = rotation_trig(phi);
    return {c, -s, s, c};
}

namespace {

struct OpsDouble {
    static double add(double a, double b) { return a + b; }
    static double mul(double a, double b) { return a * b; }
};

struct OpsSingle {
    static double add(double a, double b) {
        return static_cast<double>(static_cast<float>(a) + static_cast<float>(b));
    }
    static double mul(double a, double b) {
        return static_cast<double>(static_cast<float>(a) * static_cast<float>(b));
    }
};

struct OpsEmulated {
    int p;
    double add(double a, double b) const { return detail::round_to_p_unchecked(a + b, p); }
    double mul(double a, double b) const { return detail::round_to_p_unchecked(a * b, p); }
};

template <class Ops>
Vec2 mat_apply_impl(const Mat2& m, const Vec2& v, const Ops& ops) {
    const double r1 = ops.add(ops.mul(m.a11, v.c1), ops.mul(m.a12, v.c2));
    const double r2 = ops.add(ops.mul(m.a21, v.c1), ops.mul(m.a22, v.c2));
    return {r1, r2};
}

}  // namespace

Vec2 mat_apply(const Mat2& m, const Vec2& v, const PrecisionPolicy& policy) {
    if (!m.finite() || !v.finite())
        throw std::domain_error("mat_apply: non-finite input");
    Vec2 r;
    switch (policy.kind) {
        case PrecisionKind::NativeDouble: {
            OpsDouble ops;
            r = mat_apply_impl(m, v, ops);
            break;
        }
        case PrecisionKind::NativeSingle: {
            OpsSingle ops;
            r = mat_apply_impl(m, v, ops);
            break;
        }
        case PrecisionKind::Emulated: {
            OpsEmulated ops{policy.p};
            r = mat_apply_impl(m, v, ops);
            break;
        }
    }
    if (!r.finite()) throw divergence_error("mat_apply: overflow to non-finite");
    return r;
}

double quantize(double x, const PrecisionPolicy& policy) {
    switch (policy.kind) {
        case PrecisionKind::NativeDouble: return x;
        case PrecisionKind::NativeSingle: return static_cast<double>(static_cast<float>(x));
        case PrecisionKind::Emulated: return round_to_p(x, policy.p);
    }
    return x;
}

Vec2 quantize(const Vec2& v, const PrecisionPolicy& policy) {
    return {quantize(v.c1, policy), quantize(v.c2, policy)};
}

Mat2 quantize(const Mat2& m, const PrecisionPolicy& policy) {
    return {quantize(m.a11, policy), quantize(m.a12, policy), quantize(m.a21, policy),
            quantize(m.a22, policy)};
}

}  // namespace saddle
