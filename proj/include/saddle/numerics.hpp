#pragma once

// Exact 2D linear algebra plus the precision machinery (native and emulated
// p-bit rounding) that the steppers are built on.

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace saddle {

struct Vec2 {
    double c1{0.0};
    double c2{0.0};

    constexpr Vec2() = default;
    constexpr Vec2(double a, double b) : c1(a), c2(b) {}

    constexpr Vec2 operator+(const Vec2& r) const { return {c1 + r.c1, c2 + r.c2}; }
    constexpr Vec2 operator-(const Vec2& r) const { return {c1 - r.c1, c2 - r.c2}; }
    constexpr Vec2 operator*(double s) const { return {c1 * s, c2 * s}; }
    friend constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

    constexpr double dot(const Vec2& r) const { return c1 * r.c1 + c2 * r.c2; }
    double norm() const { return std::hypot(c1, c2); }
    bool finite() const { return std::isfinite(c1) && std::isfinite(c2); }
};

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11{0.0}, a12{0.0};
    double a21{0.0}, a22{0.0};

    constexpr Mat2() = default;
    constexpr Mat2(double m11, double m12, double m21, double m22)
        : a11(m11), a12(m12), a21(m21), a22(m22) {}

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diagonal(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

    constexpr Vec2 operator*(const Vec2& v) const {
        return {a11 * v.c1 + a12 * v.c2, a21 * v.c1 + a22 * v.c2};
    }
    constexpr Mat2 operator*(const Mat2& m) const {
        return {a11 * m.a11 + a12 * m.a21, a11 * m.a12 + a12 * m.a22,
                a21 * m.a11 + a22 * m.a21, a21 * m.a12 + a22 * m.a22};
    }
    constexpr Mat2 operator+(const Mat2& m) const {
        return {a11 + m.a11, a12 + m.a12, a21 + m.a21, a22 + m.a22};
    }
    constexpr Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
    constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }
    constexpr double trace() const { return a11 + a22; }
    constexpr double det() const { return a11 * a22 - a12 * a21; }
    bool finite() const {
        return std::isfinite(a11) && std::isfinite(a12) && std::isfinite(a21) &&
               std::isfinite(a22);
    }
};

/// Signalled when an operation produced a non-finite state (the trajectory
/// left the representable range).
struct divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The emulated-arithmetic carrier is IEEE binary64 (52 fraction bits).  The
// cap keeps carrier rounding at least 2^10 times below the emulated rounding
// scale, so a single rounding scale dominates.
inline constexpr int kCarrierFractionBits = 52;
inline constexpr int kEmulatedPMin = 2;
inline constexpr int kEmulatedPMax = kCarrierFractionBits - 10;

enum class PrecisionKind { NativeSingle, NativeDouble, Emulated };

/// Which arithmetic the solver runs under.  For Emulated, every add/multiply
/// result is rounded to a significand of 1+p bits (round half to even).
struct PrecisionPolicy {
    PrecisionKind kind{PrecisionKind::NativeDouble};
    int p{0};  // mantissa fraction bits, Emulated only

    static PrecisionPolicy native_single() { return {PrecisionKind::NativeSingle, 0}; }
    static PrecisionPolicy native_double() { return {PrecisionKind::NativeDouble, 0}; }
    static PrecisionPolicy emulated(int p) {
        if (p < kEmulatedPMin || p > kEmulatedPMax)
            throw std::domain_error("PrecisionPolicy: emulated p must be in [" +
                                    std::to_string(kEmulatedPMin) + ", " +
                                    std::to_string(kEmulatedPMax) + "], got " +
                                    std::to_string(p));
        return {PrecisionKind::Emulated, p};
    }

    /// Fraction bits of the arithmetic actually performed (23 for single,
    /// 52 for double, p for emulated).  Relative rounding scale is 2^-bits.
    int fraction_bits() const {
        switch (kind) {
            case PrecisionKind::NativeSingle: return 23;
            case PrecisionKind::NativeDouble: return 52;
            case PrecisionKind::Emulated: return p;
        }
        return 52;
    }
};

/// Rounds x to the nearest value of the form m*2^n with 1 <= |m| < 2 and m
/// expressible in 1+p significand bits, ties to even mantissa.  p = 23
/// reproduces IEEE binary32 rounding exactly.
double round_to_p(double x, int p);

namespace detail {

// Fast path used inside the emulated steppers: normal, finite x only,
// 1 <= p <= 51.  Rounds the binary64 value to 1+p significand bits by bit
// manipulation of the fraction field (ties to even).
inline double round_to_p_unchecked(double x, int p) {
    if (x == 0.0) return 0.0;
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    const int shift = kCarrierFractionBits - p;
    const std::uint64_t unit = std::uint64_t{1} << shift;
    const std::uint64_t frac = bits & (unit - 1);
    const std::uint64_t half = unit >> 1;
    bits &= ~(unit - 1);
    if (frac > half || (frac == half && (bits & unit))) bits += unit;
    return std::bit_cast<double>(bits);
}

}  // namespace detail

/// cos/sin pair of a rotation angle.  At the symmetric angle pi/4 the two
/// values are mathematically equal; libm is allowed a one-ulp spread there,
/// which would fake an asymmetry the rotated system does not have, so the
/// pair is returned bit-identical at that angle.
struct TrigPair {
    double cos_phi;
    double sin_phi;
};
TrigPair rotation_trig(double phi);

/// Rotation by phi about the origin: [[cos, -sin], [sin, cos]].
Mat2 rotation(double phi);

/// M*v with every intermediate multiply and add rounded per policy.
/// Throws divergence_error if the result is non-finite.
Vec2 mat_apply(const Mat2& m, const Vec2& v, const PrecisionPolicy& policy);

/// Rounds a value into the policy's representable grid (used when loading
/// constants and initial states into a reduced-precision computation).
double quantize(double x, const PrecisionPolicy& policy);
Vec2 quantize(const Vec2& v, const PrecisionPolicy& policy);
Mat2 quantize(const Mat2& m, const PrecisionPolicy& policy);

}  // namespace saddle
