#include "saddle/system.hpp"

#include <cmath>

namespace saddle {

Mat2 build_rotated_matrix(const SaddleSpec& spec) {
    spec.validate();
    const auto [c, s] = rotation_trig(spec.phi);
    const double l = spec.lambda;
    const double m = spec.mu;
    // R diag(-mu, lambda) R^T, written out so the symmetry is exact.
    const double off = -(l + m) * s * c;
    return {-m * c * c + l * s * s, off, off, -m * s * s + l * c * c};
}

Vec2 initial_value(const SaddleSpec& spec) {
    spec.validate();
    const auto [c, s] = rotation_trig(spec.phi);
    return {spec.x0_magnitude * c, spec.x0_magnitude * s};
}

EigenStructure eigenstructure(const SaddleSpec& spec) {
    spec.validate();
    const auto [c, s] = rotation_trig(spec.phi);
    EigenStructure eig;
    eig.v1 = {c, s};
    eig.v2 = {-s, c};
    eig.v1p = eig.v1;  // orthogonal case: left rows are the right vectors
    eig.v2p = eig.v2;
    return eig;
}

Vec2 exact_linear_flow(const SaddleSpec& spec, const Vec2& x, double t) {
    spec.validate();
    if (!(t >= 0.0)) throw std::domain_error("exact_linear_flow: t must be >= 0");
    if (!x.finite()) throw std::domain_error("exact_linear_flow: non-finite state");
    if (t == 0.0) return x;
    const auto [c, s] = rotation_trig(spec.phi);
    const double es = std::exp(-spec.mu * t);
    const double eu = std::exp(spec.lambda * t);
    if (!std::isfinite(eu)) throw divergence_error("exact_linear_flow: e^(lambda t) overflowed");
    // R diag(es, eu) R^T x via eigen-coordinates.
    const double u1 = c * x.c1 + s * x.c2;
    const double u2 = -s * x.c1 + c * x.c2;
    const Vec2 r{c * es * u1 - s * eu * u2, s * es * u1 + c * eu * u2};
    if (!r.finite()) throw divergence_error("exact_linear_flow: non-finite state");
    return r;
}

GeneralSystem make_linear_system(const SaddleSpec& spec) {
    GeneralSystem sys;
    sys.linear_part = build_rotated_matrix(spec);
    return sys;
}

}  // namespace saddle
