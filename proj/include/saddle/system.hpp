#pragma once

// The planar saddle system: a linear field with eigenvalues -mu and lambda,
// rotated by phi about the origin, plus an optional nonlinear perturbation
// for the variance quadrature.

#include <functional>
#include <stdexcept>

#include "saddle/numerics.hpp"

namespace saddle {

/// Definition of the rotated saddle ODE and its starting point.
struct SaddleSpec {
    double lambda{1.0};        // unstable eigenvalue, > 0
    double mu{1.0};            // stable eigenvalue magnitude, > 0
    double phi{0.0};           // rotation angle, [0, pi/2)
    double x0_magnitude{1.0};  // |x0|, in (0, 1]

    void validate() const {
        if (!(lambda > 0.0)) throw std::domain_error("SaddleSpec: lambda must be > 0");
        if (!(mu > 0.0)) throw std::domain_error("SaddleSpec: mu must be > 0");
        if (!(phi >= 0.0 && phi < 1.5707963267948966))
            throw std::domain_error("SaddleSpec: phi must be in [0, pi/2)");
        if (!(x0_magnitude > 0.0 && x0_magnitude <= 1.0))
            throw std::domain_error("SaddleSpec: x0_magnitude must be in (0, 1]");
    }
};

/// Unit right-eigenvectors v1 (for -mu), v2 (for lambda) and the matching
/// left-eigenvector rows.  For the rotated-orthonormal system the left rows
/// are the transposes of the right vectors, and v_i' v_j = delta_ij.
struct EigenStructure {
    Vec2 v1;   // stable direction
    Vec2 v2;   // unstable direction
    Vec2 v1p;  // left row for -mu
    Vec2 v2p;  // left row for lambda
};

/// General planar field b(x) = B x + tau(x), tau(0) = 0, Dtau(0) = 0.
/// tau and its Jacobian are caller-supplied callbacks.
struct GeneralSystem {
    Mat2 linear_part;
    std::function<Vec2(const Vec2&)> tau;
    std::function<Mat2(const Vec2&)> tau_jacobian;

    Vec2 value(const Vec2& x) const {
        Vec2 v = linear_part * x;
        if (tau) v = v + tau(x);
        return v;
    }
    Mat2 jacobian(const Vec2& x) const {
        Mat2 j = linear_part;
        if (tau_jacobian) j = j + tau_jacobian(x);
        return j;
    }
};

/// R(phi) diag(-mu, lambda) R(phi)^T, built from closed-form entries.
Mat2 build_rotated_matrix(const SaddleSpec& spec);

/// |x0| (cos phi, sin phi): the rotated image of |x0| (1, 0), which lies on
/// the stable manifold.
Vec2 initial_value(const SaddleSpec& spec);

/// Analytic eigenstructure of the rotated matrix.
EigenStructure eigenstructure(const SaddleSpec& spec);

/// Reference flow e^(Bbar t) x at full carrier precision.  Throws
/// divergence_error if e^(lambda t) overflows.
Vec2 exact_linear_flow(const SaddleSpec& spec, const Vec2& x, double t);

/// The rotated linear system as a GeneralSystem (tau absent).
GeneralSystem make_linear_system(const SaddleSpec& spec);

}  // namespace saddle
