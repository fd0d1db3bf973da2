#include "saddle/theory.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace saddle {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct SaddleEigen {
    double lambda;  // positive eigenvalue
    double mu;      // magnitude of the negative eigenvalue
    Vec2 v1;        // unit right eigenvector for -mu
    Vec2 v2;        // unit right eigenvector for lambda
    Vec2 v1p;       // left rows, v_i' v_j = delta_ij
    Vec2 v2p;
};

// Analytic eigen-decomposition of a 2x2 saddle matrix (det < 0).
SaddleEigen decompose(const Mat2& b) {
    const double tr = b.trace();
    const double det = b.det();
    const double disc = tr * tr - 4.0 * det;
    if (!(det < 0.0) || !(disc > 0.0))
        throw std::domain_error("sigma_inf_sq_quadrature: linear part is not a saddle");
    const double root = std::sqrt(disc);
    SaddleEigen e;
    e.lambda = 0.5 * (tr + root);
    e.mu = -0.5 * (tr - root);

    auto right_vector = [&](double eig) {
        // (B - eig I) v = 0; pick the better-conditioned row.
        Vec2 v;
        if (std::fabs(b.a12) + std::fabs(b.a11 - eig) >=
            std::fabs(b.a21) + std::fabs(b.a22 - eig))
            v = {-b.a12, b.a11 - eig};
        else
            v = {-(b.a22 - eig), b.a21};
        const double n = v.norm();
        return Vec2{v.c1 / n, v.c2 / n};
    };
    e.v1 = right_vector(-e.mu);
    e.v2 = right_vector(e.lambda);
    // Left rows are the rows of [v1 v2]^-1.
    const double d = e.v1.c1 * e.v2.c2 - e.v2.c1 * e.v1.c2;
    if (std::fabs(d) < 1e-14)
        throw std::domain_error("sigma_inf_sq_quadrature: defective eigenbasis");
    e.v1p = {e.v2.c2 / d, -e.v2.c1 / d};
    e.v2p = {-e.v1.c2 / d, e.v1.c1 / d};
    return e;
}

struct FlowJacobian {
    Vec2 x;
    Mat2 j;
};

// One RK4 step of the coupled system (x' = b(x), J' = Db(x) J).
FlowJacobian variational_rk4(const GeneralSystem& sys, const FlowJacobian& s, double dt) {
    auto deriv = [&](const FlowJacobian& v) {
        return FlowJacobian{sys.value(v.x), sys.jacobian(v.x) * v.j};
    };
    auto axpy = [](const FlowJacobian& v, double a, const FlowJacobian& d) {
        return FlowJacobian{v.x + a * d.x, v.j + d.j * a};
    };
    const FlowJacobian k1 = deriv(s);
    const FlowJacobian k2 = deriv(axpy(s, dt / 2.0, k1));
    const FlowJacobian k3 = deriv(axpy(s, dt / 2.0, k2));
    const FlowJacobian k4 = deriv(axpy(s, dt, k3));
    FlowJacobian r = s;
    r.x = r.x + (dt / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    r.j = r.j + (k1.j + (k2.j + k3.j) * 2.0 + k4.j) * (dt / 6.0);
    return r;
}

// D_s = lim_{t->inf} e^(-lambda t) v2' grad phi_t(x_node): integrate the
// variational equation until the row stops moving over one unit of time.
Vec2 limit_row(const GeneralSystem& sys, const SaddleEigen& eig, const Vec2& x_node,
               double quad_tol) {
    const double dt = 0.01 / std::max(1.0, eig.lambda + eig.mu);
    const double horizon = 50.0 / eig.lambda;
    FlowJacobian st{x_node, Mat2::identity()};
    double t = 0.0;
    auto row = [&](const FlowJacobian& s, double time) {
        const double w = std::exp(-eig.lambda * time);
        return Vec2{w * (eig.v2p.c1 * s.j.a11 + eig.v2p.c2 * s.j.a21),
                    w * (eig.v2p.c1 * s.j.a12 + eig.v2p.c2 * s.j.a22)};
    };
    Vec2 prev = row(st, 0.0);
    const long steps_per_unit = std::lround(1.0 / dt);
    double residual = std::numeric_limits<double>::infinity();
    while (t < horizon) {
        for (long i = 0; i < steps_per_unit; ++i) {
            st = variational_rk4(sys, st, dt);
            t += dt;
        }
        const Vec2 cur = row(st, t);
        residual = (cur - prev).norm() / std::max(1.0, cur.norm());
        if (residual < quad_tol) return cur;
        prev = cur;
    }
    throw std::runtime_error(
        "sigma_inf_sq_quadrature: D_s limit did not converge within 50/lambda "
        "(residual " + std::to_string(residual) + ")");
}

}  // namespace

double sigma_inf_sq_linear(const SaddleSpec& spec, double p) {
    spec.validate();
    const double cs = std::cos(spec.phi) * std::sin(spec.phi);
    const double x0 = spec.x0_magnitude;
    return std::exp2(-2.0 * p) * x0 * x0 * cs * cs / (3.0 * (spec.lambda + spec.mu));
}

QuadratureResult sigma_inf_sq_quadrature(const GeneralSystem& system, const Vec2& x0,
                                         double p, double t_cut, double quad_tol) {
    if (!(t_cut > 0.0) || !(quad_tol > 0.0))
        throw std::domain_error("sigma_inf_sq_quadrature: t_cut and quad_tol must be > 0");
    const SaddleEigen eig = decompose(system.linear_part);

    // Reference trajectory cached on a dyadic grid so every Simpson
    // refinement level lands on stored states.
    const int kMaxLevel = 12;               // up to 4096 intervals
    const int kRefStepsPerCell = 32;        // reference RK4 substeps per finest cell
    const std::size_t n_fine = std::size_t{1} << kMaxLevel;
    std::vector<Vec2> traj(n_fine + 1);
    {
        const double dt = t_cut / static_cast<double>(n_fine * kRefStepsPerCell);
        traj[0] = x0;
        Vec2 x = x0;
        for (std::size_t cell = 1; cell <= n_fine; ++cell) {
            for (int i = 0; i < kRefStepsPerCell; ++i) {
                const Vec2 k1 = system.value(x);
                const Vec2 k2 = system.value(x + (dt / 2.0) * k1);
                const Vec2 k3 = system.value(x + (dt / 2.0) * k2);
                const Vec2 k4 = system.value(x + dt * k3);
                x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            traj[cell] = x;
        }
    }

    // p-free integrand e^(-2 lambda s) (D1^2 x1^2 + D2^2 x2^2); the 2^-2p/3
    // factor is applied at the end.
    std::vector<double> g(n_fine + 1, std::numeric_limits<double>::quiet_NaN());
    auto integrand = [&](std::size_t idx) {
        if (std::isnan(g[idx])) {
            const double s = t_cut * static_cast<double>(idx) / static_cast<double>(n_fine);
            const Vec2 xs = traj[idx];
            const Vec2 d = limit_row(system, eig, xs, quad_tol);
            g[idx] = std::exp(-2.0 * eig.lambda * s) *
                     (d.c1 * d.c1 * xs.c1 * xs.c1 + d.c2 * d.c2 * xs.c2 * xs.c2);
        }
        return g[idx];
    };

    auto simpson = [&](int level) {
        const std::size_t n = std::size_t{1} << level;  // intervals (even)
        const std::size_t stride = n_fine / n;
        const double dx = t_cut / static_cast<double>(n);
        double sum = integrand(0) + integrand(n_fine);
        for (std::size_t i = 1; i < n; ++i)
            sum += integrand(i * stride) * ((i % 2 == 1) ? 4.0 : 2.0);
        return sum * dx / 3.0;
    };

    double prev = simpson(6);
    double cur = prev;
    for (int level = 7; level <= kMaxLevel; ++level) {
        cur = simpson(level);
        const double scale = std::max(std::fabs(cur), 1e-300);
        if (std::fabs(cur - prev) <= quad_tol * scale) break;
        prev = cur;
    }

    const double scale_p = std::exp2(-2.0 * p) / 3.0;
    QuadratureResult res;
    res.value = std::max(0.0, cur) * scale_p;
    // Past t_cut: |D_s| <= 2 and |x_s| <= |x_{t_cut}| e^(-mu (s - t_cut)).
    const double xt2 = traj[n_fine].dot(traj[n_fine]);
    res.tail_bound = 2.0 * std::exp2(-2.0 * p) * xt2 *
                     std::exp(-2.0 * eig.lambda * t_cut) / (3.0 * (eig.lambda + eig.mu));
    return res;
}

double hitting_density(double y, double lambda, double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::domain_error("hitting_density: sigma must be > 0");
    if (!(y >= 0.0)) throw std::domain_error("hitting_density: y must be >= 0");
    if (y == 0.0) return 0.0;
    const double q = (lambda + mu) / mu;
    const double yq = std::pow(y, 2.0 * q);
    return (2.0 * (lambda + mu)) / (std::sqrt(2.0 * kPi) * sigma * mu) *
           std::pow(y, lambda / mu) * std::exp(-yq / (2.0 * sigma * sigma));
}

double hitting_cdf(double y, double lambda, double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::domain_error("hitting_cdf: sigma must be > 0");
    if (y <= 0.0) return 0.0;
    const double z = std::pow(y, (lambda + mu) / mu);
    return std::erf(z / (sigma * std::sqrt(2.0)));
}

double family_f(double x, double a) {
    if (!(a > 0.0)) throw std::domain_error("family_f: a must be > 0");
    if (!(x >= 0.0)) throw std::domain_error("family_f: x must be >= 0");
    const double x2 = x * x;
    return a * x * std::exp(-(kPi / 16.0) * a * a * x2 * x2);
}

double family_f_cdf(double x, double a) {
    if (!(a > 0.0)) throw std::domain_error("family_f_cdf: a must be > 0");
    if (x <= 0.0) return 0.0;
    return std::erf(std::sqrt(kPi) / 4.0 * a * x * x);
}

double predicted_a(const SaddleSpec& spec, double h, double p) {
    spec.validate();
    if (!(h > 0.0)) throw std::domain_error("predicted_a: h must be > 0");
    const double rel = std::fabs(spec.lambda - spec.mu) /
                       std::max(spec.lambda, spec.mu);
    if (rel > 1e-12)
        throw std::domain_error(
            "predicted_a: family requires lambda == mu (use hitting_density instead)");
    const double s2 = sigma_inf_sq_linear(spec, p) / h;
    if (s2 == 0.0) return std::numeric_limits<double>::infinity();
    return 4.0 / std::sqrt(2.0 * kPi * s2);
}

Moments hit_moments(double lambda, double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::domain_error("hit_moments: sigma must be > 0");
    const double q = mu / (lambda + mu);
    auto abs_moment = [&](double r) {
        return std::pow(sigma, r) * std::exp2(r / 2.0) * std::tgamma((r + 1.0) / 2.0) /
               std::sqrt(kPi);
    };
    Moments m;
    m.mean = abs_moment(q);
    const double second = abs_moment(2.0 * q);
    m.stddev = std::sqrt(std::max(0.0, second - m.mean * m.mean));
    return m;
}

TheoryPrediction predict(const SaddleSpec& spec, double h, double p) {
    spec.validate();
    if (!(h > 0.0)) throw std::domain_error("predict: h must be > 0");
    TheoryPrediction t;
    t.sigma_inf_sq = sigma_inf_sq_linear(spec, p);
    t.sigma_sq = t.sigma_inf_sq / h;
    t.gamma = spec.mu / (2.0 * (spec.lambda + spec.mu));
    const double rel = std::fabs(spec.lambda - spec.mu) / std::max(spec.lambda, spec.mu);
    t.a_predicted = (rel <= 1e-12) ? ((t.sigma_sq == 0.0)
                                          ? std::numeric_limits<double>::infinity()
                                          : 4.0 / std::sqrt(2.0 * kPi * t.sigma_sq))
                                   : std::numeric_limits<double>::quiet_NaN();
    if (t.sigma_sq > 0.0) {
        const Moments m = hit_moments(spec.lambda, spec.mu, std::sqrt(t.sigma_sq));
        t.mean_hit = m.mean;
        t.std_hit = m.stddev;
    }
    return t;
}

}  // namespace saddle
