#pragma once

// Theta-weighted spectral calculus of the 2D boundary flux Jacobian
//
//   A_n(u) = [ rho v_n I   n ]        Theta = diag(1, 1, theta)
//            [ n^T         0 ]
//
// |A_n|_Theta  = Theta^-1 |Theta A_n Theta| Theta^-1
// (A_n)^-_Theta = Theta^-1 (Theta A_n Theta)^- Theta^-1
//
// Everything here is closed form and O(1); the explicit eigendecomposition lives
// in the test suite only.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "nitsche_flow/vec2.hpp"

namespace nitsche_flow {

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Velocity/pressure pair at a point, u = (v, p). Also used for test pairs psi = (phi, chi).
template <class T = double>
struct Sample {
    Vec2<T> v{};
    T p{};
};
using StateSample = Sample<double>;

/// Outward unit normal plus the physical/weight parameters of one boundary point.
struct BoundaryPoint {
    Point n{};
    double rho{1.0};
    double theta{1.0};

    [[nodiscard]] Point n_perp() const { return perp(n); }

    static BoundaryPoint make(Point n, double rho, double theta) {
        if (!(std::abs(norm(n) - 1.0) <= 1e-12)) throw DomainError("BoundaryPoint: normal is not a unit vector");
        if (!(rho > 0.0)) throw DomainError("BoundaryPoint: rho must be positive");
        if (!(theta > 0.0)) throw DomainError("BoundaryPoint: theta must be positive");
        return {n, rho, theta};
    }
};

/// Coefficients of the Theta-weighted Jacobian for given (rho, v_n, theta).
struct SpectralBundle {
    double rho{};
    double theta{};
    double vn{};
    double vn_minus{};  // min(v_n, 0)
    double vn_plus{};   // max(v_n, 0)
    double root{};      // sqrt(4 theta^2 + rho^2 v_n^2) = lambda_p - lambda_m
    double lambda_p{};
    double lambda_m{};
    double alpha{};
    double beta{};
};

namespace detail {
inline void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw DomainError(std::string("non-finite ") + what);
}
}  // namespace detail

inline SpectralBundle spectral_bundle(double rho, double vn, double theta) {
    detail::require_finite(rho, "rho");
    detail::require_finite(vn, "v_n");
    detail::require_finite(theta, "theta");
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    if (!(rho > 0.0)) throw DomainError("rho must be positive");

    SpectralBundle s;
    s.rho = rho;
    s.theta = theta;
    s.vn = vn;
    s.vn_minus = std::min(vn, 0.0);
    s.vn_plus = std::max(vn, 0.0);
    const double rvn = rho * vn;
    s.root = std::sqrt(4.0 * theta * theta + rvn * rvn);
    // Each root is evaluated in its cancellation-free form; lambda_p * lambda_m = -theta^2.
    if (rvn >= 0.0) {
        s.lambda_p = 0.5 * (rvn + s.root);
        s.lambda_m = -theta * theta / s.lambda_p;
    } else {
        s.lambda_m = 0.5 * (rvn - s.root);
        s.lambda_p = -theta * theta / s.lambda_m;
    }
    // alpha = (rho|v_n| - root)^2 / (4 root); rho|v_n| - root = -4 theta^2 / (rho|v_n| + root).
    const double gap = 4.0 * theta * theta / (rho * std::abs(vn) + s.root);
    s.alpha = gap * gap / (4.0 * s.root);
    s.beta = -s.lambda_m / s.root;
    return s;
}

inline std::pair<double, double> lambda_pm(double rho, double vn, double theta) {
    const auto s = spectral_bundle(rho, vn, theta);
    return {s.lambda_p, s.lambda_m};
}

inline std::pair<double, double> alpha_beta(double rho, double vn, double theta) {
    const auto s = spectral_bundle(rho, vn, theta);
    return {s.alpha, s.beta};
}

/// |A_n|_Theta psi . psi2 with frozen coefficients; psi and psi2 may carry different scalar types.
template <class A, class B>
auto abs_theta_form(const SpectralBundle& s, const Point& n, const Sample<A>& psi, const Sample<B>& psi2) {
    const Point t = perp(n);
    const auto tang = dot(psi.v, t) * dot(psi2.v, t);
    const auto pn = dot(psi.v, n);
    const auto pn2 = dot(psi2.v, n);
    const double rvn = s.rho * s.vn;
    return s.rho * std::abs(s.vn) * tang +
           (psi.p * psi2.p + 2.0 * s.theta * s.theta * pn * pn2 + (psi.p + rvn * pn) * (psi2.p + rvn * pn2)) /
               s.root;
}

/// (A_n)^-_Theta psi . psi2 with frozen coefficients.
template <class A, class B>
auto neg_theta_form(const SpectralBundle& s, const Point& n, const Sample<A>& psi, const Sample<B>& psi2) {
    const Point t = perp(n);
    const auto tang = dot(psi.v, t) * dot(psi2.v, t);
    return s.rho * s.vn_minus * tang -
           (psi.p + s.lambda_m * dot(psi.v, n)) * (psi2.p + s.lambda_m * dot(psi2.v, n)) / s.root;
}

/// A_n psi . psi2 = rho v_n phi.phi2 + chi phi2_n + phi_n chi2.
template <class A, class B>
auto full_jacobian_form(double rho, double vn, const Point& n, const Sample<A>& psi, const Sample<B>& psi2) {
    return rho * vn * dot(psi.v, psi2.v) + psi.p * dot(psi2.v, n) + dot(psi.v, n) * psi2.p;
}

inline double abs_theta_bilinear(const BoundaryPoint& bp, double vn, const StateSample& psi, const StateSample& psi2) {
    return abs_theta_form(spectral_bundle(bp.rho, vn, bp.theta), bp.n, psi, psi2);
}

inline double neg_theta_bilinear(const BoundaryPoint& bp, double vn, const StateSample& psi, const StateSample& psi2) {
    return neg_theta_form(spectral_bundle(bp.rho, vn, bp.theta), bp.n, psi, psi2);
}

/// Constants entering the local weight theta.
struct ThetaConstants {
    double c_dt{0.1};
    double c_st{4.0};
};

/// theta^2 = (rho |v|)^2 + c_dt^2 (rho d_K / d_t)^2 + c_St^2 (mu / d_K)^2.
/// d_t = +inf selects the stationary weight (time term dropped).
inline double theta_local(double rho, double v_mag, double mu, double d_K, double d_t, ThetaConstants c = {}) {
    if (!(d_K > 0.0) || !std::isfinite(d_K)) throw DomainError("theta_local: d_K must be positive and finite");
    if (!(d_t > 0.0)) throw DomainError("theta_local: d_t must be positive (or +inf)");
    if (!(c.c_dt * c.c_dt + c.c_st * c.c_st > 0.0)) throw DomainError("theta_local: c_dt^2 + c_St^2 must be positive");
    detail::require_finite(rho, "rho");
    detail::require_finite(v_mag, "|v|");
    detail::require_finite(mu, "mu");
    const double conv = rho * v_mag;
    const double unsteady = std::isinf(d_t) ? 0.0 : c.c_dt * rho * d_K / d_t;
    const double visc = c.c_st * mu / d_K;
    const double theta = std::sqrt(conv * conv + unsteady * unsteady + visc * visc);
    if (!(theta > 0.0)) throw DomainError("theta_local: theta vanishes (no velocity, no viscosity, stationary)");
    return theta;
}

/// Outflow energy quadratic Q(v, p, delta) = rho (v_n^+/2 + (1/2 - delta) v_n^-) v_n^2 + (delta rho v_n^- v_n + p) p / theta.
inline double q_quadratic(double rho, double vn, double theta, double p, double delta) {
    if (!(theta > 0.0)) throw DomainError("q_quadratic: theta must be positive");
    const double vp = std::max(vn, 0.0);
    const double vm = std::min(vn, 0.0);
    return rho * (0.5 * vp + (0.5 - delta) * vm) * vn * vn + (delta * rho * vm * vn + p) * p / theta;
}

}  // namespace nitsche_flow
