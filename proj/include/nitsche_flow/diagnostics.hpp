#pragma once

// Post-processing: kinetic energy, dissipation split, discrete momentum balance, drag and error norms.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nitsche_flow/forms.hpp"

namespace nitsche_flow {

namespace detail {

struct PointState {
    Point v{};
    double p{};
    std::array<Point, 2> gv{};
};

inline PointState point_state(const Mesh& m, int c, const PointGeometry& g, const Field& u) {
    PointState s;
    for (int a = 0; a < 4; ++a) {
        const int i = m.cells[c][a];
        const Point va{u[3 * i], u[3 * i + 1]};
        s.v += g.N[a] * va;
        s.p += g.N[a] * u[3 * i + 2];
        s.gv[0] += va.x * g.dN[a];
        s.gv[1] += va.y * g.dN[a];
    }
    return s;
}

template <class F>
void for_cell_points(const Mesh& m, int order, F&& body) {
    const CellRule rule = tensor_rule(order);
    for (std::size_t c = 0; c < m.num_cells(); ++c)
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const auto g = map_point(m, static_cast<int>(c), rule.points[q].x, rule.points[q].y);
            body(static_cast<int>(c), g, rule.weights[q] * g.det);
        }
}

}  // namespace detail

/// (rho/2) int |v_h|^2.
inline double kinetic_energy(const Mesh& m, const Field& u, double rho) {
    double e = 0.0;
    detail::for_cell_points(m, kCellPoints, [&](int c, const PointGeometry& g, double w) {
        const auto s = detail::point_state(m, c, g, u);
        e += w * dot(s.v, s.v);
    });
    return 0.5 * rho * e;
}

/// mu int |grad v_h|^2.
inline double viscous_dissipation(const Mesh& m, const Field& u, double mu) {
    double e = 0.0;
    detail::for_cell_points(m, kCellPoints, [&](int c, const PointGeometry& g, double w) {
        const auto s = detail::point_state(m, c, g, u);
        e += w * (dot(s.gv[0], s.gv[0]) + dot(s.gv[1], s.gv[1]));
    });
    return mu * e;
}

struct EnergyReport {
    double t{};
    double kinetic{};
    double viscous{};                    // mu ||grad v||^2
    double boundary_dissipation{};       // boundary part of a^NaSt(u)(u)
    double stabilization_dissipation{};  // a_stab(u)(u) - l_stab(u)(u)
};

/// Boundary part of a(u)(u) in its non-negative form: |A|_Theta terms, Nitsche terms and the outflow quadratic.
inline double boundary_dissipation(const Assembler& a, const Field& u) {
    const Mesh& m = a.mesh();
    const FormConfig& cfg = a.config();
    if (cfg.mode != DiscretizationMode::Balanced) throw ConfigError("dissipation split requires balanced mode");
    double total = 0.0;
    for (const auto& e : m.bedges) {
        const double dK = m.diameter[e.cell];
        for (const auto& ep : map_edge(m, e.cell, e.local, kEdgePoints)) {
            const auto s = detail::point_state(m, e.cell, ep.cell, u);
            const Point n = ep.n;
            const double vn = dot(s.v, n);
            const Point dnv{dot(s.gv[0], n), dot(s.gv[1], n)};
            const double dnvn = dot(dnv, n);
            const double theta = a.theta_at(norm(s.v), dK);
            const double vnc = cfg.convection ? vn : 0.0;
            const BoundaryPoint bp{n, cfg.rho, theta};
            const StateSample full{s.v, s.p}, vel{s.v, 0.0};
            const double wall = cfg.convection ? 0.5 * abs_theta_bilinear(bp, vnc, vel, vel) : 0.0;
            double val = 0.0;
            switch (e.tag) {
                case BCTag::Characteristic:
                    val = 0.5 * abs_theta_bilinear({n, cfg.rho, cfg.unit_char_theta() ? 1.0 : theta}, vnc, full, full);
                    break;
                case BCTag::Wall:
                case BCTag::Inflow:
                    val = wall + cfg.mu * (cfg.gamma / dK * dot(s.v, s.v) - 2.0 * dot(s.v, dnv));
                    break;
                case BCTag::Symmetry:
                    val = wall + cfg.mu * (cfg.gamma / dK * vn * vn - 2.0 * vn * dnvn);
                    break;
                case BCTag::Outflow:
                    if (cfg.outflow == OutflowMode::DoNothing) {
                        val = 0.5 * cfg.rho * vnc * dot(s.v, s.v);
                    } else {
                        const double vt = dot(s.v, perp(n));
                        val = 0.5 * cfg.rho * std::abs(vnc) * vt * vt + q_quadratic(cfg.rho, vnc, theta, s.p - cfg.mu * dnvn, 1.0);
                    }
                    break;
            }
            total += ep.ds * val;
        }
    }
    return total;
}

/// Energy terms of a state; `td` is the time-derivative operator the state was computed with.
inline EnergyReport dissipation_split(const Assembler& a, const Field& u, const TimeDerivative& td = {}) {
    EnergyReport r;
    r.t = a.data().t;
    r.kinetic = kinetic_energy(a.mesh(), u, a.config().rho);
    r.viscous = viscous_dissipation(a.mesh(), u, a.config().mu);
    r.boundary_dissipation = boundary_dissipation(a, u);
    r.stabilization_dissipation = a.config().supg ? u.dot(a.residual(u, td, terms::Supg)) : 0.0;
    return r;
}

/// Per-step energy bookkeeping for a backward Euler step u_old -> u_new with zero data:
/// (E_new - E_old)/dt + rho/(2 dt) ||v_new - v_old||^2 + viscous + boundary + stabilization = 0.
/// Returns the left-hand side (the defect).
inline double energy_step_defect(const Assembler& a, const Field& u_old, const Field& u_new, double dt) {
    TimeDerivative td;
    td.a0 = 1.0 / dt;
    td.b = -u_old / dt;
    const EnergyReport r = dissipation_split(a, u_new, td);
    const double e_old = kinetic_energy(a.mesh(), u_old, a.config().rho);
    const double jump = kinetic_energy(a.mesh(), u_new - u_old, a.config().rho);
    return (r.kinetic - e_old) / dt + jump / dt + r.viscous + r.boundary_dissipation + r.stabilization_dissipation;
}

/// Both sides of the discrete momentum balance, per component:
///   lhs = rho int D_t v_h
///   rhs = int f - sum_K int gamma_K1 (rho/2) (E(u_h) - f) . grad v_h,i + int_dOmega q_h,i
/// with q_h = q(u_h) - eps_h, q(u) = (mu grad v - p I - rho v (x) v) n.
struct MomentumBalance {
    std::array<double, 2> lhs{};
    std::array<double, 2> rhs{};
    std::array<double, 2> force{};
    std::array<double, 2> supg{};
    std::array<double, 2> boundary_flux{};   // int q_h
    std::array<double, 2> physical_flux{};   // int q(u_h)
    double scale{};                          // magnitude of the largest contribution
};

inline MomentumBalance momentum_balance(const Assembler& a, const Field& u, const TimeDerivative& td = {}) {
    const Mesh& m = a.mesh();
    const FormConfig& cfg = a.config();
    if (cfg.mode != DiscretizationMode::Balanced || !cfg.convection)
        throw ConfigError("momentum balance requires the balanced convective form");
    const double rho = cfg.rho;
    MomentumBalance mb;
    // Volume parts.
    detail::for_cell_points(m, kCellPoints, [&](int c, const PointGeometry& g, double w) {
        const auto s = detail::point_state(m, c, g, u);
        Point dtv{};
        if (td.active())
            for (int a4 = 0; a4 < 4; ++a4) {
                const int i = m.cells[c][a4];
                const Point vi{u[3 * i], u[3 * i + 1]};
                Point bi{};
                if (td.b.size() > 0) bi = Point{td.b[3 * i], td.b[3 * i + 1]};
                dtv += g.N[a4] * (td.a0 * vi + bi);
            }
        const Point f = a.data().f ? a.data().f(g.x, a.data().t) : Point{};
        for (int k = 0; k < 2; ++k) {
            mb.lhs[k] += w * rho * dtv[k];
            mb.force[k] += w * f[k];
        }
        if (!cfg.supg) return;
        const double theta = a.theta_at(norm(s.v), m.diameter[c]);
        const double g1 = cfg.gamma1 * m.diameter[c] / theta;
        Point E{};
        for (int k = 0; k < 2; ++k) E[k] = rho * dtv[k] + rho * dot(s.v, s.gv[k]) + 0.0 - f[k];
        // grad p from the nodal pressure
        Point gp{};
        for (int a4 = 0; a4 < 4; ++a4) gp += u[3 * m.cells[c][a4] + 2] * g.dN[a4];
        E += gp;
        if (cfg.supg_laplacian) {
            for (int k = 0; k < 2; ++k) {
                double lap = 0.0;
                for (int a4 = 0; a4 < 4; ++a4) lap += g.lapN[a4] * u[3 * m.cells[c][a4] + k];
                E[k] -= cfg.mu * lap;
            }
        }
        for (int k = 0; k < 2; ++k) mb.supg[k] += w * g1 * 0.5 * rho * dot(E, s.gv[k]);
    });
    // Boundary: q_h = -(rho/2) v_n v - b, b the boundary integrand tested with (e_k, rho v_k / 2).
    const Field Rb = a.residual(u, td, terms::Boundary);
    for (int k = 0; k < 2; ++k) {
        double b = 0.0;
        for (std::size_t i = 0; i < m.num_nodes(); ++i) b += Rb[3 * i + k] + 0.5 * rho * u[3 * i + k] * Rb[3 * i + 2];
        mb.boundary_flux[k] = -b;
    }
    for (const auto& e : m.bedges)
        for (const auto& ep : map_edge(m, e.cell, e.local, kEdgePoints)) {
            const auto s = detail::point_state(m, e.cell, ep.cell, u);
            const Point n = ep.n;
            const double vn = dot(s.v, n);
            for (int k = 0; k < 2; ++k) {
                mb.boundary_flux[k] -= ep.ds * 0.5 * rho * vn * s.v[k];
                mb.physical_flux[k] += ep.ds * (cfg.mu * dot(s.gv[k], n) - s.p * n[k] - rho * s.v[k] * vn);
            }
        }
    for (int k = 0; k < 2; ++k) {
        mb.rhs[k] = mb.force[k] - mb.supg[k] + mb.boundary_flux[k];
        for (double x : {mb.lhs[k], mb.force[k], mb.supg[k], mb.boundary_flux[k], mb.physical_flux[k]})
            mb.scale = std::max(mb.scale, std::abs(x));
    }
    return mb;
}

struct DragReport {
    double force{};         // weighted-residual horizontal force on the body
    double force_direct{};  // boundary integral of -(mu dv/dn - p n)_x over the body
    double coefficient{};
    double coefficient_direct{};
};

/// Horizontal force on the boundary part flagged as curve 0 (the body), normalised as
/// C_D = 2 F / (rho U_mean^2 D).
inline DragReport drag_coefficient(const Assembler& a, const Field& u, double u_mean, double diameter,
                                   const TimeDerivative& td = {}) {
    const Mesh& m = a.mesh();
    std::vector<char> body(m.num_nodes(), 0);
    bool any = false;
    for (const auto& e : m.bedges)
        if (e.curve == 0) {
            body[e.nodes[0]] = body[e.nodes[1]] = 1;
            any = true;
        }
    if (!any) throw std::invalid_argument("drag: mesh has no body (curve 0) boundary");
    const Field R = a.residual(u, td, terms::Volume);
    DragReport d;
    for (std::size_t i = 0; i < m.num_nodes(); ++i)
        if (body[i]) d.force -= R[3 * i];
    const double mu = a.config().mu;
    for (const auto& e : m.bedges) {
        if (e.curve != 0) continue;
        for (const auto& ep : map_edge(m, e.cell, e.local, kEdgePoints)) {
            const auto s = detail::point_state(m, e.cell, ep.cell, u);
            d.force_direct -= ep.ds * (mu * dot(s.gv[0], ep.n) - s.p * ep.n.x);
        }
    }
    const double norm_factor = 2.0 / (a.config().rho * u_mean * u_mean * diameter);
    d.coefficient = norm_factor * d.force;
    d.coefficient_direct = norm_factor * d.force_direct;
    return d;
}

struct ErrorReport {
    std::size_t cells{};
    double p_l2{};
    double v_h1{};  // full gradient seminorm
    double v_l2{};
};

struct ExactFields {
    std::function<Point(const Point&)> v;
    std::function<double(const Point&)> p;
    std::function<std::array<Point, 2>(const Point&)> grad_v;
};

/// Errors against an exact solution by 4x4 Gauss over-integration.
inline ErrorReport exact_errors(const Mesh& m, const Field& u, const ExactFields& ex) {
    ErrorReport r;
    r.cells = m.num_cells();
    detail::for_cell_points(m, 4, [&](int c, const PointGeometry& g, double w) {
        const auto s = detail::point_state(m, c, g, u);
        const Point dv = s.v - ex.v(g.x);
        const double dp = s.p - ex.p(g.x);
        const auto ge = ex.grad_v(g.x);
        const Point g0 = s.gv[0] - ge[0], g1 = s.gv[1] - ge[1];
        r.p_l2 += w * dp * dp;
        r.v_l2 += w * dot(dv, dv);
        r.v_h1 += w * (dot(g0, g0) + dot(g1, g1));
    });
    r.p_l2 = std::sqrt(r.p_l2);
    r.v_l2 = std::sqrt(r.v_l2);
    r.v_h1 = std::sqrt(r.v_h1);
    return r;
}

/// Orders log2(e_i / e_{i+1}) between consecutive uniform refinements.
inline std::vector<double> convergence_orders(const std::vector<double>& errors) {
    std::vector<double> o;
    for (std::size_t i = 1; i < errors.size(); ++i) o.push_back(std::log2(errors[i - 1] / errors[i]));
    return o;
}

}  // namespace nitsche_flow
