#pragma once

// Independent reference computations shared by the unit tests and the acceptance runner.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>

#include "nitsche_flow/forms.hpp"

namespace oracle {

using namespace nitsche_flow;

struct Draw {
    double rho, vn, theta;
    Point n;
    StateSample a, b;
};

inline Draw random_draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(1e-3, 10.0);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * std::acos(-1.0));
    const double phi = ang(rng);
    Draw d{};
    d.rho = pos(rng);
    d.vn = 10.0 * U(rng);
    d.theta = pos(rng);
    d.n = {std::cos(phi), std::sin(phi)};
    d.a = {{U(rng), U(rng)}, U(rng)};
    d.b = {{U(rng), U(rng)}, U(rng)};
    return d;
}

inline Eigen::Vector3d vec(const StateSample& s) { return {s.v.x, s.v.y, s.p}; }

inline Eigen::Matrix3d flux_jacobian(double rho, double vn, const Point& n) {
    Eigen::Matrix3d A;
    A << rho * vn, 0, n.x, 0, rho * vn, n.y, n.x, n.y, 0;
    return A;
}

// Theta^-1 f(Theta A Theta) Theta^-1 via a numerical symmetric eigensolver.
template <class F>
inline Eigen::Matrix3d weighted_function_numeric(double rho, double vn, double theta, const Point& n, F f) {
    const Eigen::Matrix3d T = Eigen::Vector3d(1, 1, theta).asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(T * flux_jacobian(rho, vn, n) * T);
    Eigen::Vector3d fl;
    for (int i = 0; i < 3; ++i) fl[i] = f(es.eigenvalues()[i]);
    const Eigen::Matrix3d Ti = T.inverse();
    return Ti * es.eigenvectors() * fl.asDiagonal() * es.eigenvectors().transpose() * Ti;
}

// Same, built from the explicit eigenpairs (rho v_n, (n_perp, 0)) and (lambda_pm, (lambda n, theta)/norm).
template <class F>
inline Eigen::Matrix3d weighted_function_explicit(double rho, double vn, double theta, const Point& n, F f) {
    const double root = std::sqrt(4 * theta * theta + rho * rho * vn * vn);
    const double lp = 0.5 * (rho * vn + root), lm = 0.5 * (rho * vn - root);
    Eigen::Matrix3d R;
    R.col(0) << -n.y, n.x, 0;
    R.col(1) << lp * n.x, lp * n.y, theta;
    R.col(1) /= std::sqrt(theta * theta + lp * lp);
    R.col(2) << lm * n.x, lm * n.y, theta;
    R.col(2) /= std::sqrt(theta * theta + lm * lm);
    const Eigen::Vector3d fl(f(rho * vn), f(lp), f(lm));
    const Eigen::Matrix3d Ti = Eigen::Vector3d(1, 1, 1.0 / theta).asDiagonal();
    return Ti * R * fl.asDiagonal() * R.transpose() * Ti;
}

inline double absf(double x) { return std::abs(x); }
inline double negf(double x) { return std::min(x, 0.0); }

inline Field random_field(std::size_t nodes, std::mt19937_64& rng, double vscale = 1.0, double pscale = 1.0) {
    std::uniform_real_distribution<double> U(-1, 1);
    Field u(static_cast<Eigen::Index>(3 * nodes));
    for (std::size_t i = 0; i < nodes; ++i) {
        u[3 * i] = vscale * U(rng);
        u[3 * i + 1] = vscale * U(rng);
        u[3 * i + 2] = pscale * U(rng);
    }
    return u;
}

// Slightly distorted rectangle so that cells are general quadrilaterals.
inline Mesh distorted_rectangle(int nx, int ny, RectangleTags tags, std::uint64_t seed = 1) {
    Mesh m = generate_rectangle(0.0, 2.0, 0.0, 1.0, nx, ny, tags);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    const double h = 1.0 / ny;
    for (auto& p : m.nodes) {
        const bool bx = std::abs(p.x) < 1e-12 || std::abs(p.x - 2.0) < 1e-12;
        const bool by = std::abs(p.y) < 1e-12 || std::abs(p.y - 1.0) < 1e-12;
        if (!bx) p.x += 0.15 * h * U(rng);
        if (!by) p.y += 0.15 * h * U(rng);
    }
    std::stringstream ss;
    write_mesh(ss, m);
    return read_mesh(ss);
}

inline BoundaryData zero_data() { return BoundaryData::zero(); }

// Boundary and volume expression of the coercivity identity, evaluated with the assembly quadrature.
inline double coercivity_expression(const Mesh& m, const FormConfig& cfg, const Field& u) {
    const CellRule rule = tensor_rule(kCellPoints);
    double total = 0.0;
    auto state = [&](const PointGeometry& g, int c) {
        struct S {
            Point v;
            double p;
            std::array<Point, 2> gv;
        } s{};
        for (int a = 0; a < 4; ++a) {
            const int i = m.cells[c][a];
            const Point va{u[3 * i], u[3 * i + 1]};
            s.v += g.N[a] * va;
            s.p += g.N[a] * u[3 * i + 2];
            s.gv[0] += va.x * g.dN[a];
            s.gv[1] += va.y * g.dN[a];
        }
        return s;
    };
    for (std::size_t c = 0; c < m.num_cells(); ++c)
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const auto g = map_point(m, static_cast<int>(c), rule.points[q].x, rule.points[q].y);
            const auto s = state(g, static_cast<int>(c));
            total += rule.weights[q] * g.det * cfg.mu * (dot(s.gv[0], s.gv[0]) + dot(s.gv[1], s.gv[1]));
        }
    for (const auto& e : m.bedges) {
        const double dK = m.diameter[e.cell];
        for (const auto& ep : map_edge(m, e.cell, e.local, kEdgePoints)) {
            const auto s = state(ep.cell, e.cell);
            const Point n = ep.n;
            const double vn = dot(s.v, n);
            const Point dnv{dot(s.gv[0], n), dot(s.gv[1], n)};
            const double dnvn = dot(dnv, n);
            const double vmag = cfg.convection ? norm(s.v) : 0.0;
            const double theta = theta_local(cfg.rho, vmag, cfg.mu, dK, cfg.dt, cfg.theta_constants);
            const double vnc = cfg.convection ? vn : 0.0;
            const BoundaryPoint bp{n, cfg.rho, theta};
            const StateSample full{s.v, s.p}, vel{s.v, 0.0};
            // Without convection the wall-type boundaries keep only the Nitsche terms.
            const double wall_flux = cfg.convection ? 0.5 * abs_theta_bilinear(bp, vnc, vel, vel) : 0.0;
            double val = 0.0;
            switch (e.tag) {
                case BCTag::Characteristic:
                    val = 0.5 * abs_theta_bilinear({n, cfg.rho, cfg.unit_char_theta() ? 1.0 : theta}, vnc, full, full);
                    break;
                case BCTag::Wall:
                case BCTag::Inflow:
                    val = wall_flux + cfg.mu * (cfg.gamma / dK * dot(s.v, s.v) - 2.0 * dot(s.v, dnv));
                    break;
                case BCTag::Symmetry:
                    val = wall_flux + cfg.mu * (cfg.gamma / dK * vn * vn - 2.0 * vn * dnvn);
                    break;
                case BCTag::Outflow: {
                    const Point t = perp(n);
                    const double vt = dot(s.v, t);
                    val = 0.5 * cfg.rho * std::abs(vnc) * vt * vt + q_quadratic(cfg.rho, vnc, theta, s.p - cfg.mu * dnvn, 1.0);
                    break;
                }
            }
            total += ep.ds * val;
        }
    }
    return total;
}

inline constexpr unsigned kForm = terms::Galerkin | terms::Viscous | terms::Boundary;

inline double assembled_form(const Assembler& a, const Field& u) { return u.dot(a.residual(u, {}, kForm)); }


}  // namespace oracle
