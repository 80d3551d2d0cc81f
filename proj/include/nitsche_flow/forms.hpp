#pragma once

// Residual and Jacobian assembly for Q1 x Q1 velocity/pressure with weak (Nitsche/characteristic)
// boundary conditions and SUPG stabilization.
//
// Unknown layout: 3 per node, (v1, v2, p) at indices 3i, 3i+1, 3i+2.
// R_i(u) = rho (D_t v, phi_i) + a(u)(psi_i) - l(u)(psi_i).
//
// Non-smooth coefficients (theta, |v_n|, v_n^+-, alpha, the spectral bundle, gamma_K) are evaluated from
// a "frozen" field, by default the current iterate; the Jacobian is the derivative with these frozen.

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nitsche_flow/boundary_operators.hpp"
#include "nitsche_flow/dual.hpp"
#include "nitsche_flow/fem.hpp"
#include "nitsche_flow/mesh.hpp"

namespace nitsche_flow {

using Field = Eigen::VectorXd;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class DiscretizationMode { Balanced, Alternative };
enum class OutflowMode { Energy, DoNothing };
enum class CharTheta { Balanced, Unit };

struct FormConfig {
    double rho{1.0};
    double mu{0.0};
    ThetaConstants theta_constants{};
    double gamma{100.0};
    double gamma1{0.25};
    double gamma2{0.1};
    double dt{std::numeric_limits<double>::infinity()};  // enters theta only
    DiscretizationMode mode{DiscretizationMode::Balanced};
    OutflowMode outflow{OutflowMode::Energy};
    CharTheta char_theta{CharTheta::Balanced};
    bool convection{true};      // false: Stokes problem (no convective or convective-boundary terms)
    bool supg{true};
    bool supg_laplacian{false};  // keep -mu Lap(v) and -mu Lap(phi) in the SUPG residual

    void validate() const {
        if (!(rho > 0.0)) throw ConfigError("rho must be positive");
        if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
        if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
        if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw ConfigError("gamma1, gamma2 must be positive");
        if (!(dt > 0.0)) throw ConfigError("dt must be positive or infinite");
        if (!(theta_constants.c_dt * theta_constants.c_dt + theta_constants.c_st * theta_constants.c_st > 0.0))
            throw ConfigError("c_dt^2 + c_St^2 must be positive");
    }

    [[nodiscard]] bool unit_char_theta() const {
        return char_theta == CharTheta::Unit || mode == DiscretizationMode::Alternative;
    }
};

using VectorFunction = std::function<Point(const Point&, double)>;
using ScalarFunction = std::function<double(const Point&, double)>;

/// Dirichlet-type data and body force. v_D is needed on inflow and characteristic edges, p_D on
/// outflow and characteristic edges.
struct BoundaryData {
    VectorFunction v_D;
    ScalarFunction p_D;
    VectorFunction f;  // empty means zero
    double t{0.0};

    static BoundaryData zero() {
        return {[](const Point&, double) { return Point{}; }, [](const Point&, double) { return 0.0; }, {}, 0.0};
    }
};

/// D_t v = a0 v + b, with b a 3N vector whose velocity slots hold the history combination.
struct TimeDerivative {
    double a0{0.0};
    Field b;

    [[nodiscard]] bool active() const { return a0 != 0.0 || b.size() > 0; }
};

namespace terms {
inline constexpr unsigned Mass = 1u;
inline constexpr unsigned Galerkin = 2u;  // interior convection and pressure/divergence coupling
inline constexpr unsigned Viscous = 4u;   // mu grad v : grad phi
inline constexpr unsigned Force = 8u;
inline constexpr unsigned Supg = 16u;
inline constexpr unsigned Boundary = 32u;  // all boundary integrals, viscous Nitsche terms included
inline constexpr unsigned Volume = Mass | Galerkin | Viscous | Force | Supg;
inline constexpr unsigned All = Volume | Boundary;
}  // namespace terms

inline int assembly_threads() {
    if (const char* env = std::getenv("NITSCHE_FLOW_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

template <class T>
struct QpState {
    Vec2<T> v{};
    T p{};
    std::array<Vec2<T>, 2> gv{};  // gradients of v1, v2
    Vec2<T> gp{};
    std::array<T, 2> lapv{};
};

template <class T>
QpState<T> interpolate(const PointGeometry& g, const std::array<T, 12>& u) {
    QpState<T> s;
    for (int a = 0; a < 4; ++a) {
        const double N = g.N[a];
        const Point& d = g.dN[a];
        for (int c = 0; c < 2; ++c) {
            const T& ua = u[3 * a + c];
            s.v[c] += N * ua;
            s.gv[c] += ua * d;
            s.lapv[c] += g.lapN[a] * ua;
        }
        s.p += N * u[3 * a + 2];
        s.gp += u[3 * a + 2] * d;
    }
    return s;
}

inline Point interpolate_velocity(const PointGeometry& g, const std::array<double, 12>& u) {
    Point v{};
    for (int a = 0; a < 4; ++a) v += g.N[a] * Point{u[3 * a], u[3 * a + 1]};
    return v;
}

}  // namespace detail

/// Node-wise strong velocity constraint used by the alternative discretization.
struct StrongConstraint {
    int node{};
    bool full{};   // constrain both components (to v_D or 0)
    Point n{};     // normal for normal-only constraints
    bool inflow{};  // target comes from v_D
};

class Assembler {
public:
    Assembler(const Mesh& mesh, FormConfig cfg, BoundaryData data)
        : mesh_(&mesh), cfg_(cfg), data_(std::move(data)) {
        cfg_.validate();
        const bool need_v = mesh.has_tag(BCTag::Inflow) || mesh.has_tag(BCTag::Characteristic);
        const bool need_p = mesh.has_tag(BCTag::Outflow) || mesh.has_tag(BCTag::Characteristic);
        if (need_v && !data_.v_D) throw ConfigError("boundary data v_D missing for inflow/characteristic edges");
        if (need_p && !data_.p_D) throw ConfigError("boundary data p_D missing for outflow/characteristic edges");
        cell_edges_.assign(mesh.num_cells(), {});
        for (std::size_t e = 0; e < mesh.bedges.size(); ++e) cell_edges_[mesh.bedges[e].cell].push_back(static_cast<int>(e));
        if (cfg_.mode == DiscretizationMode::Alternative) build_constraints();
    }

    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
    [[nodiscard]] const FormConfig& config() const { return cfg_; }
    [[nodiscard]] FormConfig& config() { return cfg_; }
    [[nodiscard]] const BoundaryData& data() const { return data_; }
    [[nodiscard]] BoundaryData& data() { return data_; }
    [[nodiscard]] std::size_t size() const { return 3 * mesh_->num_nodes(); }
    [[nodiscard]] const std::vector<StrongConstraint>& constraints() const { return constraints_; }

    /// Cell-local residual for cell c (interior plus the boundary edges it owns).
    template <class T>
    void cell_residual(int c, const std::array<T, 12>& u, const std::array<double, 12>& uf, const TimeDerivative& td,
                       unsigned mask, std::array<T, 12>& r, bool live_theta = false) const;

    /// Global residual. `frozen` (optional) supplies the field the non-smooth coefficients are taken from.
    /// Strong constraints (alternative mode) replace rows only when the full form is requested.
    Field residual(const Field& u, const TimeDerivative& td = {}, unsigned mask = terms::All,
                   const Field* frozen = nullptr) const {
        check_size(u);
        Field R = Field::Zero(static_cast<Eigen::Index>(size()));
        const int nc = static_cast<int>(mesh_->num_cells());
        std::vector<std::array<double, 12>> local(nc);
        parallel_cells([&](int c) {
            std::array<double, 12> ul = gather(u, c);
            std::array<double, 12> uf = frozen ? gather(*frozen, c) : ul;
            cell_residual<double>(c, ul, uf, td, mask, local[c]);
        });
        for (int c = 0; c < nc; ++c) scatter(R, c, local[c]);
        if (mask == terms::All) apply_constraints_residual(u, R);
        return R;
    }

    /// Residual and frozen-coefficient Jacobian together. With `live_theta` the solver variant is built instead:
    /// gamma_K is differentiated through theta(|v|) and |v_n|, v_n^+-, where they multiply the state, through their
    /// one-sided derivatives (exact for v_n != 0). The residual is unchanged.
    void linearize(const Field& u, const TimeDerivative& td, Field& R, Eigen::SparseMatrix<double>& J,
                   unsigned mask = terms::All, bool live_theta = false) const {
        check_size(u);
        ensure_pattern();
        const int nc = static_cast<int>(mesh_->num_cells());
        std::vector<std::array<double, 12>> rloc(nc);
        std::vector<std::array<double, 144>> jloc(nc);
        parallel_cells([&](int c) {
            using D = Dual<12>;
            const std::array<double, 12> uf = gather(u, c);
            std::array<D, 12> ud;
            for (int i = 0; i < 12; ++i) ud[i] = D::variable(uf[i], i);
            std::array<D, 12> rd;
            cell_residual<D>(c, ud, uf, td, mask, rd, live_theta);
            for (int i = 0; i < 12; ++i) {
                rloc[c][i] = rd[i].val;
                for (int j = 0; j < 12; ++j) jloc[c][12 * i + j] = rd[i].d[j];
            }
        });
        R = Field::Zero(static_cast<Eigen::Index>(size()));
        J = pattern_;
        double* vals = J.valuePtr();
        std::fill(vals, vals + J.nonZeros(), 0.0);
        for (int c = 0; c < nc; ++c) {
            scatter(R, c, rloc[c]);
            const auto& idx = value_index_[c];
            for (int k = 0; k < 144; ++k) vals[idx[k]] += jloc[c][k];
        }
        if (mask == terms::All) {
            apply_constraints_residual(u, R);
            apply_constraints_jacobian(J);
        }
    }

    [[nodiscard]] Eigen::SparseMatrix<double> jacobian(const Field& u, const TimeDerivative& td = {},
                                                       unsigned mask = terms::All) const {
        Field R;
        Eigen::SparseMatrix<double> J;
        linearize(u, td, R, J, mask);
        return J;
    }

    /// Sparsity pattern (all couplings of nodes sharing a cell, 3x3 blocks).
    [[nodiscard]] const Eigen::SparseMatrix<double>& pattern() const {
        ensure_pattern();
        return pattern_;
    }

    /// Local theta at a point for the given velocity magnitude and cell diameter.
    [[nodiscard]] double theta_at(double v_mag, double d_K) const {
        return theta_local(cfg_.rho, cfg_.convection ? v_mag : 0.0, cfg_.mu, d_K, cfg_.dt, cfg_.theta_constants);
    }

    [[nodiscard]] std::array<double, 12> gather(const Field& u, int c) const {
        std::array<double, 12> ul{};
        const auto& q = mesh_->cells[c];
        for (int a = 0; a < 4; ++a)
            for (int k = 0; k < 3; ++k) ul[3 * a + k] = u[3 * q[a] + k];
        return ul;
    }

    [[nodiscard]] const std::vector<int>& edges_of(int c) const { return cell_edges_[c]; }

    /// Value of the strong constraint target for the velocity of `node`.
    [[nodiscard]] Point constraint_target(const StrongConstraint& sc) const {
        if (!sc.inflow) return {};
        return data_.v_D(mesh_->nodes[sc.node], data_.t);
    }

private:
    const Mesh* mesh_;
    FormConfig cfg_;
    BoundaryData data_;
    std::vector<std::vector<int>> cell_edges_;
    std::vector<StrongConstraint> constraints_;
    mutable Eigen::SparseMatrix<double> pattern_;
    mutable std::vector<std::array<int, 144>> value_index_;

    void check_size(const Field& u) const {
        if (static_cast<std::size_t>(u.size()) != size())
            throw AssemblyError("field size " + std::to_string(u.size()) + " does not match 3 x nodes = " +
                                std::to_string(size()));
    }

    void scatter(Field& R, int c, const std::array<double, 12>& r) const {
        const auto& q = mesh_->cells[c];
        for (int a = 0; a < 4; ++a)
            for (int k = 0; k < 3; ++k) R[3 * q[a] + k] += r[3 * a + k];
    }

    template <class F>
    void parallel_cells(F&& body) const {
        const int nc = static_cast<int>(mesh_->num_cells());
        const int nt = std::min(assembly_threads(), std::max(1, nc / 256));
        if (nt <= 1) {
            for (int c = 0; c < nc; ++c) body(c);
            return;
        }
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(nt);
        for (int t = 0; t < nt; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int c = t; c < nc; c += nt) body(c);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    void ensure_pattern() const {
        if (pattern_.nonZeros() > 0) return;
        const auto n = static_cast<Eigen::Index>(size());
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(mesh_->num_cells() * 144);
        for (const auto& q : mesh_->cells)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j) trip.emplace_back(3 * q[a] + i, 3 * q[b] + j, 0.0);
        pattern_.resize(n, n);
        pattern_.setFromTriplets(trip.begin(), trip.end());
        pattern_.makeCompressed();
        value_index_.resize(mesh_->num_cells());
        for (std::size_t c = 0; c < mesh_->num_cells(); ++c) {
            const auto& q = mesh_->cells[c];
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 3; ++i)
                    for (int b = 0; b < 4; ++b)
                        for (int j = 0; j < 3; ++j)
                            value_index_[c][12 * (3 * a + i) + 3 * b + j] = value_position(3 * q[a] + i, 3 * q[b] + j);
        }
    }

    [[nodiscard]] int value_position(int row, int col) const {
        // Column-major storage: search the row index inside column `col`.
        const int* outer = pattern_.outerIndexPtr();
        const int* inner = pattern_.innerIndexPtr();
        const int* lo = inner + outer[col];
        const int* hi = inner + outer[col + 1];
        const int* it = std::lower_bound(lo, hi, row);
        if (it == hi || *it != row) throw AssemblyError("sparsity pattern lookup failed");
        return static_cast<int>(it - inner);
    }

    void build_constraints();
    void apply_constraints_residual(const Field& u, Field& R) const;
    void apply_constraints_jacobian(Eigen::SparseMatrix<double>& J) const;
};

template <class T>
void Assembler::cell_residual(int c, const std::array<T, 12>& u, const std::array<double, 12>& uf,
                              const TimeDerivative& td, unsigned mask, std::array<T, 12>& r, bool live_theta) const {
    const Mesh& m = *mesh_;
    const double rho = cfg_.rho;
    const double mu = cfg_.mu;
    const bool conv = cfg_.convection;
    const bool alt = cfg_.mode == DiscretizationMode::Alternative;
    const double dK = m.diameter[c];
    const auto& q = m.cells[c];
    r.fill(T(0.0));

    std::array<double, 8> bloc{};
    if (td.b.size() > 0)
        for (int a = 0; a < 4; ++a) {
            bloc[2 * a] = td.b[3 * q[a]];
            bloc[2 * a + 1] = td.b[3 * q[a] + 1];
        }

    if (mask & terms::Volume) {
        static const CellRule rule = tensor_rule(kCellPoints);
        for (std::size_t iq = 0; iq < rule.points.size(); ++iq) {
            const PointGeometry g = map_point(m, c, rule.points[iq].x, rule.points[iq].y);
            const double w = rule.weights[iq] * g.det;
            const auto s = detail::interpolate(g, u);
            const Point vf = detail::interpolate_velocity(g, uf);
            Point bq{};
            for (int a = 0; a < 4; ++a) bq += g.N[a] * Point{bloc[2 * a], bloc[2 * a + 1]};
            Vec2<T> dtv{td.a0 * s.v.x + bq.x, td.a0 * s.v.y + bq.y};
            const Point f = data_.f ? data_.f(g.x, data_.t) : Point{};
            std::array<T, 2> vgrad{dot(s.v, s.gv[0]), dot(s.v, s.gv[1])};  // (v . grad) v
            const T div = s.gv[0].x + s.gv[1].y;

            for (int a = 0; a < 4; ++a) {
                const double N = g.N[a];
                const Point& dN = g.dN[a];
                const T vdN = dot(s.v, dN);
                for (int k = 0; k < 2; ++k) {
                    T acc(0.0);
                    if (mask & terms::Mass) acc += rho * dtv[k] * N;
                    if (mask & terms::Galerkin) {
                        if (conv) {
                            if (alt)
                                acc -= rho * s.v[k] * vdN;
                            else
                                acc += 0.5 * rho * (vgrad[k] * N - s.v[k] * vdN);
                        }
                        acc -= s.p * dN[k];
                    }
                    if ((mask & terms::Viscous) && mu > 0.0) acc += mu * dot(s.gv[k], dN);
                    if (mask & terms::Force) acc -= f[k] * N;
                    r[3 * a + k] += w * acc;
                }
                if (mask & terms::Galerkin) r[3 * a + 2] += w * N * div;
            }

            if ((mask & terms::Supg) && cfg_.supg) {
                const double theta = theta_at(norm(vf), dK);
                T g1(cfg_.gamma1 * dK / theta);
                T g2(cfg_.gamma2 * dK * theta);
                if (live_theta && conv) {
                    using std::sqrt;
                    const T th = sqrt(theta * theta + rho * rho * (dot(s.v, s.v) - dot(vf, vf)));
                    g1 = cfg_.gamma1 * dK / th;
                    g2 = cfg_.gamma2 * dK * th;
                }
                Vec2<T> E;
                for (int k = 0; k < 2; ++k) {
                    E[k] = rho * dtv[k] + s.gp[k] - f[k];
                    if (conv) E[k] += rho * vgrad[k];
                    if (cfg_.supg_laplacian) E[k] -= mu * s.lapv[k];
                }
                for (int a = 0; a < 4; ++a) {
                    const Point& dN = g.dN[a];
                    T sa(0.0);
                    if (conv) sa += rho * dot(s.v, dN);
                    if (cfg_.supg_laplacian) sa -= mu * g.lapN[a];
                    for (int k = 0; k < 2; ++k) r[3 * a + k] += w * (g1 * E[k] * sa + g2 * div * dN[k]);
                    r[3 * a + 2] += w * g1 * dot(E, dN);
                }
            }
        }
    }

    if (!(mask & terms::Boundary)) return;
    for (int eid : cell_edges_[c]) {
        const BoundaryEdge& e = m.bedges[eid];
        const auto pts = map_edge(m, c, e.local, kEdgePoints);
        for (const auto& ep : pts) {
            const PointGeometry& g = ep.cell;
            const Point& n = ep.n;
            const double ds = ep.ds;
            const auto s = detail::interpolate(g, u);
            const Point vf = detail::interpolate_velocity(g, uf);
            const double vnf = conv ? dot(vf, n) : 0.0;
            const double theta = theta_at(norm(vf), dK);
            const T vn = dot(s.v, n);
            // |v_n| and v_n^-+ as multipliers: frozen values, or carrying the one-sided derivative.
            const T abs_vn = live_theta ? (vnf >= 0.0 ? vn : -vn) : T(std::abs(vnf));
            const T vn_minus = live_theta ? (vnf < 0.0 ? vn : T(0.0)) : T(std::min(vnf, 0.0));
            const T vn_plus = live_theta ? (vnf > 0.0 ? vn : T(0.0)) : T(std::max(vnf, 0.0));
            std::array<T, 2> dnv{dot(s.gv[0], n), dot(s.gv[1], n)};
            const T dnvn = dnv[0] * n.x + dnv[1] * n.y;

            switch (e.tag) {
                case BCTag::Characteristic: {
                    const double th = cfg_.unit_char_theta() ? 1.0 : theta;
                    const SpectralBundle sb = spectral_bundle(rho, vnf, th);
                    const Point vD = data_.v_D(g.x, data_.t);
                    const double pD = data_.p_D(g.x, data_.t);
                    const Sample<T> diff{{s.v.x - vD.x, s.v.y - vD.y}, s.p - pD};
                    const double cfac = alt ? 1.0 : 0.5;
                    for (int a = 0; a < 4; ++a) {
                        const double N = g.N[a];
                        if (N == 0.0) continue;
                        for (int k = 0; k < 2; ++k) {
                            Sample<double> test{};
                            test.v[k] = N;
                            T acc = s.p * N * n[k] - neg_theta_form(sb, n, diff, test);
                            if (conv) acc += cfac * rho * vn * s.v[k] * N;
                            r[3 * a + k] += ds * acc;
                        }
                        Sample<double> test{};
                        test.p = N;
                        r[3 * a + 2] -= ds * neg_theta_form(sb, n, diff, test);
                    }
                    break;
                }
                case BCTag::Wall:
                case BCTag::Symmetry:
                case BCTag::Inflow: {
                    const SpectralBundle sb = spectral_bundle(rho, vnf, theta);
                    const bool inflow = e.tag == BCTag::Inflow;
                    const Point vD = inflow ? data_.v_D(g.x, data_.t) : Point{};
                    const double vDn = dot(vD, n);
                    for (int a = 0; a < 4; ++a) {
                        const double N = g.N[a];
                        const double dNn = dot(g.dN[a], n);
                        for (int k = 0; k < 2; ++k) {
                            T acc = s.p * N * n[k];
                            if (conv && !alt) {
                                acc += 0.5 * rho * abs_vn * s.v[k] * N + sb.alpha * vn * N * n[k];
                                if (inflow) acc += rho * vn_minus * vD[k] * N - sb.alpha * vDn * N * n[k];
                            }
                            if (mu > 0.0) {
                                if (e.tag == BCTag::Symmetry)
                                    acc -= mu * (dnvn * N * n[k] + vn * dNn * n[k] - cfg_.gamma / dK * vn * N * n[k]);
                                else
                                    acc -= mu * (dnv[k] * N + (s.v[k] - vD[k]) * (dNn - cfg_.gamma / dK * N));
                            }
                            r[3 * a + k] += ds * acc;
                        }
                        T accp = -N * vn;
                        if (inflow) accp += N * vDn;
                        r[3 * a + 2] += ds * accp;
                    }
                    break;
                }
                case BCTag::Outflow: {
                    const double pD = data_.p_D(g.x, data_.t);
                    if (cfg_.outflow == OutflowMode::DoNothing) {
                        for (int a = 0; a < 4; ++a) {
                            const double N = g.N[a];
                            for (int k = 0; k < 2; ++k) {
                                T acc = pD * N * n[k];
                                if (conv && !alt) acc += 0.5 * rho * vn * s.v[k] * N;
                                r[3 * a + k] += ds * acc;
                            }
                        }
                        break;
                    }
                    if (alt) {
                        for (int a = 0; a < 4; ++a) {
                            const double N = g.N[a];
                            for (int k = 0; k < 2; ++k) {
                                T acc = pD * N * n[k];
                                if (conv) acc += rho * vn_plus * s.v[k] * N;
                                r[3 * a + k] += ds * acc;
                            }
                        }
                        break;
                    }
                    T P = s.p - pD;
                    if (conv) P += rho * vn_minus * vn;
                    if (mu > 0.0) P -= mu * dnvn;
                    const double inv_theta = 1.0 / theta;
                    for (int a = 0; a < 4; ++a) {
                        const double N = g.N[a];
                        const double dNn = dot(g.dN[a], n);
                        for (int k = 0; k < 2; ++k) {
                            T acc = pD * N * n[k];
                            if (conv) acc += 0.5 * rho * abs_vn * s.v[k] * N;
                            if (mu > 0.0) acc -= inv_theta * mu * dNn * n[k] * P;
                            r[3 * a + k] += ds * acc;
                        }
                        r[3 * a + 2] += ds * inv_theta * N * P;
                    }
                    break;
                }
            }
        }
    }
}

inline void Assembler::build_constraints() {
    const Mesh& m = *mesh_;
    struct Acc {
        std::vector<Point> normals;
        bool inflow{};
    };
    std::vector<Acc> acc(m.num_nodes());
    for (const auto& e : m.bedges) {
        if (e.tag == BCTag::Outflow || e.tag == BCTag::Characteristic) continue;
        const Point n = m.outward_normal(e);
        for (int v : e.nodes) {
            acc[v].normals.push_back(n);
            if (e.tag == BCTag::Inflow) acc[v].inflow = true;
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const auto& a = acc[i];
        if (a.normals.empty()) continue;
        StrongConstraint sc;
        sc.node = static_cast<int>(i);
        sc.inflow = a.inflow;
        Point avg{};
        bool corner = false;
        for (const auto& n : a.normals) {
            avg += n;
            for (const auto& n2 : a.normals)
                if (dot(n, n2) < 0.5) corner = true;
        }
        sc.full = a.inflow || corner;
        const double l = norm(avg);
        sc.n = l > 0.0 ? (1.0 / l) * avg : Point{1.0, 0.0};
        constraints_.push_back(sc);
    }
}

inline void Assembler::apply_constraints_residual(const Field& u, Field& R) const {
    for (const auto& sc : constraints_) {
        const int i = 3 * sc.node;
        const Point target = constraint_target(sc);
        if (sc.full) {
            R[i] = u[i] - target.x;
            R[i + 1] = u[i + 1] - target.y;
        } else {
            const Point t = perp(sc.n);
            const double rt = t.x * R[i] + t.y * R[i + 1];
            R[i] = sc.n.x * (u[i] - target.x) + sc.n.y * (u[i + 1] - target.y);
            R[i + 1] = rt;
        }
    }
}

inline void Assembler::apply_constraints_jacobian(Eigen::SparseMatrix<double>& J) const {
    if (constraints_.empty()) return;
    // Row operations on a column-major matrix: collect the entries of the affected rows first.
    std::vector<int> slot(size(), -1);
    for (std::size_t k = 0; k < constraints_.size(); ++k) slot[3 * constraints_[k].node] = static_cast<int>(k);
    struct RowPair {
        std::vector<std::pair<int, double*>> r0, r1;
    };
    std::vector<RowPair> rows(constraints_.size());
    for (int col = 0; col < J.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(J, col); it; ++it) {
            const int row = static_cast<int>(it.row());
            const int base = row - row % 3;
            const int k = slot[base];
            if (k < 0 || row % 3 == 2) continue;
            (row % 3 == 0 ? rows[k].r0 : rows[k].r1).emplace_back(col, &it.valueRef());
        }
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
        const auto& sc = constraints_[k];
        const int i = 3 * sc.node;
        auto& rp = rows[k];
        if (sc.full) {
            for (auto& [col, v] : rp.r0) *v = col == i ? 1.0 : 0.0;
            for (auto& [col, v] : rp.r1) *v = col == i + 1 ? 1.0 : 0.0;
        } else {
            const Point t = perp(sc.n);
            // Both rows share the same column set (node block pattern), in the same order.
            for (std::size_t j = 0; j < rp.r0.size(); ++j) {
                const int col = rp.r0[j].first;
                double* a = rp.r0[j].second;
                double* b = rp.r1[j].second;
                const double tangential = t.x * *a + t.y * *b;
                *a = col == i ? sc.n.x : (col == i + 1 ? sc.n.y : 0.0);
                *b = tangential;
            }
        }
    }
}

/// Nodal interpolant of velocity/pressure functions.
inline Field interpolate_field(const Mesh& m, const std::function<Point(const Point&)>& v,
                               const std::function<double(const Point&)>& p) {
    Field u(static_cast<Eigen::Index>(3 * m.num_nodes()));
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        const Point vi = v ? v(m.nodes[i]) : Point{};
        u[3 * i] = vi.x;
        u[3 * i + 1] = vi.y;
        u[3 * i + 2] = p ? p(m.nodes[i]) : 0.0;
    }
    return u;
}

}  // namespace nitsche_flow
