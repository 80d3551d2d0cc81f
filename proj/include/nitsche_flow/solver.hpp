#pragma once

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nitsche_flow/forms.hpp"

namespace nitsche_flow {

struct SolverError : std::runtime_error {
    enum class Kind { Singular, LinearNotConverged, NewtonDiverged };
    Kind kind;
    std::vector<double> history;

    SolverError(Kind k, const std::string& what, std::vector<double> h = {})
        : std::runtime_error(what), kind(k), history(std::move(h)) {}
};

enum class Gauge { None, ZeroMeanPressure };
enum class TimeScheme { BackwardEuler, BDF2 };

struct SolveConfig {
    double newton_tol{1e-8};  // relative residual reduction
    int newton_max{25};
    double linear_tol{1e-10};
    Gauge gauge{Gauge::None};
    double abs_tol{1e-13};  // residual floor below which a state counts as converged
};

/// True when no boundary part anchors the pressure level.
inline bool needs_gauge(const Mesh& m) { return !m.has_tag(BCTag::Outflow) && !m.has_tag(BCTag::Characteristic); }

/// Pressure mass vector: entry a = integral of N_a (the weights of the discrete mean).
inline Field pressure_mass(const Mesh& m) {
    Field w = Field::Zero(static_cast<Eigen::Index>(m.num_nodes()));
    const CellRule rule = tensor_rule(kCellPoints);
    for (std::size_t c = 0; c < m.num_cells(); ++c)
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const auto g = map_point(m, static_cast<int>(c), rule.points[q].x, rule.points[q].y);
            for (int a = 0; a < 4; ++a) w[m.cells[c][a]] += rule.weights[q] * g.det * g.N[a];
        }
    return w;
}

/// Shifts the pressure so its integral vanishes; velocity untouched.
inline void apply_gauge(const Mesh& m, Field& u) {
    const Field w = pressure_mass(m);
    double num = 0.0;
    for (Eigen::Index a = 0; a < w.size(); ++a) num += w[a] * u[3 * a + 2];
    const double shift = num / w.sum();
    for (Eigen::Index a = 0; a < w.size(); ++a) u[3 * a + 2] -= shift;
}

/// Sparse direct solver. The symbolic analysis is reused while the sparsity pattern is unchanged.
class LinearSolver {
public:
    explicit LinearSolver(double linear_tol = 1e-10) : tol_(linear_tol) {}

    Field solve(const Eigen::SparseMatrix<double>& A, const Field& b) {
        if (A.rows() != A.cols() || A.rows() != b.size()) throw std::invalid_argument("solve: dimension mismatch");
        if (!analyzed_ || A.rows() != rows_ || A.nonZeros() != nnz_) {
            lu_.analyzePattern(A);
            analyzed_ = true;
            rows_ = A.rows();
            nnz_ = A.nonZeros();
        }
        lu_.factorize(A);
        if (lu_.info() != Eigen::Success)
            throw SolverError(SolverError::Kind::Singular,
                              "singular linear system (" + lu_.lastErrorMessage() +
                                  "); if no outflow/characteristic boundary anchors the pressure, use gauge "
                                  "zero_mean_pressure");
        const double bn = b.norm();
        if (bn == 0.0) return Field::Zero(b.size());
        Field x = lu_.solve(b);
        double rel = (A * x - b).norm() / bn;
        for (int it = 0; it < 3 && rel > tol_; ++it) {  // iterative refinement
            x += lu_.solve(b - A * x);
            rel = (A * x - b).norm() / bn;
        }
        if (!std::isfinite(rel))
            throw SolverError(SolverError::Kind::Singular, "linear solve produced non-finite values (singular system?)");
        // A direct solve cannot beat its backward error; tiny right-hand sides (late Newton steps) hit that floor.
        // Near-singular systems with a large residual are still rejected.
        const double floor = 64.0 * std::numeric_limits<double>::epsilon() * row_norm(A) * x.lpNorm<Eigen::Infinity>();
        if (rel > tol_ && (rel > 1e-6 || (A * x - b).lpNorm<Eigen::Infinity>() > floor)) {
            std::ostringstream os;
            os << "linear solve relative residual " << rel << " above tolerance " << tol_;
            throw SolverError(SolverError::Kind::LinearNotConverged, os.str());
        }
        return x;
    }

    /// Solves [A c; c^T 0] [x; l] = [b; g] and returns x (the multiplier is dropped).
    Field solve_bordered(const Eigen::SparseMatrix<double>& A, const Field& c_full, const Field& b, double g) {
        const Eigen::Index n = A.rows();
        if (bordered_pattern_nnz_ != A.nonZeros() || bordered_.rows() != n + 1) build_bordered(A, c_full);
        double* dst = bordered_.valuePtr();
        const double* src = A.valuePtr();
        for (std::size_t k = 0; k < map_.size(); ++k) dst[map_[k]] = src[k];
        for (std::size_t k = 0; k < border_pos_.size(); ++k) {
            dst[border_pos_[k].first] = c_full[border_rows_[k]];
            dst[border_pos_[k].second] = c_full[border_rows_[k]];
        }
        Field rhs(n + 1);
        rhs.head(n) = b;
        rhs[n] = g;
        return solve(bordered_, rhs).head(n);
    }

private:
    double tol_;

    static double row_norm(const Eigen::SparseMatrix<double>& A) {
        Field r = Field::Zero(A.rows());
        for (int col = 0; col < A.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it) r[it.row()] += std::abs(it.value());
        return r.maxCoeff();
    }
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_{false};
    Eigen::Index rows_{0};
    Eigen::Index nnz_{0};

    Eigen::SparseMatrix<double> bordered_;
    Eigen::Index bordered_pattern_nnz_{-1};
    std::vector<int> map_;
    std::vector<int> border_rows_;
    std::vector<std::pair<int, int>> border_pos_;  // (position of (n, r), position of (r, n))

    void build_bordered(const Eigen::SparseMatrix<double>& A, const Field& c) {
        const Eigen::Index n = A.rows();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(A.nonZeros()) + 2 * static_cast<std::size_t>(n));
        for (int col = 0; col < A.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), col, 1.0);
        border_rows_.clear();
        for (Eigen::Index r = 0; r < n; ++r)
            if (c[r] != 0.0) {
                border_rows_.push_back(static_cast<int>(r));
                trip.emplace_back(static_cast<int>(n), static_cast<int>(r), 1.0);
                trip.emplace_back(static_cast<int>(r), static_cast<int>(n), 1.0);
            }
        bordered_.resize(n + 1, n + 1);
        bordered_.setFromTriplets(trip.begin(), trip.end());
        bordered_.makeCompressed();
        auto pos = [&](int row, int col) {
            const int* outer = bordered_.outerIndexPtr();
            const int* inner = bordered_.innerIndexPtr();
            const int* it = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
            return static_cast<int>(it - inner);
        };
        map_.clear();
        for (int col = 0; col < A.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it)
                map_.push_back(pos(static_cast<int>(it.row()), col));
        border_pos_.clear();
        for (int r : border_rows_) border_pos_.emplace_back(pos(static_cast<int>(n), r), pos(r, static_cast<int>(n)));
        bordered_pattern_nnz_ = A.nonZeros();
        analyzed_ = false;
    }
};

/// One-shot sparse solve with the given relative tolerance.
inline Field solve_linear(const Eigen::SparseMatrix<double>& A, const Field& b, double linear_tol = 1e-10) {
    LinearSolver s(linear_tol);
    return s.solve(A, b);
}

struct NewtonResult {
    bool converged{false};
    int iterations{0};
    std::vector<double> history;  // residual norms, starting with the initial one
};

/// Newton iteration with frozen non-smooth coefficients (re-evaluated every iterate).
class NewtonSolver {
public:
    NewtonSolver(const Assembler& a, SolveConfig cfg) : asm_(&a), cfg_(cfg), lin_(cfg.linear_tol) {
        if (!(cfg.newton_tol > 0.0) || !(cfg.linear_tol > 0.0) || cfg.newton_max < 1)
            throw ConfigError("solver tolerances must be positive and newton_max >= 1");
        if (cfg_.gauge == Gauge::ZeroMeanPressure) {
            const Field w = pressure_mass(a.mesh());
            border_ = Field::Zero(static_cast<Eigen::Index>(a.size()));
            for (Eigen::Index i = 0; i < w.size(); ++i) border_[3 * i + 2] = w[i];
        }
    }

    [[nodiscard]] const SolveConfig& config() const { return cfg_; }

    /// Single linearize-and-update with all non-smooth coefficients frozen (Picard-like and more robust far
    /// from a solution); returns the residual norm before the update.
    double iterate(Field& u, const TimeDerivative& td) {
        Field R;
        asm_->linearize(u, td, R, J_, terms::All, false);
        const double rn = R.norm();
        if (!std::isfinite(rn)) throw SolverError(SolverError::Kind::NewtonDiverged, "non-finite residual");
        u += solve_update(u, R);
        return rn;
    }

    /// `reference` (if positive) replaces the initial residual norm in the relative criterion.
    NewtonResult solve(Field& u, const TimeDerivative& td = {}, double reference = 0.0) {
        NewtonResult res;
        Field R;
        for (int it = 0;; ++it) {
            asm_->linearize(u, td, R, J_, terms::All, true);
            const double rn = R.norm();
            res.history.push_back(rn);
            if (!std::isfinite(rn) || rn > 1e8 * std::max(res.history.front(), reference)) {
                res.iterations = it;
                throw SolverError(SolverError::Kind::NewtonDiverged, "Newton: residual blew up", res.history);
            }
            const double ref = reference > 0.0 ? reference : res.history.front();
            if (rn <= std::max(cfg_.newton_tol * ref, cfg_.abs_tol) ||
                (it > 0 && last_step_ <= 1e-14 * std::max(1.0, u.lpNorm<Eigen::Infinity>()))) {
                res.converged = true;
                res.iterations = it;
                break;
            }
            if (it == cfg_.newton_max) {
                res.iterations = it;
                std::ostringstream os;
                os << "Newton did not converge in " << cfg_.newton_max << " iterations; residual history:";
                for (double h : res.history) os << ' ' << h;
                throw SolverError(SolverError::Kind::NewtonDiverged, os.str(), res.history);
            }
            const Field du = solve_update(u, R);
            last_step_ = du.lpNorm<Eigen::Infinity>();
            u += du;
        }
        if (cfg_.gauge == Gauge::ZeroMeanPressure) apply_gauge(asm_->mesh(), u);
        return res;
    }

private:
    const Assembler* asm_;
    SolveConfig cfg_;
    LinearSolver lin_;
    Eigen::SparseMatrix<double> J_;
    Field border_;
    double last_step_{std::numeric_limits<double>::infinity()};

    // Zero-mean gauge: constant pressure is in the kernel and the pressure rows sum to zero, so one
    // pressure row is replaced by a pin and the update shifted afterwards. Same result as the bordered
    // system without its dense row.
    Field solve_update(const Field& u, const Field& R) {
        if (cfg_.gauge != Gauge::ZeroMeanPressure) return lin_.solve(J_, -R);
        constexpr Eigen::Index k = 2;
        Eigen::SparseMatrix<double> P = J_;
        for (Eigen::Index col = 0; col < P.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(P, col); it; ++it)
                if (it.row() == k) it.valueRef() = 0.0;
        P.coeffRef(k, k) = 1.0;
        Field b = -R;
        b[k] = 0.0;
        Field du = lin_.solve(P, b);
        const double shift = -border_.dot(u + du) / border_.sum();
        for (Eigen::Index i = 2; i < du.size(); i += 3) du[i] += shift;
        return du;
    }
};

/// Coefficients of the discrete time derivative for the given scheme and step count.
/// Returns (a0, c1, c2) with D_t v = a0 v^{n+1} + c1 v^n + c2 v^{n-1}.
inline std::array<double, 3> bdf_coefficients(TimeScheme s, double dt, bool startup) {
    if (s == TimeScheme::BackwardEuler || startup) return {1.0 / dt, -1.0 / dt, 0.0};
    return {1.5 / dt, -2.0 / dt, 0.5 / dt};
}

/// Implicit time integration (BE or BDF2 with a BE first step).
class TimeIntegrator {
public:
    TimeIntegrator(Assembler& a, TimeScheme scheme, double dt, SolveConfig cfg)
        : asm_(&a), scheme_(scheme), dt_(dt), newton_(a, cfg) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive and finite");
        a.config().dt = dt;
    }

    void initialize(const Field& u0, double t0) {
        current_ = u0;
        previous_.reset();
        t_ = t0;
        steps_ = 0;
    }

    /// Time derivative operator for the next step (depends on available history).
    [[nodiscard]] TimeDerivative next_derivative() const {
        const bool startup = !previous_.has_value();
        const auto c = bdf_coefficients(scheme_, dt_, startup);
        TimeDerivative td;
        td.a0 = c[0];
        td.b = c[1] * current_;
        if (c[2] != 0.0) td.b += c[2] * *previous_;
        return td;
    }

    NewtonResult step() {
        const TimeDerivative td = next_derivative();
        asm_->data().t = t_ + dt_;
        Field u = current_;
        NewtonResult r = newton_.solve(u, td);
        last_derivative_ = td;
        previous_ = current_;
        current_ = std::move(u);
        t_ += dt_;
        ++steps_;
        return r;
    }

    [[nodiscard]] double time() const { return t_; }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] int steps() const { return steps_; }
    [[nodiscard]] const Field& state() const { return current_; }
    [[nodiscard]] const Field& previous_state() const { return *previous_; }
    /// Derivative operator used by the most recent step, i.e. D_t v at the current state.
    [[nodiscard]] const TimeDerivative& last_derivative() const { return last_derivative_; }

private:
    Assembler* asm_;
    TimeScheme scheme_;
    double dt_;
    NewtonSolver newton_;
    Field current_;
    std::optional<Field> previous_;
    TimeDerivative last_derivative_;
    double t_{0.0};
    int steps_{0};
};

struct ContinuationConfig {
    double tau0{0.1};           // initial pseudo time step (s)
    double tau_max{1e8};
    int max_steps{200};
    double switch_ratio{1e-3};  // plain Newton once the steady residual dropped by this factor
};

/// Stationary solve: plain Newton first; on failure, pseudo-time continuation (mass term M/tau with
/// tau grown by residual ratio) followed by plain Newton.
inline NewtonResult solve_stationary(const Assembler& a, Field& u, const SolveConfig& cfg,
                                     const ContinuationConfig& cont = {}) {
    const Field u0 = u;
    int spent = 0;
    {
        NewtonSolver direct(a, cfg);
        try {
            NewtonResult r = direct.solve(u);
            return r;
        } catch (const SolverError& e) {
            if (e.kind == SolverError::Kind::Singular) throw;
            spent = static_cast<int>(e.history.size()) - 1;
        }
    }
    u = u0;
    NewtonSolver ptc(a, cfg);
    double tau = cont.tau0;
    const double r0 = a.residual(u).norm();
    double r_prev = r0;
    std::vector<double> hist{r0};
    for (int k = 0; k < cont.max_steps; ++k) {
        TimeDerivative td;
        td.a0 = 1.0 / tau;
        td.b = -u / tau;
        ptc.iterate(u, td);
        ++spent;
        const double rn = a.residual(u).norm();
        hist.push_back(rn);
        if (!std::isfinite(rn)) throw SolverError(SolverError::Kind::NewtonDiverged, "continuation diverged", hist);
        if (rn <= cont.switch_ratio * r0 || tau >= cont.tau_max) break;
        tau = std::min(cont.tau_max, tau * std::clamp(r_prev / rn, 0.5, 10.0));
        r_prev = rn;
    }
    NewtonSolver finish(a, cfg);
    NewtonResult r = finish.solve(u, {}, r0);
    r.iterations += spent;
    hist.insert(hist.end(), r.history.begin(), r.history.end());
    r.history = std::move(hist);
    return r;
}

}  // namespace nitsche_flow
