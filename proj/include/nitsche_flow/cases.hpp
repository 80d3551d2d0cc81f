#pragma once

// Benchmark cases, configuration handling and output writers for the command-line driver.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <iomanip>
#include <locale>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nitsche_flow/diagnostics.hpp"
#include "nitsche_flow/exact.hpp"
#include "nitsche_flow/solver.hpp"

namespace nitsche_flow::bench {

namespace fs = std::filesystem;

/// Invalid or incomplete configuration (maps to exit code 2).
struct CaseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& case_names() {
    static const std::vector<std::string> names{"kovasznay", "standing_vortex", "bfs", "cylinder", "fraenkel", "jet"};
    return names;
}

// ---------------------------------------------------------------------------------------------
// Configuration: flat "section.key" -> value map with per-case defaults.

class Config {
public:
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }
    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

    [[nodiscard]] std::string str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw CaseError("missing parameter '" + key + "'");
        return it->second;
    }

    [[nodiscard]] double num(const std::string& key) const {
        const std::string s = str(key);
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        double v{};
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) throw CaseError("parameter '" + key + "': not a number: " + s);
        return v;
    }

    [[nodiscard]] int integer(const std::string& key) const {
        const std::string s = str(key);
        int v{};
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) throw CaseError("parameter '" + key + "': not an integer: " + s);
        return v;
    }

    [[nodiscard]] bool flag(const std::string& key) const {
        const std::string s = str(key);
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw CaseError("parameter '" + key + "': not a boolean: " + s);
    }

    [[nodiscard]] std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::string s = str(key);
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream is(s);
        is.imbue(std::locale::classic());
        double v;
        while (is >> v) out.push_back(v);
        if (!is.eof()) throw CaseError("parameter '" + key + "': not a number list: " + str(key));
        return out;
    }

    /// INI text with [section] headers; the case name is the top-level key `case`.
    [[nodiscard]] std::string to_ini() const {
        std::ostringstream os;
        if (has("case")) os << "case = " << str("case") << "\n";
        std::string section;
        for (const auto& [k, v] : values_) {
            const auto dot = k.find('.');
            if (dot == std::string::npos) continue;
            const std::string sec = k.substr(0, dot);
            if (sec != section) {
                os << "\n[" << sec << "]\n";
                section = sec;
            }
            os << k.substr(dot + 1) << " = " << v << "\n";
        }
        return os.str();
    }

private:
    std::map<std::string, std::string> values_;
};

/// Parses `key = value` lines in [physics] [geometry] [numerics] [output] sections.
inline Config parse_config(std::istream& is) {
    Config c;
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(is);
    } catch (const CLI::Error& e) {
        throw CaseError(std::string("config file: ") + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
        std::string key = item.name;
        for (auto it = item.parents.rbegin(); it != item.parents.rend(); ++it) key = *it + "." + key;
        c.set(key, value);
    }
    return c;
}

inline Config parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CaseError("cannot open config file " + path);
    return parse_config(is);
}

/// Defaults for a case; every key a run reads appears here (and so in the manifest).
inline Config case_defaults(const std::string& name) {
    if (std::find(case_names().begin(), case_names().end(), name) == case_names().end()) {
        std::string known;
        for (const auto& n : case_names()) known += " " + n;
        throw CaseError("unknown case '" + name + "' (known:" + known + ")");
    }
    Config c;
    c.set("case", name);
    c.set("physics.rho", "1");
    c.set("numerics.mode", "balanced");
    c.set("numerics.outflow", "energy");
    c.set("numerics.char_theta", "balanced");
    c.set("numerics.supg", "true");
    c.set("numerics.supg_laplacian", "false");
    c.set("numerics.gamma", "100");
    c.set("numerics.gamma1", "0.25");
    c.set("numerics.gamma2", "0.1");
    c.set("numerics.c_dt", "0.1");
    c.set("numerics.c_st", "4");
    c.set("numerics.newton_tol", "1e-8");
    c.set("numerics.newton_max", "25");
    c.set("numerics.linear_tol", "1e-10");
    c.set("numerics.gauge", "auto");
    c.set("output.vtk", "true");
    c.set("output.vtk_times", "");
    auto unsteady = [&](const char* scheme, const char* dt, const char* t_end) {
        c.set("numerics.scheme", scheme);
        c.set("numerics.dt", dt);
        c.set("numerics.t_end", t_end);
    };
    if (name == "kovasznay") {
        c.set("physics.mu", "0.025");
        c.set("geometry.level_min", "0");
        c.set("geometry.level_max", "4");
        c.set("numerics.scheme", "stationary");
    } else if (name == "standing_vortex") {
        c.set("physics.mu", "0");
        c.set("geometry.level", "1");
        unsteady("bdf2", "0.025", "5");
    } else if (name == "bfs") {
        c.set("physics.mu", "0.000125");  // Re = 8000 on mean inlet speed 1 and channel height 1
        c.set("physics.mu_initial", "0.00125");  // Re = 800 stationary start
        c.set("geometry.step_height", "0.5");
        c.set("geometry.inlet_height", "0.5");
        c.set("geometry.upstream_length", "1");
        c.set("geometry.downstream_length", "10");
        c.set("geometry.resolution", "4");
        unsteady("be", "0.05", "20");
    } else if (name == "cylinder") {
        c.set("physics.mu", "0.0005");
        c.set("geometry.length", "2.2");
        c.set("geometry.level_min", "1");
        c.set("geometry.level_max", "4");
        c.set("geometry.mean_velocity", "0.2");
        c.set("numerics.scheme", "stationary");
    } else if (name == "fraenkel") {
        c.set("physics.mu", "0");
        c.set("geometry.resolution", "2");
        c.set("geometry.reflected", "false");
        unsteady("bdf2", "0.01", "2");
    } else if (name == "jet") {
        c.set("physics.mu", "0");
        c.set("geometry.scale", "1");
        c.set("geometry.level", "2");
        c.set("geometry.variant", "inout");
        unsteady("bdf2", "0.01", "3");
    }
    return c;
}

/// Defaults, then file values, then overrides; keys unknown to the case are rejected.
inline Config resolve_config(const std::string& name, const Config& file, const Config& overrides) {
    Config c = case_defaults(name);
    for (const Config* src : {&file, &overrides})
        for (const auto& [k, v] : src->values()) {
            if (k == "case") {
                if (v != name) throw CaseError("config names case '" + v + "' but '" + name + "' was requested");
                continue;
            }
            if (!c.has(k)) throw CaseError("unknown parameter '" + k + "' for case " + name);
            c.set(k, v);
        }
    return c;
}

/// "section.key=value" as given to --set.
inline std::pair<std::string, std::string> parse_assignment(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw CaseError("expected key=value, got '" + s + "'");
    auto trim = [](std::string t) {
        const auto b = t.find_first_not_of(" \t");
        const auto e = t.find_last_not_of(" \t");
        return b == std::string::npos ? std::string{} : t.substr(b, e - b + 1);
    };
    return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

inline FormConfig form_config(const Config& c) {
    FormConfig f;
    f.rho = c.num("physics.rho");
    f.mu = c.num("physics.mu");
    f.gamma = c.num("numerics.gamma");
    f.gamma1 = c.num("numerics.gamma1");
    f.gamma2 = c.num("numerics.gamma2");
    f.theta_constants.c_dt = c.num("numerics.c_dt");
    f.theta_constants.c_st = c.num("numerics.c_st");
    f.supg = c.flag("numerics.supg");
    f.supg_laplacian = c.flag("numerics.supg_laplacian");
    const std::string mode = c.str("numerics.mode");
    if (mode == "balanced") f.mode = DiscretizationMode::Balanced;
    else if (mode == "alternative") f.mode = DiscretizationMode::Alternative;
    else throw CaseError("numerics.mode must be balanced or alternative");
    const std::string out = c.str("numerics.outflow");
    if (out == "energy") f.outflow = OutflowMode::Energy;
    else if (out == "do_nothing") f.outflow = OutflowMode::DoNothing;
    else throw CaseError("numerics.outflow must be energy or do_nothing");
    const std::string ct = c.str("numerics.char_theta");
    if (ct == "balanced") f.char_theta = CharTheta::Balanced;
    else if (ct == "unit") f.char_theta = CharTheta::Unit;
    else throw CaseError("numerics.char_theta must be balanced or unit");
    try {
        f.validate();
    } catch (const ConfigError& e) {
        throw CaseError(e.what());
    }
    return f;
}

inline SolveConfig solve_config(const Config& c, const Mesh& m) {
    SolveConfig s;
    s.newton_tol = c.num("numerics.newton_tol");
    s.newton_max = c.integer("numerics.newton_max");
    s.linear_tol = c.num("numerics.linear_tol");
    if (!(s.newton_tol > 0) || !(s.linear_tol > 0) || s.newton_max < 1) throw CaseError("solver tolerances must be positive");
    const std::string g = c.str("numerics.gauge");
    if (g == "auto") s.gauge = needs_gauge(m) ? Gauge::ZeroMeanPressure : Gauge::None;
    else if (g == "none") s.gauge = Gauge::None;
    else if (g == "zero_mean_pressure") s.gauge = Gauge::ZeroMeanPressure;
    else throw CaseError("numerics.gauge must be auto, none or zero_mean_pressure");
    return s;
}

inline TimeScheme time_scheme(const Config& c) {
    const std::string s = c.str("numerics.scheme");
    if (s == "be") return TimeScheme::BackwardEuler;
    if (s == "bdf2") return TimeScheme::BDF2;
    throw CaseError("numerics.scheme must be be or bdf2 for this case");
}

// ---------------------------------------------------------------------------------------------
// Writers.

inline std::string format_number(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(12) << v;
    return os.str();
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, std::vector<std::string> header) : columns_(header.size()) {
        os_.open(path);
        if (!os_) throw std::runtime_error("cannot write " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << "\n";
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_) throw std::logic_error("csv row does not match the header");
        for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_number(values[i]);
        os_ << "\n";
        os_.flush();
    }

private:
    std::ofstream os_;
    std::size_t columns_;
};

/// Legacy ASCII VTK: UNSTRUCTURED_GRID of quads with point data `velocity` and `pressure`.
inline void write_vtk(std::ostream& os, const Mesh& m, const Field& u) {
    os.imbue(std::locale::classic());
    os << std::setprecision(15);
    os << "# vtk DataFile Version 3.0\nnitsche-flow\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << m.num_nodes() << " double\n";
    for (const auto& p : m.nodes) os << p.x << ' ' << p.y << " 0\n";
    os << "CELLS " << m.num_cells() << ' ' << 5 * m.num_cells() << "\n";
    for (const auto& c : m.cells) os << "4 " << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << "\n";
    os << "CELL_TYPES " << m.num_cells() << "\n";
    for (std::size_t i = 0; i < m.num_cells(); ++i) os << "9\n";
    os << "POINT_DATA " << m.num_nodes() << "\nVECTORS velocity double\n";
    for (std::size_t i = 0; i < m.num_nodes(); ++i) os << u[3 * i] << ' ' << u[3 * i + 1] << " 0\n";
    os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < m.num_nodes(); ++i) os << u[3 * i + 2] << "\n";
}

inline void write_vtk(const fs::path& path, const Mesh& m, const Field& u) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_vtk(os, m, u);
}

// ---------------------------------------------------------------------------------------------
// Runs.

struct RunResult {
    std::map<std::string, double> summary;
    Field state;
    Mesh mesh;
};

namespace detail {

inline void write_summary(const fs::path& dir, const std::map<std::string, double>& s) {
    std::ofstream os(dir / "summary.csv");
    if (!os) throw std::runtime_error("cannot write summary.csv");
    os << "key,value\n";
    for (const auto& [k, v] : s) os << k << ',' << format_number(v) << "\n";
}

inline Point vortex_velocity(const Point& x) {
    const double r = norm(x);
    double vt = 0.0;
    if (r < 0.4) vt = 2.5 * r;
    else if (r <= 0.8) vt = 2.0 - 2.5 * r;
    if (r == 0.0) return {};
    return {-vt * x.y / r, vt * x.x / r};
}

/// Index of the node at the mirror image of each node (-1 if none): x1 -> -x1 (axis 0) or x2 -> -x2 (axis 1).
inline std::vector<int> mirror_nodes(const Mesh& m, int axis) {
    std::map<std::pair<long long, long long>, int> lookup;
    auto key = [](const Point& p) {
        return std::make_pair(std::llround(p.x * 1e8), std::llround(p.y * 1e8));
    };
    for (std::size_t i = 0; i < m.num_nodes(); ++i) lookup[key(m.nodes[i])] = static_cast<int>(i);
    std::vector<int> out(m.num_nodes(), -1);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        Point q = m.nodes[i];
        (axis == 0 ? q.x : q.y) *= -1.0;
        auto it = lookup.find(key(q));
        if (it != lookup.end()) out[i] = it->second;
    }
    return out;
}

/// Relative nodal symmetry defect over nodes with a mirror partner. Both symmetries of the flow keep v1
/// even and v2 odd: (v1, v2)(x) = (v1, -v2)(R x). For the x1 reflection this is the mirror image
/// combined with flow reversal, since the far field does not change sign.
inline double symmetry_defect(const Field& u, const std::vector<int>& mirror) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < mirror.size(); ++i) {
        if (mirror[i] < 0) continue;
        const int j = mirror[i];
        const double d0 = u[3 * i] - u[3 * j];
        const double d1 = u[3 * i + 1] + u[3 * j + 1];
        num += d0 * d0 + d1 * d1;
        den += u[3 * i] * u[3 * i] + u[3 * i + 1] * u[3 * i + 1];
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

inline double ramp(double t) { return t < 1.0 ? (3.0 - 2.0 * t) * t * t : 1.0; }

/// Shared unsteady driver: time loop, energy series, VTK snapshots.
struct Unsteady {
    const Config& cfg;
    const fs::path& out;
    Assembler& a;
    Field u0;
    // extra columns of run.csv and their evaluation
    std::vector<std::string> extra_names;
    std::function<std::vector<double>(const Field&)> extra;
    // return false to stop early (blow-up)
    bool tolerate_failure{false};

    std::map<std::string, double> run() {
        const double dt = cfg.num("numerics.dt");
        const double t_end = cfg.num("numerics.t_end");
        if (!(dt > 0) || !(t_end > 0)) throw CaseError("numerics.dt and numerics.t_end must be positive");
        const Mesh& m = a.mesh();
        TimeIntegrator ti(a, time_scheme(cfg), dt, solve_config(cfg, m));
        ti.initialize(u0, 0.0);
        std::vector<std::string> header{"step", "t", "kinetic", "boundary_dissipation", "stabilization_dissipation",
                                        "newton_iterations"};
        header.insert(header.end(), extra_names.begin(), extra_names.end());
        CsvWriter csv(out / "run.csv", header);
        const double e0 = kinetic_energy(m, u0, a.config().rho);
        auto row = [&](int step, const NewtonResult* r) {
            std::vector<double> v{static_cast<double>(step), ti.time(), kinetic_energy(m, ti.state(), a.config().rho)};
            if (step > 0 && a.config().mode == DiscretizationMode::Balanced) {
                const EnergyReport er = dissipation_split(a, ti.state(), ti.last_derivative());
                v.push_back(er.boundary_dissipation);
                v.push_back(er.stabilization_dissipation);
            } else {
                v.push_back(0.0);
                v.push_back(0.0);
            }
            v.push_back(r ? r->iterations : 0);
            if (extra) {
                const auto x = extra(ti.state());
                v.insert(v.end(), x.begin(), x.end());
            }
            csv.row(v);
            return v;
        };
        std::vector<double> snapshots = cfg.str("output.vtk_times").empty() ? std::vector<double>{} : cfg.list("output.vtk_times");
        std::sort(snapshots.begin(), snapshots.end());
        std::size_t next_snapshot = 0;
        const bool vtk = cfg.flag("output.vtk");
        auto snapshot = [&](int step) {
            if (!vtk) return;
            std::ostringstream name;
            name << "field_" << std::setw(6) << std::setfill('0') << step << ".vtk";
            write_vtk(out / name.str(), m, ti.state());
        };
        std::vector<double> last = row(0, nullptr);
        if (next_snapshot < snapshots.size() && snapshots[next_snapshot] <= 0.0) {
            snapshot(0);
            ++next_snapshot;
        }
        const int n = static_cast<int>(std::lround(t_end / dt));
        std::map<std::string, double> s;
        double max_growth = 0.0;
        s["blowup"] = 0.0;
        int step = 0;
        for (step = 1; step <= n; ++step) {
            NewtonResult r;
            try {
                r = ti.step();
            } catch (const SolverError& e) {
                if (!tolerate_failure) throw;
                s["blowup"] = 1.0;
                s["blowup_time"] = ti.time() + dt;
                break;
            }
            const double e_prev = last[2];
            last = row(step, &r);
            if (e_prev > 0.0) max_growth = std::max(max_growth, last[2] / e_prev - 1.0);
            if (!std::isfinite(last[2]) || (tolerate_failure && last[2] > 1e3 * std::max(e0, 1e-300))) {
                s["blowup"] = 1.0;
                s["blowup_time"] = ti.time();
                break;
            }
            while (next_snapshot < snapshots.size() && ti.time() >= snapshots[next_snapshot] - 0.5 * dt) {
                snapshot(step);
                ++next_snapshot;
            }
        }
        if (vtk && s["blowup"] == 0.0) snapshot(n);
        s["steps"] = std::min(step, n);
        s["t_final"] = ti.time();
        s["kinetic_initial"] = e0;
        s["kinetic_final"] = last[2];
        s["kinetic_loss"] = e0 > 0 ? 1.0 - last[2] / e0 : 0.0;
        s["max_step_growth"] = max_growth;
        s["boundary_dissipation_final"] = last[3];
        s["stabilization_dissipation_final"] = last[4];
        state = ti.state();
        return s;
    }

    Field state;
};

}  // namespace detail

inline RunResult run_kovasznay(const Config& cfg, const fs::path& out) {
    const double mu = cfg.num("physics.mu");
    if (!(mu > 0)) throw CaseError("kovasznay needs physics.mu > 0");
    if (cfg.num("physics.rho") != 1.0) throw CaseError("kovasznay's exact solution assumes physics.rho = 1");
    if (cfg.str("numerics.scheme") != "stationary") throw CaseError("kovasznay is stationary (numerics.scheme = stationary)");
    const int l0 = cfg.integer("geometry.level_min"), l1 = cfg.integer("geometry.level_max");
    if (l0 < 0 || l1 < l0) throw CaseError("geometry.level_min/level_max invalid");
    const Kovasznay k{mu};
    const ExactFields ex{[&](const Point& x) { return k.velocity(x); }, [&](const Point& x) { return k.pressure(x); },
                         [&](const Point& x) { return k.gradient(x); }};
    const FormConfig fc = form_config(cfg);
    BoundaryData d;
    d.v_D = [&](const Point& x, double) { return k.velocity(x); };
    d.p_D = [&](const Point& x, double) { return k.outflow_pressure(x, {1.0, 0.0}); };
    CsvWriter errors(out / "errors.csv",
                     {"level", "cells", "nodes", "p_err_l2", "v_err_h1", "v_err_l2", "order_p", "order_h1", "order_l2"});
    CsvWriter run(out / "run.csv", {"level", "cells", "newton_iterations", "residual"});
    RunResult res;
    std::vector<ErrorReport> reps;
    for (int l = l0; l <= l1; ++l) {
        Mesh m = generate_kovasznay(l);
        const Assembler a(m, fc, d);
        Field u = Field::Zero(static_cast<Eigen::Index>(a.size()));
        const NewtonResult nr = solve_stationary(a, u, solve_config(cfg, m));
        const ErrorReport e = exact_errors(m, u, ex);
        std::array<double, 3> o{std::nan(""), std::nan(""), std::nan("")};
        if (!reps.empty()) {
            o = {std::log2(reps.back().p_l2 / e.p_l2), std::log2(reps.back().v_h1 / e.v_h1),
                 std::log2(reps.back().v_l2 / e.v_l2)};
        }
        reps.push_back(e);
        errors.row({double(l), double(m.num_cells()), double(m.num_nodes()), e.p_l2, e.v_h1, e.v_l2, o[0], o[1], o[2]});
        run.row({double(l), double(m.num_cells()), double(nr.iterations), nr.history.back()});
        const std::string tag = "_" + std::to_string(m.num_cells());
        res.summary["p_err_l2" + tag] = e.p_l2;
        res.summary["v_err_h1" + tag] = e.v_h1;
        res.summary["v_err_l2" + tag] = e.v_l2;
        if (l == l1) {
            if (cfg.flag("output.vtk")) write_vtk(out / "field_final.vtk", m, u);
            res.state = u;
            res.mesh = std::move(m);
        }
    }
    if (reps.size() >= 2) {
        const auto& a = reps[reps.size() - 2];
        const auto& b = reps.back();
        res.summary["order_p_last"] = std::log2(a.p_l2 / b.p_l2);
        res.summary["order_h1_last"] = std::log2(a.v_h1 / b.v_h1);
        res.summary["order_l2_last"] = std::log2(a.v_l2 / b.v_l2);
    }
    return res;
}

inline RunResult run_standing_vortex(const Config& cfg, const fs::path& out) {
    RunResult res;
    res.mesh = generate_square_vortex(cfg.integer("geometry.level"));
    Assembler a(res.mesh, form_config(cfg), BoundaryData::zero());
    detail::Unsteady run{cfg, out, a, interpolate_field(res.mesh, detail::vortex_velocity, [](const Point&) { return 0.0; })};
    res.summary = run.run();
    const double bd = res.summary["boundary_dissipation_final"];
    res.summary["stabilization_to_boundary_ratio"] = bd > 0 ? res.summary["stabilization_dissipation_final"] / bd : INFINITY;
    res.summary["cells"] = static_cast<double>(res.mesh.num_cells());
    res.state = run.state;
    return res;
}

inline RunResult run_bfs(const Config& cfg, const fs::path& out) {
    RunResult res;
    const double hs = cfg.num("geometry.step_height"), hi = cfg.num("geometry.inlet_height");
    try {
        res.mesh = generate_bfs(hs, hi, cfg.num("geometry.upstream_length"), cfg.num("geometry.downstream_length"),
                                cfg.integer("geometry.resolution"));
    } catch (const MeshError& e) {
        throw CaseError(e.what());
    }
    const double H = hs + hi;
    // Parabolic inflow with unit mean speed on the inlet section [hs, H].
    BoundaryData d;
    d.v_D = [=](const Point& x, double) {
        const double s = (x.y - hs) / hi;
        return Point{6.0 * s * (1.0 - s), 0.0};
    };
    d.p_D = [](const Point&, double) { return 0.0; };
    (void)H;
    FormConfig fc0 = form_config(cfg);
    fc0.mu = cfg.num("physics.mu_initial");
    const Assembler a0(res.mesh, fc0, d);
    Field u = Field::Zero(static_cast<Eigen::Index>(a0.size()));
    const NewtonResult nr = solve_stationary(a0, u, solve_config(cfg, res.mesh));
    if (cfg.flag("output.vtk")) write_vtk(out / "initial.vtk", res.mesh, u);
    Assembler a(res.mesh, form_config(cfg), d);
    detail::Unsteady run{cfg, out, a, u};
    run.tolerate_failure = true;
    res.summary = run.run();
    res.summary["initial_newton_iterations"] = nr.iterations;
    res.summary["cells"] = static_cast<double>(res.mesh.num_cells());
    res.state = run.state;
    return res;
}

inline RunResult run_cylinder(const Config& cfg, const fs::path& out) {
    if (cfg.str("numerics.scheme") != "stationary") throw CaseError("cylinder is stationary (numerics.scheme = stationary)");
    const double length = cfg.num("geometry.length");
    const double um = cfg.num("geometry.mean_velocity");
    const int l0 = cfg.integer("geometry.level_min"), l1 = cfg.integer("geometry.level_max");
    if (l0 < 0 || l1 < l0 || l1 > 8) throw CaseError("geometry.level_min/level_max invalid");
    constexpr double H = 0.41;
    BoundaryData d;
    d.v_D = [=](const Point& x, double) { return Point{6.0 * um * x.y * (H - x.y) / (H * H), 0.0}; };
    d.p_D = [](const Point&, double) { return 0.0; };
    const FormConfig fc = form_config(cfg);
    CsvWriter run(out / "run.csv", {"level", "cells", "length", "drag", "drag_direct", "newton_iterations",
                                    "momentum_defect_x", "momentum_defect_y", "momentum_scale"});
    RunResult res;
    for (int l = l0; l <= l1; ++l) {
        Mesh m;
        try {
            m = generate_cylinder_channel(length, 1 << l);
        } catch (const MeshError& e) {
            throw CaseError(e.what());
        }
        const Assembler a(m, fc, d);
        Field u = Field::Zero(static_cast<Eigen::Index>(a.size()));
        const NewtonResult nr = solve_stationary(a, u, solve_config(cfg, m));
        const DragReport dr = drag_coefficient(a, u, um, 0.1);
        double mx = 0, my = 0, sc = 0;
        if (fc.mode == DiscretizationMode::Balanced) {
            const MomentumBalance mb = momentum_balance(a, u);
            mx = mb.lhs[0] - mb.rhs[0];
            my = mb.lhs[1] - mb.rhs[1];
            sc = mb.scale;
        }
        run.row({double(l), double(m.num_cells()), length, dr.coefficient, dr.coefficient_direct, double(nr.iterations), mx,
                 my, sc});
        res.summary["drag_level" + std::to_string(l)] = dr.coefficient;
        if (l == l1) {
            res.summary["drag"] = dr.coefficient;
            res.summary["drag_direct"] = dr.coefficient_direct;
            res.summary["momentum_defect"] = std::max(std::abs(mx), std::abs(my));
            res.summary["momentum_scale"] = sc;
            if (cfg.flag("output.vtk")) write_vtk(out / "field_final.vtk", m, u);
            res.state = u;
            res.mesh = std::move(m);
        }
    }
    return res;
}

inline RunResult run_fraenkel(const Config& cfg, const fs::path& out) {
    RunResult res;
    const bool reflected = cfg.flag("geometry.reflected");
    try {
        res.mesh = generate_fraenkel(cfg.integer("geometry.resolution"), reflected);
    } catch (const MeshError& e) {
        throw CaseError(e.what());
    }
    BoundaryData d;
    d.v_D = [](const Point& x, double) { return Point{std::abs(x.y), 0.0}; };
    d.p_D = [](const Point&, double) { return 0.0; };
    Assembler a(res.mesh, form_config(cfg), d);
    const auto m1 = detail::mirror_nodes(res.mesh, 0);
    const auto m2 = detail::mirror_nodes(res.mesh, 1);
    detail::Unsteady run{cfg, out, a, Field::Zero(static_cast<Eigen::Index>(a.size()))};
    run.extra_names = {"symmetry_x1", "symmetry_x2"};
    run.extra = [&](const Field& u) {
        return std::vector<double>{detail::symmetry_defect(u, m1), reflected ? detail::symmetry_defect(u, m2) : 0.0};
    };
    res.summary = run.run();
    res.summary["symmetry_x1_final"] = detail::symmetry_defect(run.state, m1);
    res.summary["symmetry_x2_final"] = reflected ? detail::symmetry_defect(run.state, m2) : 0.0;
    res.state = run.state;
    return res;
}

inline RunResult run_jet(const Config& cfg, const fs::path& out) {
    RunResult res;
    const double s = cfg.num("geometry.scale");
    const std::string variant = cfg.str("geometry.variant");
    if (variant != "inout" && variant != "characteristic")
        throw CaseError("geometry.variant must be inout or characteristic");
    const bool characteristic = variant == "characteristic";
    try {
        res.mesh = generate_T_jet(s, cfg.integer("geometry.level"), characteristic);
    } catch (const MeshError& e) {
        throw CaseError(e.what());
    }
    BoundaryData d;
    // Flat inflow s * ramp(t) at x = 0; characteristic outflow data v = 0, pressure drop s^2 from inlet to outlets.
    d.v_D = [=](const Point& x, double t) { return x.x < 0.5 * s ? Point{s * detail::ramp(t), 0.0} : Point{}; };
    d.p_D = [=](const Point& x, double) { return characteristic && x.x < 0.5 * s ? s * s : 0.0; };
    Assembler a(res.mesh, form_config(cfg), d);
    detail::Unsteady run{cfg, out, a, Field::Zero(static_cast<Eigen::Index>(a.size()))};
    res.summary = run.run();
    res.state = run.state;
    // Pressure along the symmetry axis y = s.
    std::vector<std::pair<double, double>> axis;
    for (std::size_t i = 0; i < res.mesh.num_nodes(); ++i)
        if (std::abs(res.mesh.nodes[i].y - s) < 1e-9 * s) axis.emplace_back(res.mesh.nodes[i].x, res.state[3 * i + 2]);
    std::sort(axis.begin(), axis.end());
    CsvWriter csv(out / "axis.csv", {"x", "p"});
    for (const auto& [x, p] : axis) csv.row({x, p});
    res.summary["axis_points"] = static_cast<double>(axis.size());
    return res;
}

/// Runs a resolved configuration, writing manifest.ini, summary.csv and the case outputs into `out`.
inline RunResult run_case(const Config& cfg, const fs::path& out) {
    const std::string name = cfg.str("case");
    case_defaults(name);  // validates the name
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw CaseError("cannot create output directory " + out.string());
    {
        std::ofstream os(out / "manifest.ini");
        if (!os) throw CaseError("cannot write to output directory " + out.string());
        os << cfg.to_ini();
    }
    RunResult r;
    if (name == "kovasznay") r = run_kovasznay(cfg, out);
    else if (name == "standing_vortex") r = run_standing_vortex(cfg, out);
    else if (name == "bfs") r = run_bfs(cfg, out);
    else if (name == "cylinder") r = run_cylinder(cfg, out);
    else if (name == "fraenkel") r = run_fraenkel(cfg, out);
    else r = run_jet(cfg, out);
    detail::write_summary(out, r.summary);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Comparison of two runs along a sample line.

struct CompareReport {
    std::size_t points{};
    double max_relative_deviation{};
};

inline std::vector<std::pair<double, double>> read_axis(const fs::path& dir) {
    std::ifstream is(dir / "axis.csv");
    if (!is) throw CaseError("no axis.csv in " + dir.string());
    std::string line;
    std::getline(is, line);
    if (line != "x,p") throw CaseError("unexpected axis.csv header in " + dir.string());
    std::vector<std::pair<double, double>> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw CaseError("malformed axis.csv line: " + line);
        Config tmp;
        tmp.set("x", line.substr(0, comma));
        tmp.set("p", line.substr(comma + 1));
        out.emplace_back(tmp.num("x"), tmp.num("p"));
    }
    return out;
}

/// Maps run a onto run b by x -> s x, p -> value_scale p and reports max |p_b - value_scale p_a| / max |value_scale p_a|.
inline CompareReport compare_runs(const fs::path& dir_a, const fs::path& dir_b, double s, double value_scale) {
    if (!(s > 0) || !std::isfinite(value_scale)) throw CaseError("compare: scale must be positive");
    const auto a = read_axis(dir_a);
    const auto b = read_axis(dir_b);
    if (a.size() != b.size() || a.empty()) throw CaseError("compare: incompatible sample lines (different point counts)");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(b[i].first - s * a[i].first) > 1e-8 * s * (1.0 + std::abs(a[i].first)))
            throw CaseError("compare: incompatible sample lines (positions do not map under the scale)");
        num = std::max(num, std::abs(b[i].second - value_scale * a[i].second));
        den = std::max(den, std::abs(value_scale * a[i].second));
    }
    return {a.size(), den > 0.0 ? num / den : num};
}

/// Mesh of a case at a level, as produced by its run.
inline Mesh case_mesh(const std::string& name, int level) {
    case_defaults(name);
    if (level < 0 || level > 8) throw CaseError("level must be in 0..8");
    if (name == "kovasznay") return generate_kovasznay(level);
    if (name == "standing_vortex") return generate_square_vortex(level);
    if (name == "bfs") return generate_bfs(0.5, 0.5, 1.0, 10.0, 1 << level);
    if (name == "cylinder") return generate_cylinder_channel(2.2, 1 << level);
    if (name == "fraenkel") return generate_fraenkel(1 << level);
    return generate_T_jet(1.0, level);
}

}  // namespace nitsche_flow::bench
