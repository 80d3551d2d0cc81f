#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "nitsche_flow/cases.hpp"

namespace nf = nitsche_flow;
namespace bench = nitsche_flow::bench;

namespace {

constexpr int exit_config = 2;
constexpr int exit_solver = 3;

// Leftover "--section.key value" / "--section.key=value" arguments become overrides.
void collect_key_flags(const std::vector<std::string>& extras, bench::Config& overrides) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0 || a.find('.') == std::string::npos)
            throw bench::CaseError("unexpected argument '" + a + "'");
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            overrides.set(a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) throw bench::CaseError("missing value for " + a);
            overrides.set(a.substr(2), extras[++i]);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weak-boundary Navier-Stokes/Euler benchmark driver"};
    app.require_subcommand(1);

    std::string case_name, config_path, out_dir;
    std::vector<std::string> assignments;
    auto* run = app.add_subcommand("run", "Run a benchmark case");
    run->add_option("--case", case_name, "Case name")->required();
    run->add_option("--config", config_path, "INI file with [physics] [geometry] [numerics] [output] sections");
    run->add_option("--set", assignments, "Override, section.key=value (repeatable)");
    run->add_option("--out", out_dir, "Output directory")->required();
    run->allow_extras();

    std::string dir_a, dir_b;
    double scale = 1.0;
    double value_scale = std::nan("");
    auto* compare = app.add_subcommand("compare", "Compare symmetry-axis pressure of two jet runs");
    compare->add_option("--a", dir_a, "Reference run directory")->required();
    compare->add_option("--b", dir_b, "Scaled run directory")->required();
    compare->add_option("--scale", scale, "Spatial scale s of run b relative to run a");
    compare->add_option("--value-scale", value_scale, "Pressure scale (default s^2)");

    std::string mesh_case, mesh_out;
    int level = 0;
    auto* mesh = app.add_subcommand("mesh", "Write the mesh of a case");
    mesh->add_option("--case", mesh_case, "Case name")->required();
    mesh->add_option("--level", level, "Refinement level");
    mesh->add_option("--out", mesh_out, "Mesh file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        if (*run) {
            bench::Config file = config_path.empty() ? bench::Config{} : bench::parse_config_file(config_path);
            bench::Config overrides;
            collect_key_flags(run->remaining(), overrides);
            for (const auto& s : assignments) {
                const auto [k, v] = bench::parse_assignment(s);
                overrides.set(k, v);
            }
            const bench::Config cfg = bench::resolve_config(case_name, file, overrides);
            const auto r = bench::run_case(cfg, out_dir);
            for (const auto& [k, v] : r.summary) std::cout << k << " = " << bench::format_number(v) << "\n";
        } else if (*compare) {
            const double vs = std::isnan(value_scale) ? scale * scale : value_scale;
            const auto rep = bench::compare_runs(dir_a, dir_b, scale, vs);
            std::cout << "points = " << rep.points << "\nmax_relative_deviation = "
                      << bench::format_number(rep.max_relative_deviation) << "\n";
        } else if (*mesh) {
            nf::write_mesh(mesh_out, bench::case_mesh(mesh_case, level));
        }
    } catch (const bench::CaseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const nf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const nf::MeshError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const nf::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return exit_solver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
