#include <CLI11.hpp>
#include <iostream>

#include "emshape/commands.hpp"
#include "emshape/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"2D eddy-current shape optimization of permanent-magnet machines"};
    app.set_version_flag("--version", std::string("emshape ") + emshape::kVersion);
    app.require_subcommand(1);

    std::string config_path, mesh_path;

    auto* solve = app.add_subcommand("solve", "run the time-stepped field solve");
    solve->add_option("config", config_path, "run configuration file")->required();

    auto* check = app.add_subcommand("adjoint-check",
                                     "verify the adjoint shape gradient against finite differences");
    check->add_option("config", config_path, "run configuration file")->required();
    int samples = 0;
    double eps = 0.0, gate = 0.0;
    auto* samples_opt = check->add_option("--samples", samples, "number of sampled free nodes");
    auto* eps_opt = check->add_option("--eps", eps, "step, relative to the local edge length");
    auto* gate_opt = check->add_option("--gate", gate, "worst relative error accepted");

    auto* optimize = app.add_subcommand("optimize", "run the shape-gradient descent loop");
    optimize->add_option("config", config_path, "run configuration file")->required();

    auto* info = app.add_subcommand("mesh-info", "summarize an emsh mesh file");
    info->add_option("mesh", mesh_path, "mesh file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? emshape::kExitOk : emshape::kExitUsage;
    }

    if (solve->parsed()) return emshape::cmd_solve(config_path);
    if (check->parsed()) {
        emshape::AdjointCheckOverrides overrides;
        if (samples_opt->count() > 0) overrides.samples = samples;
        if (eps_opt->count() > 0) overrides.eps = eps;
        if (gate_opt->count() > 0) overrides.gate = gate;
        return emshape::cmd_adjoint_check(config_path, overrides);
    }
    if (optimize->parsed()) return emshape::cmd_optimize(config_path);
    if (info->parsed()) return emshape::cmd_mesh_info(mesh_path);
    return emshape::kExitUsage;
}
