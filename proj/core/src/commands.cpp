#include "emshape/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "emshape/io.hpp"
#include "emshape/version.hpp"

namespace emshape {

namespace {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const fs::path& dir, const RunConfig& config, const std::string& command,
                    const Mesh& mesh) {
    std::ofstream out(dir / "manifest.txt");
    out << "tool emshape " << kVersion << "\n";
    out << "command " << command << "\n";
    out << "config_hash " << hex64(config.text_hash()) << "\n";
    out << "nodes " << mesh.nodes.size() << "\n";
    out << "triangles " << mesh.triangles.size() << "\n";
}

void dump_state_vtk(const fs::path& path, const Mesh& mesh, const MaterialTable& materials,
                    const StateTrajectory& traj, int step) {
    std::vector<double> region_field, eddy_field_values;
    region_field.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) region_field.push_back(t.region);
    if (step >= 1) {
        const EddyField field =
            eddy_density(traj.states[step], traj.states[step - 1], mesh, materials, traj.tau);
        eddy_field_values = field.corrected;
    } else {
        eddy_field_values.assign(mesh.triangles.size(), 0.0);
    }
    write_vtk(path.string(), mesh, {{"u", traj.states[step]}},
              {{"region", region_field}, {"eddy_corrected", eddy_field_values}});
}

int classify(const std::exception& err) {
    if (dynamic_cast<const SolverError*>(&err) != nullptr) return kExitSolver;
    return kExitInput;
}

}  // namespace

std::string resolve_output_directory(const RunConfig& config) {
    if (const char* env = std::getenv("EMSHAPE_OUT"); env != nullptr && *env != '\0') return env;
    return config.output_directory();
}

int cmd_solve(const std::string& config_path) {
    try {
        const RunConfig config = RunConfig::parse_file(config_path);
        const Mesh mesh = config.make_mesh();
        const MaterialTable materials = config.make_materials(mesh);
        const DriveSpec drive = config.make_drive();

        const StateTrajectory traj =
            solve_trajectory(mesh, materials, drive, config.make_state_options());
        const AdjointOptions adjoint_options = config.make_adjoint_options(mesh);
        const CostOptions& cost_options = adjoint_options.cost;
        if (cost_options.lambda2 > 0.0 && cost_options.torque.outer_radius <= 0.0)
            throw ConfigError(
                "cost.lambda2 > 0 needs a torque annulus: tagged airgap regions or "
                "explicit cost.annulus radii");
        const CostBreakdown breakdown = cost(traj, mesh, materials, cost_options);

        const fs::path dir = resolve_output_directory(config);
        fs::create_directories(dir);
        write_manifest(dir, config, "solve", mesh);

        std::vector<std::vector<double>> rows;
        for (int j = 1; j <= traj.step_count(); ++j)
            rows.push_back({static_cast<double>(j), breakdown.power_steps[j - 1],
                            breakdown.torque_steps[j - 1]});
        write_csv((dir / "steps.csv").string(), "j,P_j,T_j", rows);

        if (config.write_vtk()) {
            const int every = std::max(1, config.vtk_every());
            for (int j = 0; j <= traj.step_count(); ++j) {
                if (j % every != 0) continue;
                char name[32];
                std::snprintf(name, sizeof name, "field_%04d.vtk", j);
                dump_state_vtk(dir / name, mesh, materials, traj, j);
            }
        }

        int saturated = 0;
        for (const auto& stats : traj.stats) saturated += stats.saturated_elements;
        if (saturated > 0)
            std::cout << "note: reluctivity exponent clamp engaged on " << saturated
                      << " element evaluations\n";
        std::cout << "P = " << format_g17(breakdown.average_power)
                  << " W, T = " << format_g17(breakdown.average_torque)
                  << " N.m, J = " << format_g17(breakdown.cost) << "\n";
        return kExitOk;
    } catch (const std::exception& err) {
        std::cerr << "solve: " << err.what() << "\n";
        return classify(err);
    }
}

int cmd_adjoint_check(const std::string& config_path, const AdjointCheckOverrides& overrides) {
    try {
        const RunConfig config = RunConfig::parse_file(config_path);
        const Mesh mesh = config.make_mesh();
        const MaterialTable materials = config.make_materials(mesh);
        const DriveSpec drive = config.make_drive();

        FdCheckOptions fd_options = config.make_fd_options();
        if (overrides.samples) fd_options.samples = *overrides.samples;
        if (overrides.eps) fd_options.eps_rel = *overrides.eps;
        const double gate = overrides.gate ? *overrides.gate : config.fd_gate();

        const FdCheckReport report =
            fd_gradient_check(mesh, materials, drive, config.make_state_options(),
                              config.make_adjoint_options(mesh), fd_options);

        const fs::path dir = resolve_output_directory(config);
        fs::create_directories(dir);
        write_manifest(dir, config, "adjoint-check", mesh);

        std::vector<std::vector<double>> rows;
        for (const auto& row : report.rows)
            rows.push_back({static_cast<double>(row.node), static_cast<double>(row.coordinate),
                            row.analytic, row.finite_difference, row.relative_error});
        write_csv((dir / "gradcheck.csv").string(), "node,coord,analytic,fd,rel_err", rows);

        if (report.clamped)
            std::cout << "note: sample count clamped to " << report.sampled_nodes
                      << " free nodes\n";
        std::cout << "worst relative error " << format_g17(report.worst_relative_error)
                  << " over " << report.sampled_nodes << " nodes (gate "
                  << format_g17(gate) << ")\n";
        if (report.worst_relative_error > gate) {
            std::cerr << "adjoint-check: gradient gate exceeded\n";
            return kExitGate;
        }
        return kExitOk;
    } catch (const std::exception& err) {
        std::cerr << "adjoint-check: " << err.what() << "\n";
        return classify(err);
    }
}

int cmd_optimize(const std::string& config_path) {
    try {
        const RunConfig config = RunConfig::parse_file(config_path);
        const Mesh mesh = config.make_mesh();
        const MaterialTable materials = config.make_materials(mesh);
        const DriveSpec drive = config.make_drive();

        const fs::path dir = resolve_output_directory(config);
        fs::create_directories(dir);
        write_manifest(dir, config, "optimize", mesh);
        save_mesh(mesh, (dir / "mesh_initial.emsh").string());

        OptimizeOptions options = config.make_optimize_options(mesh);
        if (options.adjoint.cost.lambda2 > 0.0 &&
            options.adjoint.cost.torque.outer_radius <= 0.0)
            throw ConfigError(
                "cost.lambda2 > 0 needs a torque annulus: tagged airgap regions or "
                "explicit cost.annulus radii");
        if (config.write_vtk()) {
            const int every = std::max(1, config.vtk_every());
            options.on_iteration = [&, every](int iter, const Mesh& m,
                                              const StateTrajectory& traj) {
                if (iter % every != 0) return;
                char name[32];
                std::snprintf(name, sizeof name, "design_%04d.vtk", iter);
                dump_state_vtk(dir / name, m, materials, traj, traj.step_count());
            };
        }

        const OptimizeResult result = optimize(mesh, materials, drive, options);

        if (config.write_vtk()) {
            // final design: per-step state and adjoint fields
            const StateTrajectory traj =
                solve_trajectory(result.mesh, materials, drive, options.state);
            const AdjointTrajectory adj =
                solve_adjoint(traj, result.mesh, materials, drive, options.adjoint);
            std::vector<double> region_field;
            for (const auto& t : result.mesh.triangles) region_field.push_back(t.region);
            for (int j = 0; j <= traj.step_count(); ++j) {
                std::vector<double> eddy(result.mesh.triangles.size(), 0.0);
                if (j >= 1)
                    eddy = eddy_density(traj.states[j], traj.states[j - 1], result.mesh,
                                        materials, traj.tau, options.adjoint.cost.mean_mode)
                               .corrected;
                char name[40];
                std::snprintf(name, sizeof name, "field_final_%04d.vtk", j);
                write_vtk((dir / name).string(), result.mesh,
                          {{"u", traj.states[j]}, {"v", adj.costates[j]}},
                          {{"region", region_field}, {"eddy_corrected", eddy}});
            }
        }

        std::vector<std::vector<double>> rows;
        for (const auto& row : result.history.rows)
            rows.push_back({static_cast<double>(row.iteration), row.cost, row.power, row.torque,
                            row.step, row.min_quality, row.gradient_norm});
        write_csv((dir / "history.csv").string(), "iter,J,P,T,step,min_quality,grad_norm", rows);
        save_mesh(result.mesh, (dir / "mesh_final.emsh").string());

        const char* reason = result.history.reason == TerminationReason::MaxIters ? "max_iters"
                             : result.history.reason == TerminationReason::StepFloor
                                 ? "step_floor"
                                 : "quality_floor";
        std::cout << "terminated: " << reason << " after "
                  << result.history.rows.back().iteration << " accepted iterations, J = "
                  << format_g17(result.history.rows.back().cost) << "\n";
        return kExitOk;
    } catch (const std::exception& err) {
        std::cerr << "optimize: " << err.what() << "\n";
        return classify(err);
    }
}

int cmd_mesh_info(const std::string& mesh_path) {
    try {
        const Mesh mesh = load_mesh(mesh_path);
        const QualityReport report = quality(mesh);
        std::cout << "nodes " << mesh.nodes.size() << "\n";
        std::cout << "triangles " << mesh.triangles.size() << "\n";
        std::cout << "boundary_edges " << mesh.boundary_edges.size() << "\n";
        const char* symmetry = mesh.symmetry == Symmetry::Full        ? "full"
                               : mesh.symmetry == Symmetry::Periodic ? "periodic"
                                                                     : "antiperiodic";
        std::cout << "symmetry " << symmetry << "\n";
        std::cout << "min_quality " << format_g17(report.min_quality) << " (element "
                  << report.min_element << ")\n";
        std::cout << "inverted " << report.inverted_count << "\n";
        for (const auto& [id, info] : mesh.region_table) {
            std::cout << "region " << id << " " << role_name(info.role);
            if (info.role == RegionRole::Magnet) std::cout << " " << info.index;
            if (info.role == RegionRole::Coil)
                std::cout << " " << info.index << " "
                          << (info.phase == Phase::A ? "A" : info.phase == Phase::B ? "B" : "C")
                          << " " << (info.polarity > 0 ? "+1" : "-1");
            std::cout << "\n";
        }
        if (mesh.has_interface()) {
            const InterfaceRings rings = mesh.interface_rings();
            std::cout << "interface_vertices " << rings.vertex_count() << " radius "
                      << format_g17(rings.radius) << "\n";
        }
        return kExitOk;
    } catch (const std::exception& err) {
        std::cerr << "mesh-info: " << err.what() << "\n";
        return kExitInput;
    }
}

}  // namespace emshape
