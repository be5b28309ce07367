#include <benchmark/benchmark.h>

#include <sstream>

#include "emshape/config.hpp"

namespace {

using namespace emshape;

/// Production-scale machine, about 2.4k nodes, N = 15 rotor positions.
struct Scale {
    Mesh mesh;
    MaterialTable materials;
    DriveSpec drive;
    StateOptions state;
    AdjointOptions adjoint;

    static const Scale& instance() {
        static const Scale scale = [] {
            std::ostringstream cfg;
            cfg << "[mesh]\nsector = eighth\npole_pairs = 4\n"
                << "shaft_radius = 0.02\nrotor_outer_radius = 0.05\n"
                << "stator_inner_radius = 0.053\nstator_outer_radius = 0.08\n"
                << "element_size = 0.0013\n"
                << "[materials]\niron_model = brauer\nmagnet_sigma = 625000\n"
                << "magnet_remanence = 1.1\naxial_length = 0.1\ncoil_turns = 100\n"
                << "[drive]\nrpm = 1500\nsteps_per_period = 15\npeak_current = 10\n"
                << "[cost]\nlambda1 = 1\nlambda2 = 0\n";
            const RunConfig config = RunConfig::parse_string(cfg.str());
            Scale s;
            s.mesh = config.make_mesh();
            s.materials = config.make_materials(s.mesh);
            s.drive = config.make_drive();
            s.state = config.make_state_options();
            s.adjoint = config.make_adjoint_options(s.mesh);
            return s;
        }();
        return scale;
    }
};

void BM_AssembleOperator(benchmark::State& state) {
    const Scale& s = Scale::instance();
    const Vector u = Vector::Zero(s.mesh.nodes.size());
    for (auto _ : state) {
        auto parts = assemble_operator(s.mesh, s.materials, u);
        benchmark::DoNotOptimize(parts.residual.data());
    }
    state.counters["nodes"] = static_cast<double>(s.mesh.nodes.size());
}
BENCHMARK(BM_AssembleOperator)->Unit(benchmark::kMillisecond);

void BM_ReduceAndSolve(benchmark::State& state) {
    const Scale& s = Scale::instance();
    const DofMap dofs(static_cast<int>(s.mesh.nodes.size()), build_constraints(s.mesh, 0));
    const auto parts =
        assemble_operator(s.mesh, s.materials, Vector::Zero(s.mesh.nodes.size()));
    SparseSystem system{dofs.reduce_matrix(parts.tangent),
                        dofs.reduce(assemble_load(s.mesh, s.materials, s.drive, 0)), dofs};
    for (auto _ : state) {
        Vector x = reduce_and_solve(system, 1e-10);
        benchmark::DoNotOptimize(x.data());
    }
    state.counters["dofs"] = static_cast<double>(dofs.reduced_count());
}
BENCHMARK(BM_ReduceAndSolve)->Unit(benchmark::kMillisecond);

void BM_MagnetostaticSolve(benchmark::State& state) {
    const Scale& s = Scale::instance();
    for (auto _ : state) {
        Vector u = solve_magnetostatic(s.mesh, s.materials, s.drive, 0,
                                       Vector::Zero(s.mesh.nodes.size()), s.state.newton);
        benchmark::DoNotOptimize(u.data());
    }
}
BENCHMARK(BM_MagnetostaticSolve)->Unit(benchmark::kMillisecond);

void BM_TrajectoryN15(benchmark::State& state) {
    const Scale& s = Scale::instance();
    for (auto _ : state) {
        StateTrajectory traj = solve_trajectory(s.mesh, s.materials, s.drive, s.state);
        benchmark::DoNotOptimize(traj.states.back().data());
    }
}
BENCHMARK(BM_TrajectoryN15)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_AdjointSweep(benchmark::State& state) {
    const Scale& s = Scale::instance();
    const StateTrajectory traj = solve_trajectory(s.mesh, s.materials, s.drive, s.state);
    for (auto _ : state) {
        AdjointTrajectory adj = solve_adjoint(traj, s.mesh, s.materials, s.drive, s.adjoint);
        benchmark::DoNotOptimize(adj.costates.back().data());
    }
}
BENCHMARK(BM_AdjointSweep)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_ShapeGradient(benchmark::State& state) {
    const Scale& s = Scale::instance();
    const StateTrajectory traj = solve_trajectory(s.mesh, s.materials, s.drive, s.state);
    const AdjointTrajectory adj = solve_adjoint(traj, s.mesh, s.materials, s.drive, s.adjoint);
    for (auto _ : state) {
        ShapeGradient g = shape_gradient(s.mesh, traj, adj, s.materials, s.drive, s.adjoint);
        benchmark::DoNotOptimize(g.g.data());
    }
}
BENCHMARK(BM_ShapeGradient)->Unit(benchmark::kMillisecond);

void BM_DescentField(benchmark::State& state) {
    const Scale& s = Scale::instance();
    const StateTrajectory traj = solve_trajectory(s.mesh, s.materials, s.drive, s.state);
    const AdjointTrajectory adj = solve_adjoint(traj, s.mesh, s.materials, s.drive, s.adjoint);
    const ShapeGradient g = shape_gradient(s.mesh, traj, adj, s.materials, s.drive, s.adjoint);
    for (auto _ : state) {
        std::vector<Vec2> theta = descent_field(s.mesh, g);
        benchmark::DoNotOptimize(theta.data());
    }
}
BENCHMARK(BM_DescentField)->Unit(benchmark::kMillisecond);

void BM_TemplateGeneration(benchmark::State& state) {
    for (auto _ : state) {
        TemplateParams params;
        params.sector = SectorFraction::Eighth;
        params.pole_pairs = 4;
        params.element_size = 0.0013;
        params.steps_per_period = 15;
        Mesh mesh = generate_template(params);
        benchmark::DoNotOptimize(mesh.nodes.data());
    }
}
BENCHMARK(BM_TemplateGeneration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
