#include "emshape/state.hpp"

#include <cmath>
#include <sstream>

namespace emshape {

namespace {

/// Damped Newton on the reduced system. Returns the reduced solution.
Vector newton_reduced(const Mesh& mesh, const MaterialTable& materials, const Vector& load_full,
                      const SparseMatrix* mass, const Vector* u_prev_full, const DofMap& dofs,
                      const Vector& guess_full, const NewtonOptions& options, StepStats* stats) {
    Vector rhs_full = load_full;
    if (mass != nullptr && u_prev_full != nullptr) rhs_full += (*mass) * (*u_prev_full);
    const Vector rhs_red = dofs.reduce(rhs_full);

    Vector u_red = dofs.restrict_values(guess_full);

    auto residual_at = [&](const Vector& u_reduced) -> Vector {
        const Vector u_full = dofs.expand(u_reduced);
        Vector res_full = assemble_operator(mesh, materials, u_full).residual;
        if (mass != nullptr) res_full += (*mass) * u_full;
        return dofs.reduce(res_full) - rhs_red;
    };

    Vector res = residual_at(u_red);
    const double res0 = res.norm();
    // round-off floor: assembly noise scales with the load, so a warm start
    // that already solves the step must count as converged
    const double target = std::max({options.tolerance * res0, options.absolute_floor,
                                    1e-13 * rhs_red.norm()});

    std::vector<double> history{res0};
    int iterations = 0;
    while (res.norm() > target) {
        if (iterations >= options.max_iterations) {
            std::ostringstream oss;
            oss << "Newton did not converge in " << options.max_iterations
                << " iterations; residual history:";
            for (double h : history) oss << ' ' << h;
            throw SolverError(oss.str(), res.norm());
        }

        const Vector u_full = dofs.expand(u_red);
        OperatorParts parts = assemble_operator(mesh, materials, u_full);
        SparseMatrix k_full = parts.tangent;
        if (mass != nullptr) k_full += *mass;

        SparseSystem system;
        system.matrix = dofs.reduce_matrix(k_full);
        system.rhs = -res;
        system.dofs = DofMap(static_cast<int>(system.rhs.size()), ConstraintMap{});
        const Vector delta = reduce_and_solve(system, options.linear_tol);

        // backtracking: halve until the residual norm decreases
        double step = 1.0;
        const double res_norm = res.norm();
        Vector u_trial, res_trial;
        bool accepted = false;
        for (int h = 0; h <= options.max_halvings; ++h) {
            u_trial = u_red + step * delta;
            res_trial = residual_at(u_trial);
            if (res_trial.norm() < res_norm || res_trial.norm() <= target) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            std::ostringstream oss;
            oss << "Newton stagnated after " << options.max_halvings
                << " halvings; residual history:";
            for (double h : history) oss << ' ' << h;
            throw SolverError(oss.str(), res_norm);
        }
        u_red = u_trial;
        res = res_trial;
        history.push_back(res.norm());
        ++iterations;
    }

    if (stats != nullptr) {
        stats->newton_iterations = iterations;
        stats->final_residual = res.norm();
        stats->initial_residual = res0;
        stats->saturated_elements =
            assemble_operator(mesh, materials, dofs.expand(u_red)).saturated_elements;
    }
    return u_red;
}

Vector default_load(const Mesh& mesh, const MaterialTable& materials, const DriveSpec& drive,
                    int step, const StateOptions& options) {
    if (options.load_override) return options.load_override(step);
    return assemble_load(mesh, materials, drive, step);
}

}  // namespace

Vector solve_magnetostatic(const Mesh& mesh, const MaterialTable& materials,
                           const DriveSpec& drive, int step, const Vector& guess,
                           const NewtonOptions& options, StepStats* stats) {
    const int k_step = shift_per_step(mesh, drive);
    const ConstraintMap constraints = build_constraints(mesh, step * k_step);
    const DofMap dofs(static_cast<int>(mesh.nodes.size()), constraints);
    const Vector load = assemble_load(mesh, materials, drive, step);
    const Vector u_red =
        newton_reduced(mesh, materials, load, nullptr, nullptr, dofs, guess, options, stats);
    if (stats != nullptr) stats->shift = constraints.locked_shift;
    return dofs.expand(u_red);
}

Vector time_step(const Mesh& mesh, const MaterialTable& materials, const DriveSpec& drive,
                 const Vector& u_prev, int step, const NewtonOptions& options, StepStats* stats) {
    const int k_step = shift_per_step(mesh, drive);
    const ConstraintMap constraints = build_constraints(mesh, step * k_step);
    const DofMap dofs(static_cast<int>(mesh.nodes.size()), constraints);
    const SparseMatrix mass = assemble_mass_sigma(mesh, materials, drive.tau());
    const Vector load = assemble_load(mesh, materials, drive, step);
    const Vector u_red =
        newton_reduced(mesh, materials, load, &mass, &u_prev, dofs, u_prev, options, stats);
    if (stats != nullptr) stats->shift = constraints.locked_shift;
    return dofs.expand(u_red);
}

StateTrajectory solve_trajectory(const Mesh& mesh, const MaterialTable& materials,
                                 const DriveSpec& drive, const StateOptions& options) {
    materials.validate_against(mesh);
    const int n = static_cast<int>(mesh.nodes.size());
    const int steps = drive.steps_per_period;
    const int k_step = shift_per_step(mesh, drive);

    StateTrajectory traj;
    traj.tau = drive.tau();
    traj.shift_per_step = k_step;
    traj.states.reserve(steps + 1);
    traj.stats.resize(steps + 1);

    const SparseMatrix mass = assemble_mass_sigma(mesh, materials, drive.tau());

    for (int j = 0; j <= steps; ++j) {
        const ConstraintMap constraints = build_constraints(mesh, j * k_step);
        const DofMap dofs(n, constraints);
        StepStats& stats = traj.stats[j];
        stats.shift = constraints.locked_shift;
        try {
            if (j == 0) {
                if (options.magnetostatic_initial) {
                    const Vector load = default_load(mesh, materials, drive, 0, options);
                    const Vector u_red = newton_reduced(mesh, materials, load, nullptr, nullptr,
                                                        dofs, Vector::Zero(n), options.newton,
                                                        &stats);
                    traj.states.push_back(dofs.expand(u_red));
                } else {
                    traj.states.push_back(Vector::Zero(n));
                }
            } else {
                const Vector load = default_load(mesh, materials, drive, j, options);
                const Vector u_red =
                    newton_reduced(mesh, materials, load, &mass, &traj.states[j - 1], dofs,
                                   traj.states[j - 1], options.newton, &stats);
                traj.states.push_back(dofs.expand(u_red));
            }
        } catch (const SolverError& err) {
            throw SolverError("time step " + std::to_string(j) + ": " + err.what(),
                              err.achieved_residual);
        }
    }
    return traj;
}

}  // namespace emshape
