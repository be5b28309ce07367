#pragma once

#include <functional>
#include <optional>

#include "emshape/assembly.hpp"

namespace emshape {

struct NewtonOptions {
    double tolerance = 1e-8;       // relative to the initial residual of the step
    double absolute_floor = 1e-14; // convergence floor for zero-data steps
    int max_iterations = 50;
    int max_halvings = 10;
    double linear_tol = 1e-10;
};

struct StepStats {
    int newton_iterations = 0;
    double final_residual = 0.0;
    double initial_residual = 0.0;
    int shift = 0;
    int saturated_elements = 0;  // at the accepted state
};

/// Nodal solutions u_0 .. u_N of the time-stepped magneto-quasi-static
/// problem, with per-step solver metadata.
struct StateTrajectory {
    std::vector<Vector> states;      // size N+1, full nodal vectors
    std::vector<StepStats> stats;    // size N+1
    double tau = 0.0;
    int shift_per_step = 0;

    int step_count() const { return static_cast<int>(states.size()) - 1; }
};

struct StateOptions {
    NewtonOptions newton;
    bool magnetostatic_initial = true;  // u_0 = magnetostatic solve; else u_0 = 0
    /// When set, replaces the region-based load assembly (manufactured tests).
    std::function<Vector(int)> load_override;
};

/// Damped-Newton solve of <A_j(u), w> = <F_j, w> at the step's rotor shift.
Vector solve_magnetostatic(const Mesh& mesh, const MaterialTable& materials,
                           const DriveSpec& drive, int step, const Vector& guess,
                           const NewtonOptions& options = {}, StepStats* stats = nullptr);

/// One backward-Euler step: sigma/tau mass added to both residual and
/// tangent, warm-started from the previous solution.
Vector time_step(const Mesh& mesh, const MaterialTable& materials, const DriveSpec& drive,
                 const Vector& u_prev, int step, const NewtonOptions& options = {},
                 StepStats* stats = nullptr);

/// Magnetostatic initial state followed by N backward-Euler steps, the
/// interface identification advancing by shift_per_step each step.
StateTrajectory solve_trajectory(const Mesh& mesh, const MaterialTable& materials,
                                 const DriveSpec& drive, const StateOptions& options = {});

}  // namespace emshape
