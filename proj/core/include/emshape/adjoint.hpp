#pragma once

#include "emshape/quantities.hpp"

namespace emshape {

/// Nodal adjoint states v_0 .. v_N, solved backward in time. v_0 is zero
/// unless the initial-condition adjoint is enabled and the initial state is
/// a magnetostatic solve.
struct AdjointTrajectory {
    std::vector<Vector> costates;
    std::vector<double> solve_residuals;
};

struct AdjointOptions {
    CostOptions cost;
    bool include_initial = true;           // solve v_0 for the magnetostatic u_0
    bool initial_is_magnetostatic = true;  // matches StateOptions::magnetostatic_initial
    double linear_tol = 1e-10;
};

/// Derivative load of the dissipated power at one step with respect to the
/// newer (wrt_newer) or older state entering the finite difference. The
/// averaged-test-function terms are reduced to plain loads: the local
/// zero-mean density plus a per-group correction that vanishes when sigma is
/// uniform over the averaging group.
Vector power_derivative_load(const EddyField& field, const Mesh& mesh,
                             const MaterialTable& materials, double tau, bool wrt_newer);

/// -lambda1/N * [ dP_i/du_i + dP_{i+1}/du_i ](w); the second term drops at
/// the horizon i = N.
Vector power_rhs(int step, const StateTrajectory& traj, const Mesh& mesh,
                 const MaterialTable& materials, const AdjointOptions& options);

/// +lambda2/N * dT_i/du_i(w), linear in u_i (bare sum: no 1/N).
Vector torque_rhs(int step, const Vector& u_step, const Mesh& mesh,
                  const MaterialTable& materials, const AdjointOptions& options, int step_count);

/// One symmetric solve: [A_i'(u_i) + M_sigma/tau] v_i = rhs + (M_sigma/tau) v_{i+1}.
Vector adjoint_step(int step, const Vector& v_next, const StateTrajectory& traj, const Mesh& mesh,
                    const MaterialTable& materials, const DriveSpec& drive,
                    const AdjointOptions& options, double* residual = nullptr);

/// A_0'(u_0) v_0 = -lambda1/N * dP_1/du_0 + (M_sigma/tau) v_1; gives the
/// exact discrete gradient when u_0 is the magnetostatic solution.
Vector initial_adjoint(const StateTrajectory& traj, const Vector& v_1, const Mesh& mesh,
                       const MaterialTable& materials, const DriveSpec& drive,
                       const AdjointOptions& options, double* residual = nullptr);

AdjointTrajectory solve_adjoint(const StateTrajectory& traj, const Mesh& mesh,
                                const MaterialTable& materials, const DriveSpec& drive,
                                const AdjointOptions& options);

}  // namespace emshape
