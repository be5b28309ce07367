#pragma once

#include <cstdint>
#include <functional>

#include "emshape/adjoint.hpp"

namespace emshape {

/// Nodal shape gradient of the discrete Lagrangian, one 2-vector per node,
/// zeroed outside the design region.
struct ShapeGradient {
    std::vector<Vec2> g;
    std::vector<char> free_mask;

    double norm() const;
};

/// Design-region mask: a node is free when every incident element is rotor
/// iron or a rotor air pocket and the node lies on no tagged boundary edge.
/// Stator, magnets (interior and boundary), airgap, shaft and sector sides
/// all stay fixed.
std::vector<char> design_mask(const Mesh& mesh);

/// d L_h / d X at frozen nodal states: element-geometry derivatives of the
/// nonlinear stiffness forms, the sigma/tau mass coupling, the load terms,
/// and the power and torque functionals, before masking.
std::vector<Vec2> shape_gradient_raw(const Mesh& mesh, const StateTrajectory& traj,
                                     const AdjointTrajectory& adj,
                                     const MaterialTable& materials, const DriveSpec& drive,
                                     const AdjointOptions& options);

ShapeGradient shape_gradient(const Mesh& mesh, const StateTrajectory& traj,
                             const AdjointTrajectory& adj, const MaterialTable& materials,
                             const DriveSpec& drive, const AdjointOptions& options);

/// Reduced cost J(X) = lambda1 P - lambda2 T via a full state re-solve.
double evaluate_cost(const Mesh& mesh, const MaterialTable& materials, const DriveSpec& drive,
                     const StateOptions& state_options, const CostOptions& cost_options);

struct DescentOptions {
    double alpha_cr = 1.0;    // Cauchy-Riemann augmentation weight
    double eps0 = 1e-6;       // zeroth-order regularization, relative to the form scale
    double linear_tol = 1e-10;
};

/// Solve b(theta, W) = -g.W on the design region: symmetrized-gradient form
/// plus the Cauchy-Riemann term and a small zeroth-order stabilization.
/// Guarantees g.theta = -b(theta, theta) < 0 unless g vanishes on the free
/// set.
std::vector<Vec2> descent_field(const Mesh& mesh, const ShapeGradient& gradient,
                                const DescentOptions& options = {});

/// b(theta, theta) for the same form; the descent-identity check.
double descent_form_energy(const Mesh& mesh, const ShapeGradient& gradient,
                           const std::vector<Vec2>& theta, const DescentOptions& options = {});

struct LineSearchOptions {
    double step_factor = 0.02;    // t0 max|theta| = step_factor * min local edge
    double quality_floor = 0.05;
    int max_halvings = 12;
};

enum class LineSearchOutcome { Accepted, ZeroDirection, QualityFloor, CostFloor };

struct LineSearchResult {
    LineSearchOutcome outcome = LineSearchOutcome::ZeroDirection;
    double step = 0.0;
    double cost = 0.0;
    int trials = 0;
    Mesh mesh;  // advected mesh when accepted

    bool accepted() const { return outcome == LineSearchOutcome::Accepted; }
};

LineSearchResult line_search(const Mesh& mesh, const std::vector<Vec2>& theta, double current_cost,
                             const std::function<double(const Mesh&)>& evaluate,
                             const LineSearchOptions& options = {});

enum class TerminationReason { MaxIters, StepFloor, QualityFloor };

struct OptimizationRow {
    int iteration = 0;
    double cost = 0.0;
    double power = 0.0;
    double torque = 0.0;
    double step = 0.0;
    double min_quality = 0.0;
    double gradient_norm = 0.0;
};

struct OptimizationHistory {
    std::vector<OptimizationRow> rows;
    TerminationReason reason = TerminationReason::MaxIters;
};

struct OptimizeOptions {
    StateOptions state;
    AdjointOptions adjoint;
    DescentOptions descent;
    LineSearchOptions line_search;
    int max_iterations = 50;
    /// Called after the initial evaluation (iteration 0) and after every
    /// accepted step with the current mesh and trajectory.
    std::function<void(int, const Mesh&, const StateTrajectory&)> on_iteration;
};

struct OptimizeResult {
    OptimizationHistory history;
    Mesh mesh;  // final design
};

OptimizeResult optimize(const Mesh& mesh, const MaterialTable& materials, const DriveSpec& drive,
                        const OptimizeOptions& options);

struct FdCheckRow {
    int node = 0;
    int coordinate = 0;  // 0 = x, 1 = y
    double analytic = 0.0;
    double finite_difference = 0.0;
    double relative_error = 0.0;
    bool conclusive = true;
};

struct FdCheckReport {
    std::vector<FdCheckRow> rows;
    double worst_relative_error = 0.0;  // over conclusive rows
    int sampled_nodes = 0;
    bool clamped = false;  // fewer free nodes than requested samples
};

struct FdCheckOptions {
    int samples = 10;
    double eps_rel = 1e-6;  // of the local edge length
    std::uint64_t seed = 12345;
};

/// Central finite differences of the reduced cost against the adjoint shape
/// gradient at randomly sampled free nodes. The project's central oracle.
FdCheckReport fd_gradient_check(const Mesh& mesh, const MaterialTable& materials,
                                const DriveSpec& drive, const StateOptions& state_options,
                                const AdjointOptions& adjoint_options,
                                const FdCheckOptions& options);

}  // namespace emshape
