#include "emshape/adjoint.hpp"

#include <string>

namespace emshape {

namespace {

double element_area(const Mesh& mesh, const Triangle& tri) {
    return signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
}

Vec2 arkkio_q_times(const Vec2& x, const Vec2& g) {
    const double r = x.norm();
    if (r == 0.0) return {0.0, 0.0};
    const double d = 0.5 * (x.y * x.y - x.x * x.x);
    return Vec2{x.x * x.y * g.x + d * g.y, d * g.x - x.x * x.y * g.y} / r;
}

}  // namespace

Vector power_derivative_load(const EddyField& field, const Mesh& mesh,
                             const MaterialTable& materials, double tau, bool wrt_newer) {
    Vector load = Vector::Zero(mesh.nodes.size());
    const double lz = materials.axial_length;
    const double side = wrt_newer ? 1.0 : -1.0;

    for (size_t c = 0; c < field.components.size(); ++c) {
        double group_area = 0.0;
        double correction = 0.0;  // 2 lz sum J~ A / sigma, zero for uniform sigma
        for (int t : field.components[c]) {
            const auto& tri = mesh.triangles[t];
            const double area = element_area(mesh, tri);
            group_area += area;
            correction += 2.0 * lz * field.corrected[t] * area / materials.at(tri.region).sigma;
        }
        for (int t : field.components[c]) {
            const auto& tri = mesh.triangles[t];
            const double area = element_area(mesh, tri);
            const double sigma = materials.at(tri.region).sigma;
            const double coef =
                side * (-(2.0 * lz / tau) * field.corrected[t] * area +
                        correction / (group_area * tau) * sigma * area);
            for (int a = 0; a < 3; ++a) load[tri.v[a]] += coef / 3.0;
        }
    }
    return load;
}

Vector power_rhs(int step, const StateTrajectory& traj, const Mesh& mesh,
                 const MaterialTable& materials, const AdjointOptions& options) {
    const int steps = traj.step_count();
    if (step < 1 || step > steps) throw SolverError("power_rhs step out of range");
    Vector rhs = Vector::Zero(mesh.nodes.size());
    if (options.cost.lambda1 == 0.0) return rhs;

    const EddyField field_i = eddy_density(traj.states[step], traj.states[step - 1], mesh,
                                           materials, traj.tau, options.cost.mean_mode);
    rhs = power_derivative_load(field_i, mesh, materials, traj.tau, true);
    if (step < steps) {
        const EddyField field_next = eddy_density(traj.states[step + 1], traj.states[step], mesh,
                                                  materials, traj.tau, options.cost.mean_mode);
        rhs += power_derivative_load(field_next, mesh, materials, traj.tau, false);
    }
    return (-options.cost.lambda1 / steps) * rhs;
}

Vector torque_rhs(int step, const Vector& u_step, const Mesh& mesh,
                  const MaterialTable& materials, const AdjointOptions& options,
                  int step_count) {
    (void)step;  // T_i depends on u_i only; kept for sweep symmetry
    Vector rhs = Vector::Zero(mesh.nodes.size());
    if (options.cost.lambda2 == 0.0) return rhs;
    const TorqueSpec& spec = options.cost.torque;
    if (!(spec.inner_radius > 0.0 && spec.inner_radius < spec.outer_radius))
        throw MaterialError("torque annulus radii must satisfy 0 < r_r < r_s");

    const Quadrature& rule = Quadrature::midpoints();
    const double scale = kNu0 * materials.axial_length / (spec.outer_radius - spec.inner_radius);
    for (const auto& tri : mesh.triangles) {
        const RegionRole role = mesh.region(tri.region).role;
        if (role != RegionRole::AirgapRotor && role != RegionRole::AirgapStator) continue;
        const Vec2 p0 = mesh.nodes[tri.v[0]], p1 = mesh.nodes[tri.v[1]], p2 = mesh.nodes[tri.v[2]];
        const Vec2 centroid = (p0 + p1 + p2) / 3.0;
        const double r = centroid.norm();
        if (r < spec.inner_radius || r > spec.outer_radius) continue;

        const TriGeometry geom(p0, p1, p2);
        const Vec2 grad = geom.gradient({u_step[tri.v[0]], u_step[tri.v[1]], u_step[tri.v[2]]});
        for (const auto& q : rule.points) {
            const Vec2 x = q.bary[0] * p0 + q.bary[1] * p1 + q.bary[2] * p2;
            const Vec2 qg = arkkio_q_times(x, grad);  // Q symmetric: d(g^T Q g) = 2 Q g . dg
            for (int a = 0; a < 3; ++a)
                rhs[tri.v[a]] += scale * q.weight * geom.area * 2.0 * qg.dot(geom.grad_basis(a));
        }
    }
    const double factor = options.cost.literal_torque_sum ? 1.0 : 1.0 / step_count;
    return options.cost.lambda2 * factor * rhs;
}

Vector adjoint_step(int step, const Vector& v_next, const StateTrajectory& traj, const Mesh& mesh,
                    const MaterialTable& materials, const DriveSpec& drive,
                    const AdjointOptions& options, double* residual) {
    const int k_step = shift_per_step(mesh, drive);
    const ConstraintMap constraints = build_constraints(mesh, step * k_step);
    const DofMap dofs(static_cast<int>(mesh.nodes.size()), constraints);

    const SparseMatrix mass = assemble_mass_sigma(mesh, materials, traj.tau);
    SparseMatrix lhs = assemble_operator(mesh, materials, traj.states[step]).tangent;
    lhs += mass;

    Vector rhs_full = power_rhs(step, traj, mesh, materials, options);
    rhs_full +=
        torque_rhs(step, traj.states[step], mesh, materials, options, traj.step_count());
    rhs_full += mass * v_next;

    SparseSystem system;
    system.dofs = dofs;
    system.matrix = dofs.reduce_matrix(lhs);
    system.rhs = dofs.reduce(rhs_full);
    try {
        Vector v = reduce_and_solve(system, options.linear_tol);
        if (residual != nullptr) {
            const double rn = system.rhs.norm();
            *residual = rn == 0.0 ? 0.0
                                  : (system.rhs - system.matrix * dofs.restrict_values(v)).norm() / rn;
        }
        return v;
    } catch (const SolverError& err) {
        throw SolverError("adjoint step " + std::to_string(step) + ": " + err.what(),
                          err.achieved_residual);
    }
}

Vector initial_adjoint(const StateTrajectory& traj, const Vector& v_1, const Mesh& mesh,
                       const MaterialTable& materials, const DriveSpec& drive,
                       const AdjointOptions& options, double* residual) {
    const ConstraintMap constraints = build_constraints(mesh, 0);
    const DofMap dofs(static_cast<int>(mesh.nodes.size()), constraints);

    const SparseMatrix lhs = assemble_operator(mesh, materials, traj.states[0]).tangent;
    const SparseMatrix mass = assemble_mass_sigma(mesh, materials, traj.tau);

    Vector rhs_full = Vector::Zero(mesh.nodes.size());
    if (options.cost.lambda1 != 0.0) {
        const EddyField field_1 = eddy_density(traj.states[1], traj.states[0], mesh, materials,
                                               traj.tau, options.cost.mean_mode);
        // dP_1/du_0 carries the older-state sign
        rhs_full = (-options.cost.lambda1 / traj.step_count()) *
                   power_derivative_load(field_1, mesh, materials, traj.tau, false);
    }
    rhs_full += mass * v_1;
    (void)drive;

    SparseSystem system;
    system.dofs = dofs;
    system.matrix = dofs.reduce_matrix(lhs);
    system.rhs = dofs.reduce(rhs_full);
    try {
        Vector v = reduce_and_solve(system, options.linear_tol);
        if (residual != nullptr) {
            const double rn = system.rhs.norm();
            *residual = rn == 0.0 ? 0.0
                                  : (system.rhs - system.matrix * dofs.restrict_values(v)).norm() / rn;
        }
        return v;
    } catch (const SolverError& err) {
        throw SolverError(std::string("initial adjoint: ") + err.what(), err.achieved_residual);
    }
}

AdjointTrajectory solve_adjoint(const StateTrajectory& traj, const Mesh& mesh,
                                const MaterialTable& materials, const DriveSpec& drive,
                                const AdjointOptions& options) {
    const int steps = traj.step_count();
    const int n = static_cast<int>(mesh.nodes.size());

    AdjointTrajectory adj;
    adj.costates.assign(steps + 1, Vector::Zero(n));
    adj.solve_residuals.assign(steps + 1, 0.0);

    Vector v_next = Vector::Zero(n);  // v_{N+1} = 0: no functional looks past the horizon
    for (int i = steps; i >= 1; --i) {
        adj.costates[i] = adjoint_step(i, v_next, traj, mesh, materials, drive, options,
                                       &adj.solve_residuals[i]);
        v_next = adj.costates[i];
    }
    if (options.include_initial && options.initial_is_magnetostatic)
        adj.costates[0] = initial_adjoint(traj, adj.costates[1], mesh, materials, drive, options,
                                          &adj.solve_residuals[0]);
    return adj;
}

}  // namespace emshape
