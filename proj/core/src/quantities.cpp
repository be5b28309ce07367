#include "emshape/quantities.hpp"

#include <cmath>

namespace emshape {

namespace {

double element_area(const Mesh& mesh, const Triangle& tri) {
    return signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
}

}  // namespace

EddyField eddy_density(const Vector& u_step, const Vector& u_prev, const Mesh& mesh,
                       const MaterialTable& materials, double tau, MeanMode mode) {
    if (tau <= 0.0) throw MaterialError("time step must be positive");
    EddyField field;
    field.density.assign(mesh.triangles.size(), 0.0);
    field.corrected.assign(mesh.triangles.size(), 0.0);

    auto segments = magnet_components(mesh);
    if (mode == MeanMode::Global && !segments.empty()) {
        std::vector<int> all;
        for (auto& s : segments) all.insert(all.end(), s.begin(), s.end());
        segments = {std::move(all)};
    }
    field.components = std::move(segments);
    field.component_mean.assign(field.components.size(), 0.0);

    for (size_t c = 0; c < field.components.size(); ++c) {
        double weighted = 0.0, total_area = 0.0;
        for (int t : field.components[c]) {
            const auto& tri = mesh.triangles[t];
            const double delta = ((u_step[tri.v[0]] - u_prev[tri.v[0]]) +
                                  (u_step[tri.v[1]] - u_prev[tri.v[1]]) +
                                  (u_step[tri.v[2]] - u_prev[tri.v[2]])) /
                                 3.0;
            const double j_e = -materials.at(tri.region).sigma * delta / tau;
            field.density[t] = j_e;
            const double area = element_area(mesh, tri);
            weighted += j_e * area;
            total_area += area;
        }
        const double mean = total_area > 0.0 ? weighted / total_area : 0.0;
        field.component_mean[c] = mean;
        for (int t : field.components[c]) field.corrected[t] = field.density[t] - mean;
    }
    return field;
}

double power_step(const Vector& u_prev, const Vector& u_step, const Mesh& mesh,
                  const MaterialTable& materials, double tau, MeanMode mode) {
    const EddyField field = eddy_density(u_step, u_prev, mesh, materials, tau, mode);
    double power = 0.0;
    for (const auto& component : field.components) {
        for (int t : component) {
            const auto& tri = mesh.triangles[t];
            const double sigma = materials.at(tri.region).sigma;
            power += materials.axial_length * field.corrected[t] * field.corrected[t] *
                     element_area(mesh, tri) / sigma;
        }
    }
    return power;
}

double average_power(const StateTrajectory& traj, const Mesh& mesh,
                     const MaterialTable& materials, MeanMode mode) {
    const int steps = traj.step_count();
    if (steps < 1) throw MaterialError("trajectory has no time steps");
    double sum = 0.0;
    for (int j = 1; j <= steps; ++j)
        sum += power_step(traj.states[j - 1], traj.states[j], mesh, materials, traj.tau, mode);
    return sum / steps;
}

double arkkio_integrand(const Vec2& grad, const Vec2& x) {
    const double r = x.norm();
    if (r == 0.0) return 0.0;
    return (x.x * x.y * (grad.x * grad.x - grad.y * grad.y) +
            (x.y * x.y - x.x * x.x) * grad.x * grad.y) /
           r;
}

double torque_step(const Vector& u_step, const Mesh& mesh, const MaterialTable& materials,
                   const TorqueSpec& spec) {
    if (!(spec.inner_radius > 0.0 && spec.inner_radius < spec.outer_radius))
        throw MaterialError("torque annulus radii must satisfy 0 < r_r < r_s");

    const Quadrature& rule = Quadrature::midpoints();
    double integral = 0.0;
    bool any = false;
    for (const auto& tri : mesh.triangles) {
        const RegionRole role = mesh.region(tri.region).role;
        if (role != RegionRole::AirgapRotor && role != RegionRole::AirgapStator) continue;
        const Vec2 p0 = mesh.nodes[tri.v[0]], p1 = mesh.nodes[tri.v[1]], p2 = mesh.nodes[tri.v[2]];
        const Vec2 centroid = (p0 + p1 + p2) / 3.0;
        const double r = centroid.norm();
        if (r < spec.inner_radius || r > spec.outer_radius) continue;
        any = true;

        const TriGeometry geom(p0, p1, p2);
        const Vec2 grad = geom.gradient({u_step[tri.v[0]], u_step[tri.v[1]], u_step[tri.v[2]]});
        // Q varies inside the element while grad u does not
        for (const auto& q : rule.points) {
            const Vec2 x = q.bary[0] * p0 + q.bary[1] * p1 + q.bary[2] * p2;
            integral += q.weight * geom.area * arkkio_integrand(grad, x);
        }
    }
    if (!any) throw MaterialError("torque annulus selects no airgap elements");
    return kNu0 * materials.axial_length / (spec.outer_radius - spec.inner_radius) * integral;
}

double average_torque(const StateTrajectory& traj, const Mesh& mesh,
                      const MaterialTable& materials, const TorqueSpec& spec, bool literal_sum) {
    const int steps = traj.step_count();
    if (steps < 1) throw MaterialError("trajectory has no time steps");
    double sum = 0.0;
    for (int j = 1; j <= steps; ++j) sum += torque_step(traj.states[j], mesh, materials, spec);
    return literal_sum ? sum : sum / steps;
}

CostBreakdown cost(const StateTrajectory& traj, const Mesh& mesh, const MaterialTable& materials,
                   const CostOptions& options) {
    if (options.lambda1 < 0.0 || options.lambda2 < 0.0)
        throw MaterialError("cost weights must be non-negative");
    const int steps = traj.step_count();
    CostBreakdown out;
    out.lambda1 = options.lambda1;
    out.lambda2 = options.lambda2;
    out.power_steps.reserve(steps);
    out.torque_steps.reserve(steps);

    const bool want_torque = options.torque.outer_radius > 0.0;
    double p_sum = 0.0, t_sum = 0.0;
    for (int j = 1; j <= steps; ++j) {
        const double p = power_step(traj.states[j - 1], traj.states[j], mesh, materials, traj.tau,
                                    options.mean_mode);
        out.power_steps.push_back(p);
        p_sum += p;
        double t = 0.0;
        if (want_torque) t = torque_step(traj.states[j], mesh, materials, options.torque);
        out.torque_steps.push_back(t);
        t_sum += t;
    }
    out.average_power = p_sum / steps;
    out.average_torque = options.literal_torque_sum ? t_sum : t_sum / steps;
    out.cost = options.lambda1 * out.average_power - options.lambda2 * out.average_torque;
    return out;
}

}  // namespace emshape
