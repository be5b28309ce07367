#include <doctest.h>

#include <cmath>
#include <set>

#include "test_helpers.hpp"

using namespace emshape;

namespace {

Mesh gap_machine(double element_size, int interface_vertices = 0) {
    TemplateParams params;
    params.sector = SectorFraction::Full;
    params.pole_pairs = 1;
    params.with_magnets = false;
    params.slots_per_pole_per_phase = 0;
    params.element_size = element_size;
    params.interface_vertices = interface_vertices;
    return generate_template(params);
}

Mesh two_magnet_mesh() {
    // two square two-triangle magnet blocks plus an iron triangle between;
    // nodes 0-3 belong to block one, 4-7 to block two
    Mesh mesh;
    mesh.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {3, 0}, {4, 0}, {4, 1}, {3, 1}, {2, 1}};
    mesh.triangles = {{{0, 1, 2}, 1}, {{0, 2, 3}, 1},
                      {{4, 5, 6}, 2}, {{4, 6, 7}, 2},
                      {{1, 4, 8}, 3}};
    mesh.region_table[1] = {RegionRole::Magnet, 0, Phase::A, 1};
    mesh.region_table[2] = {RegionRole::Magnet, 1, Phase::A, 1};
    mesh.region_table[3] = {RegionRole::IronRotor, 0, Phase::A, 1};
    mesh.validate();
    return mesh;
}

MaterialTable magnet_materials(const Mesh& mesh, double sigma) {
    MaterialTable table = emshape::testing::uniform_materials(mesh, 1.0);
    for (const auto& [id, info] : mesh.region_table)
        if (info.role == RegionRole::Magnet) table.regions[id].sigma = sigma;
    return table;
}

}  // namespace

TEST_CASE("eddy_density: stationary, constant-shift and hand-mean cases") {
    const Mesh mesh = two_magnet_mesh();
    const MaterialTable materials = magnet_materials(mesh, 2.0);
    const double tau = 0.5;
    Vector u0 = Vector::Zero(9), u1 = Vector::Zero(9);

    SUBCASE("no field change means no eddy current") {
        u0.setRandom();
        const EddyField field = eddy_density(u0, u0, mesh, materials, tau);
        for (double j : field.density) CHECK(j == 0.0);
        for (double j : field.corrected) CHECK(j == 0.0);
    }
    SUBCASE("a constant shift is removed by the zero-mean correction") {
        for (int n : {0, 1, 2, 3}) u1[n] = 0.7;  // nodes of magnet block one only
        const EddyField field = eddy_density(u1, u0, mesh, materials, tau);
        CHECK(field.density[0] == doctest::Approx(-2.0 * 0.7 / tau));
        CHECK(field.corrected[0] == doctest::Approx(0.0));
        CHECK(field.corrected[1] == doctest::Approx(0.0));
        CHECK(field.density[2] == 0.0);
    }
    SUBCASE("two equal-area elements split the difference") {
        Mesh pair;
        pair.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        pair.triangles = {{{0, 1, 2}, 1}, {{0, 2, 3}, 1}};
        pair.region_table[1] = {RegionRole::Magnet, 0, Phase::A, 1};
        pair.validate();
        const MaterialTable mats = magnet_materials(pair, 1.0);
        // elementwise mean deltas a and b
        Vector prev = Vector::Zero(4), next(4);
        next << 0.6, 0.6, 0.6, 1.8;  // element 0 avg = 0.6, element 1 avg = 1.0
        const EddyField field = eddy_density(next, prev, pair, mats, 1.0);
        const double a = -0.6, b = -1.0;  // J values, sigma/tau = 1
        CHECK(field.corrected[0] == doctest::Approx((a - b) / 2.0));
        CHECK(field.corrected[1] == doctest::Approx((b - a) / 2.0));
    }
}

TEST_CASE("per-component zero mean holds to 1e-10 relative") {
    const Mesh mesh = two_magnet_mesh();
    const MaterialTable materials = magnet_materials(mesh, 3.0);
    Vector u0(9), u1(9);
    u0.setZero();
    u1 << 0.3, -0.8, 0.45, 1.2, 0.1, -0.7, 0.9, -0.2, 0.6;
    const EddyField field = eddy_density(u1, u0, mesh, materials, 0.25);

    for (const auto& component : field.components) {
        double weighted = 0.0, scale = 0.0;
        for (int t : component) {
            const auto& tri = mesh.triangles[t];
            const double area =
                signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
            weighted += field.corrected[t] * area;
            scale += std::abs(field.density[t]) * area;
        }
        CHECK(std::abs(weighted) <= 1e-10 * scale);
    }
}

TEST_CASE("power_step: closed forms, shift invariance, homogeneity") {
    const Mesh mesh = two_magnet_mesh();
    const MaterialTable materials = magnet_materials(mesh, 2.0);
    const double tau = 0.5;
    Vector u0 = Vector::Zero(9), u1(9);
    u1 << 0.3, -0.8, 0.45, 1.2, 0.1, -0.7, 0.9, -0.2, 0.0;

    SUBCASE("stationary trajectory dissipates nothing") {
        CHECK(power_step(u1, u1, mesh, materials, tau) == 0.0);
    }
    SUBCASE("quadratic homogeneity in the field increment") {
        const double base = power_step(u0, u1, mesh, materials, tau);
        CHECK(base > 0.0);
        CHECK(power_step(u0, 3.0 * u1, mesh, materials, tau) ==
              doctest::Approx(9.0 * base).epsilon(1e-12));
    }
    SUBCASE("per-component constant shifts leave the power unchanged") {
        const double base = power_step(u0, u1, mesh, materials, tau);
        Vector shifted = u1;
        for (int n : {0, 1, 2, 3}) shifted[n] += 5.0;  // all nodes of block one
        CHECK(power_step(u0, shifted, mesh, materials, tau) ==
              doctest::Approx(base).epsilon(1e-10));
    }
    SUBCASE("single element power is lz c^2 A / sigma") {
        Mesh single;
        single.nodes = {{0, 0}, {1, 0}, {0, 1}};
        single.triangles = {{{0, 1, 2}, 1}};
        single.region_table[1] = {RegionRole::Magnet, 0, Phase::A, 1};
        single.validate();
        MaterialTable mats = magnet_materials(single, 4.0);
        mats.axial_length = 2.5;
        // mean mode Global: a single element keeps its own mean, so force a
        // two-element comparison instead through the raw J value
        Vector prev = Vector::Zero(3), next(3);
        next << 0.5, 0.5, 0.5;
        const EddyField field = eddy_density(next, prev, single, mats, 0.25);
        // single component: the correction removes everything
        CHECK(field.corrected[0] == doctest::Approx(0.0));
        CHECK(power_step(prev, next, single, mats, 0.25) == doctest::Approx(0.0));
    }
}

TEST_CASE("average power and torque reductions") {
    const Mesh mesh = two_magnet_mesh();
    const MaterialTable materials = magnet_materials(mesh, 2.0);

    StateTrajectory traj;
    traj.tau = 0.5;
    Vector u(9);
    u << 0.3, -0.8, 0.45, 1.2, 0.1, -0.7, 0.9, -0.2, 0.0;
    traj.states = {Vector::Zero(9), u, 2.0 * u, 3.0 * u};  // equal increments
    traj.stats.resize(4);

    const double p1 = power_step(traj.states[0], traj.states[1], mesh, materials, traj.tau);
    CHECK(average_power(traj, mesh, materials) == doctest::Approx(p1));
}

TEST_CASE("arkkio integrand vanishes identically for radial gradients") {
    const Vec2 x{0.6, -1.1};
    for (double s : {1.0, -2.5, 0.3}) {
        const double value = arkkio_integrand(s * x, x);
        CHECK(std::abs(value) <= 1e-14 * std::max(1.0, x.norm2() * s * s * x.norm()));
    }
}

TEST_CASE("torque: radially symmetric nodal field gives a null") {
    const Mesh mesh = gap_machine(0.006);
    MaterialTable materials = emshape::testing::uniform_materials(mesh, kNu0);
    materials.axial_length = 0.1;
    const TorqueSpec spec{0.05, 0.055};

    Vector u(mesh.nodes.size());
    double grad_scale = 0.0;
    for (size_t n = 0; n < mesh.nodes.size(); ++n) {
        const double r = mesh.nodes[n].norm();
        u[n] = std::sin(40.0 * r);
        grad_scale = std::max(grad_scale, std::abs(40.0 * std::cos(40.0 * r)));
    }
    double gap_area = 0.0;
    for (const auto& tri : mesh.triangles) {
        const RegionRole role = mesh.region(tri.region).role;
        if (role == RegionRole::AirgapRotor || role == RegionRole::AirgapStator)
            gap_area +=
                signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
    }
    const double scale = kNu0 * materials.axial_length * grad_scale * grad_scale * gap_area /
                         (spec.outer_radius - spec.inner_radius);
    const double torque = torque_step(u, mesh, materials, spec);
    CHECK(std::abs(torque) <= 1e-3 * scale);
}

TEST_CASE("torque: uniform gradient on the full annulus vanishes under refinement") {
    // the perfectly symmetric template cancels this integral to round-off at
    // any resolution, so jiggle the gap nodes tangentially (circles intact,
    // annulus geometry exact) to expose the genuine quadrature convergence
    MaterialTable dummy;
    dummy.axial_length = 0.1;
    const TorqueSpec spec{0.05, 0.055};

    auto torque_for = [&](double h, int v) {
        Mesh mesh = gap_machine(h, v);
        const double slot = mesh.interface_rings().slot_angle;
        for (size_t n = 0; n < mesh.nodes.size(); ++n) {
            const double r = mesh.nodes[n].norm();
            if (r < 0.0499 || r > 0.0551) continue;
            if (std::abs(r - 0.0525) < 1e-6) continue;  // keep the interface rings equispaced
            const double noise =
                std::sin(static_cast<double>(n) * 12.9898) * 43758.5453;
            const double jig = (noise - std::floor(noise) - 0.5) * 0.5 * slot;
            mesh.nodes[n] = rotate(mesh.nodes[n], jig);
        }
        REQUIRE(quality(mesh).inverted_count == 0);
        Vector u(mesh.nodes.size());
        for (size_t n = 0; n < mesh.nodes.size(); ++n)
            u[n] = 0.7 * mesh.nodes[n].x - 0.4 * mesh.nodes[n].y;
        return std::abs(torque_step(u, mesh, dummy, spec));
    };
    const double coarse = torque_for(0.008, 40);
    const double fine = torque_for(0.004, 80);
    CHECK(fine <= 0.3 * coarse);
}

TEST_CASE("torque matches the closed-form Maxwell stress value within 1%") {
    const Mesh mesh = gap_machine(0.002);
    MaterialTable materials;
    materials.axial_length = 0.1;

    // u = A r^p cos(p phi) + D r^-p sin(p phi): torque -2 pi nu0 L p^2 A D
    const int p = 2;
    const double a_coef = 1.0, d_coef = 2e-6;
    Vector u(mesh.nodes.size());
    for (size_t n = 0; n < mesh.nodes.size(); ++n) {
        const double r = mesh.nodes[n].norm();
        const double phi = mesh.nodes[n].angle();
        u[n] = a_coef * std::pow(r, p) * std::cos(p * phi) +
               d_coef * std::pow(r, -p) * std::sin(p * phi);
    }
    const double exact = -2.0 * M_PI * kNu0 * materials.axial_length * p * p * a_coef * d_coef;

    const double full_gap = torque_step(u, mesh, materials, TorqueSpec{0.05, 0.055});
    CHECK(std::abs(full_gap - exact) <= 0.01 * std::abs(exact));

    SUBCASE("two different admissible annuli agree within 2%") {
        const double inner_band = torque_step(u, mesh, materials, TorqueSpec{0.05, 0.0525});
        const double outer_band = torque_step(u, mesh, materials, TorqueSpec{0.0525, 0.055});
        CHECK(std::abs(inner_band - outer_band) <= 0.02 * std::abs(exact));
    }
}

TEST_CASE("torque errors: empty annulus and bad radii") {
    const Mesh mesh = testing::tiny_triangle_mesh();
    MaterialTable materials;
    Vector u = Vector::Zero(3);
    CHECK_THROWS_AS(torque_step(u, mesh, materials, TorqueSpec{0.5, 1.0}), MaterialError);
    CHECK_THROWS_AS(torque_step(u, mesh, materials, TorqueSpec{1.0, 0.5}), MaterialError);
}

TEST_CASE("cost breakdown honors the weights") {
    const Mesh mesh = two_magnet_mesh();
    const MaterialTable materials = magnet_materials(mesh, 2.0);
    StateTrajectory traj;
    traj.tau = 0.5;
    Vector u(9);
    u << 0.3, -0.8, 0.45, 1.2, 0.1, -0.7, 0.9, -0.2, 0.0;
    traj.states = {Vector::Zero(9), u};
    traj.stats.resize(2);

    CostOptions options;
    options.lambda1 = 1.0;
    options.lambda2 = 0.0;
    const CostBreakdown power_only = cost(traj, mesh, materials, options);
    CHECK(power_only.cost == doctest::Approx(power_only.average_power));
    CHECK(power_only.average_power > 0.0);

    options.lambda1 = 0.0;
    options.lambda2 = 1.0;  // no torque annulus configured: T contributes 0
    const CostBreakdown torque_only = cost(traj, mesh, materials, options);
    CHECK(torque_only.cost == doctest::Approx(-torque_only.average_torque));

    options.lambda1 = 1e5;
    options.lambda2 = 1e-4;
    const CostBreakdown weighted = cost(traj, mesh, materials, options);
    CHECK(weighted.cost == doctest::Approx(1e5 * weighted.average_power -
                                           1e-4 * weighted.average_torque));
}

TEST_CASE("global mean mode pools all magnet segments") {
    const Mesh mesh = two_magnet_mesh();
    const MaterialTable materials = magnet_materials(mesh, 2.0);
    Vector u0 = Vector::Zero(9), u1(9);
    u1 << 0.3, -0.8, 0.45, 1.2, 0.1, -0.7, 0.9, -0.2, 0.0;

    const EddyField global = eddy_density(u1, u0, mesh, materials, 0.5, MeanMode::Global);
    REQUIRE(global.components.size() == 1);
    REQUIRE(global.component_mean.size() == 1);

    // the pooled mean removes only the global average: total weighted sum is
    // zero, the per-block sums generally are not
    double total = 0.0, block_one = 0.0, scale = 0.0;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        if (mesh.region(tri.region).role != RegionRole::Magnet) continue;
        const double area =
            signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
        total += global.corrected[t] * area;
        scale += std::abs(global.density[t]) * area;
        if (tri.region == 1) block_one += global.corrected[t] * area;
    }
    CHECK(std::abs(total) <= 1e-10 * scale);
    CHECK(std::abs(block_one) > 1e-6 * scale);

    const double per_component = power_step(u0, u1, mesh, materials, 0.5);
    const double pooled = power_step(u0, u1, mesh, materials, 0.5, MeanMode::Global);
    CHECK(pooled > per_component);  // removing less of the mean leaves more power
}

TEST_CASE("literal torque sum is N times the mean") {
    const Mesh mesh = gap_machine(0.008, 40);
    MaterialTable materials = emshape::testing::uniform_materials(mesh, kNu0);
    materials.axial_length = 0.1;
    const TorqueSpec spec{0.05, 0.055};

    StateTrajectory traj;
    traj.tau = 0.1;
    Vector u(mesh.nodes.size());
    for (size_t n = 0; n < mesh.nodes.size(); ++n) {
        const double r = mesh.nodes[n].norm(), phi = mesh.nodes[n].angle();
        u[n] = r * r * std::cos(2.0 * phi) + 1e-5 / (r * r) * std::sin(2.0 * phi);
    }
    traj.states = {0.5 * u, u, 2.0 * u, 0.25 * u};
    traj.stats.resize(4);

    const double mean = average_torque(traj, mesh, materials, spec, false);
    const double sum = average_torque(traj, mesh, materials, spec, true);
    CHECK(sum == doctest::Approx(3.0 * mean).epsilon(1e-12));
}
