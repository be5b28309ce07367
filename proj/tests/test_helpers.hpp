#pragma once

#include <sstream>
#include <string>

#include "emshape/config.hpp"

namespace emshape::testing {

/// Smallest valid mesh: one CCW triangle, one plain region, no boundaries.
inline Mesh tiny_triangle_mesh() {
    Mesh mesh;
    mesh.nodes = {{0, 0}, {1, 0}, {0, 1}};
    mesh.triangles = {{{0, 1, 2}, 1}};
    mesh.region_table[1] = {RegionRole::IronRotor, 0, Phase::A, 1};
    mesh.validate();
    return mesh;
}

/// Structured unit-square triangulation, all boundary edges Dirichlet
/// (tagged outer), single plain region.
inline Mesh unit_square_mesh(int divisions) {
    Mesh mesh;
    const int n = divisions + 1;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            mesh.nodes.push_back({static_cast<double>(i) / divisions,
                                  static_cast<double>(j) / divisions});
    auto id = [n](int i, int j) { return j * n + i; };
    for (int j = 0; j < divisions; ++j)
        for (int i = 0; i < divisions; ++i) {
            mesh.triangles.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}, 1});
            mesh.triangles.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}, 1});
        }
    for (int i = 0; i < divisions; ++i) {
        mesh.boundary_edges.push_back({id(i, 0), id(i + 1, 0), 1});
        mesh.boundary_edges.push_back({id(i, divisions), id(i + 1, divisions), 1});
        mesh.boundary_edges.push_back({id(0, i), id(0, i + 1), 1});
        mesh.boundary_edges.push_back({id(divisions, i), id(divisions, i + 1), 1});
    }
    mesh.region_table[1] = {RegionRole::IronRotor, 0, Phase::A, 1};
    mesh.boundary_table[1] = BoundaryRole::Outer;
    mesh.validate();
    return mesh;
}

/// Uniform linear material for plain test meshes.
inline MaterialTable uniform_materials(const Mesh& mesh, double nu = 1.0) {
    MaterialTable table;
    for (const auto& [id, info] : mesh.region_table) {
        MaterialRegion m;
        m.reluctivity = ReluctivityModel::linear(nu);
        if (info.role == RegionRole::Magnet) m.sigma = 1.0;
        table.regions[id] = m;
    }
    return table;
}

/// Configuration text for the small full-annulus machine used by the
/// gradient-oracle tests: sigma > 0 in the magnet blocks, three-phase
/// stator, a few hundred nodes.
inline std::string disk_config_text(bool brauer_iron, double lambda1, double lambda2, int steps,
                                    double element_size = 0.01) {
    std::ostringstream out;
    out << "[mesh]\n"
        << "sector = full\n"
        << "pole_pairs = 1\n"
        << "shaft_radius = 0.02\n"
        << "rotor_outer_radius = 0.05\n"
        << "stator_inner_radius = 0.058\n"
        << "stator_outer_radius = 0.09\n"
        << "element_size = " << element_size << "\n"
        << "magnet_inner_frac = 0.4\n"
        << "magnet_outer_frac = 0.8\n"
        << "magnet_angle_frac = 0.45\n"
        << "pocket_angle_frac = 0.18\n"
        << "[materials]\n"
        << "iron_model = " << (brauer_iron ? "brauer" : "linear") << "\n"
        << "iron_nu = 795.7747\n"
        << "magnet_sigma = 625000\n"
        << "magnet_remanence = 1.1\n"
        << "axial_length = 0.1\n"
        << "coil_turns = 100\n"
        << "[drive]\n"
        << "rpm = 1500\n"
        << "steps_per_period = " << steps << "\n"
        << "peak_current = 10\n"
        << "[cost]\n"
        << "lambda1 = " << lambda1 << "\n"
        << "lambda2 = " << lambda2 << "\n"
        << "[solver]\n"
        << "newton_tol = 1e-12\n";
    return out.str();
}

struct TestRig {
    Mesh mesh;
    MaterialTable materials;
    DriveSpec drive;
    StateOptions state;
    AdjointOptions adjoint;
    FdCheckOptions fd;
};

inline TestRig make_rig(const std::string& config_text) {
    const RunConfig config = RunConfig::parse_string(config_text);
    TestRig rig;
    rig.mesh = config.make_mesh();
    rig.materials = config.make_materials(rig.mesh);
    rig.drive = config.make_drive();
    rig.state = config.make_state_options();
    rig.adjoint = config.make_adjoint_options(rig.mesh);
    rig.fd = config.make_fd_options();
    return rig;
}

}  // namespace emshape::testing
