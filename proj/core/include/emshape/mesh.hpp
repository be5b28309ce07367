#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "emshape/geometry.hpp"

namespace emshape {

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RegionRole {
    IronRotor,
    IronStator,
    AirRotor,
    AirStator,
    AirgapRotor,
    AirgapStator,
    Magnet,
    Coil,
};

enum class Phase { A, B, C };

struct RegionInfo {
    RegionRole role = RegionRole::AirRotor;
    int index = 0;        // magnet(k) / coil(k)
    Phase phase = Phase::A;
    int polarity = +1;    // coil winding direction
};

enum class BoundaryRole {
    Outer,
    Shaft,
    PeriodicA,
    PeriodicB,
    InterfaceRotor,
    InterfaceStator,
};

/// Sector symmetry of the model. Antiperiodic sectors flip the sign of
/// identified values on the side pairing and on interface wrap-around.
enum class Symmetry { Full, Periodic, Antiperiodic };

struct Triangle {
    std::array<int, 3> v = {0, 0, 0};
    int region = 0;
};

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    int tag = 0;
};

/// Matching rotor/stator interface rings, each sorted by angle. For sector
/// meshes the vertex at the far side angle is excluded: it is the periodic
/// image of slot 0 and is reached through the side pairing instead.
struct InterfaceRings {
    std::vector<int> rotor;
    std::vector<int> stator;
    double radius = 0.0;
    double slot_angle = 0.0;  // angular spacing between consecutive vertices

    int vertex_count() const { return static_cast<int>(rotor.size()); }
};

struct QualityReport {
    double min_quality = 1.0;
    int min_element = -1;
    int inverted_count = 0;
};

/// Triangulation with region and boundary tags. Immutable by convention once
/// validated; advect returns a fresh mesh.
struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<Triangle> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    std::map<int, RegionInfo> region_table;
    std::map<int, BoundaryRole> boundary_table;
    Symmetry symmetry = Symmetry::Full;
    double sector_angle = 0.0;  // 2*pi for full models

    const RegionInfo& region(int id) const;
    bool has_interface() const;

    /// Fix orientation, then check the structural invariants. Throws
    /// MeshError naming the violated invariant.
    void validate();

    /// Interface rings sorted by angle, validated as equispaced on a common
    /// circle with matching vertex counts.
    InterfaceRings interface_rings() const;
};

struct ConstraintPair {
    int master = 0;
    int slave = 0;
    double sign = 1.0;

    bool operator==(const ConstraintPair&) const = default;
};

/// Dirichlet set plus flattened master-slave identifications: no slave
/// appears as a master, and chains (side pairing into interface pairing)
/// are resolved to their root.
struct ConstraintMap {
    std::vector<int> dirichlet;         // sorted node indices, value pinned to 0
    std::vector<ConstraintPair> pairs;  // sorted by slave index
    int locked_shift = 0;               // interface shift, reduced mod V

    bool operator==(const ConstraintMap&) const = default;
};

enum class SectorFraction { Full = 1, Quarter = 4, Eighth = 8 };

/// Parameters for the structured machine template. Magnet and air-pocket
/// cutouts are polar-aligned blocks snapped to the mapped grid; one magnet
/// per pole with alternating radial magnetization.
struct TemplateParams {
    SectorFraction sector = SectorFraction::Full;
    int pole_pairs = 1;
    double shaft_radius = 0.02;
    double rotor_outer_radius = 0.05;
    double stator_inner_radius = 0.055;
    double stator_outer_radius = 0.09;
    double element_size = 0.004;
    int steps_per_period = 1;   // interface vertex count is made compatible
    int interface_vertices = 0; // 0 = derive from element_size

    bool with_magnets = true;
    double magnet_inner_frac = 0.55;   // radial band, fraction of rotor span
    double magnet_outer_frac = 0.75;
    double magnet_angle_frac = 0.45;   // fraction of the pole pitch
    double pocket_angle_frac = 0.12;   // each side pocket, fraction of pole pitch

    int slots_per_pole_per_phase = 1;  // 0 = solid stator, no coils
    double slot_depth_frac = 0.45;     // fraction of the stator span
    double slot_fill_frac = 0.6;       // angular fill of each slot pitch
};

Mesh load_mesh(const std::string& path);
Mesh load_mesh(std::istream& in, const std::string& label = "<stream>");
void save_mesh(const Mesh& mesh, const std::string& path);
void save_mesh(const Mesh& mesh, std::ostream& out);

Mesh generate_template(const TemplateParams& params);

/// Dirichlet on outer and shaft boundaries, side pairing for sector models,
/// and the locked-step interface identification at integer shift k. Pure
/// re-identification of DOFs; no node moves. k may exceed V: each full wrap
/// past the sector flips the sign once in antiperiodic models.
ConstraintMap build_constraints(const Mesh& mesh, int shift);

QualityReport quality(const Mesh& mesh);

/// New mesh with nodes x + t * theta(x); connectivity and tags unchanged.
Mesh advect(const Mesh& mesh, const std::vector<Vec2>& theta, double t);

/// Connected components (edge adjacency) of the magnet-region triangles.
std::vector<std::vector<int>> magnet_components(const Mesh& mesh);

std::string role_name(RegionRole role);
std::string role_name(BoundaryRole role);

}  // namespace emshape
