#include <cmath>
#include <numbers>
#include <numeric>

#include "emshape/mesh.hpp"

namespace emshape {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// fixed region ids used by the template
constexpr int kIronRotor = 1;
constexpr int kAirRotor = 2;
constexpr int kAirgapRotor = 3;
constexpr int kAirgapStator = 4;
constexpr int kIronStator = 5;
constexpr int kMagnetBase = 10;  // magnet pole P -> 10 + P
constexpr int kCoilBase = 40;    // slot s -> 40 + s

// boundary tags
constexpr int kShaftTag = 1;
constexpr int kOuterTag = 2;
constexpr int kSideATag = 3;
constexpr int kSideBTag = 4;
constexpr int kIfaceRotorTag = 5;
constexpr int kIfaceStatorTag = 6;

/// Radial lines covering [segments[0].first, segments.back().second], each
/// segment uniformly divided. The spacing follows the target size but never
/// exceeds twice the local arc length, which bounds the cell aspect ratio.
std::vector<double> radial_lines(const std::vector<std::pair<double, double>>& segments,
                                 double h, double angle_step) {
    std::vector<double> lines;
    lines.push_back(segments.front().first);
    for (const auto& [a, b] : segments) {
        const double arc = angle_step * 0.5 * (a + b);
        const double target = std::min(h, 2.0 * arc);
        const int n = std::max(1, static_cast<int>(std::lround((b - a) / target)));
        for (int i = 1; i <= n; ++i) lines.push_back(a + (b - a) * i / n);
    }
    return lines;
}

struct GridPart {
    std::vector<double> radii;  // radial lines, ascending
    int first_node = 0;         // node id of (ring 0, column 0)
};

}  // namespace

Mesh generate_template(const TemplateParams& p) {
    const int div = static_cast<int>(p.sector);
    const double sector_angle = kTwoPi / div;

    if (!(0.0 < p.shaft_radius && p.shaft_radius < p.rotor_outer_radius &&
          p.rotor_outer_radius < p.stator_inner_radius &&
          p.stator_inner_radius < p.stator_outer_radius))
        throw MeshError("template radii must satisfy 0 < shaft < rotor outer < stator inner < stator outer");
    if (p.element_size <= 0.0) throw MeshError("element size must be positive");
    if (p.pole_pairs < 1) throw MeshError("pole pair count must be >= 1");
    if (p.steps_per_period < 1) throw MeshError("steps per period must be >= 1");

    if ((2 * p.pole_pairs) % div != 0)
        throw MeshError("sector fraction does not divide the pole count");
    const int poles = 2 * p.pole_pairs / div;
    const Symmetry symmetry = div == 1          ? Symmetry::Full
                              : (poles % 2 != 0) ? Symmetry::Antiperiodic
                                                 : Symmetry::Periodic;

    if (p.with_magnets) {
        if (!(0.0 < p.magnet_inner_frac && p.magnet_inner_frac < p.magnet_outer_frac &&
              p.magnet_outer_frac < 1.0))
            throw MeshError("magnet radial fractions must satisfy 0 < inner < outer < 1");
        if (p.magnet_angle_frac <= 0.0 || p.pocket_angle_frac < 0.0 ||
            p.magnet_angle_frac + 2.0 * p.pocket_angle_frac >= 1.0)
            throw MeshError("magnet and pocket cutouts overlap the pole boundary");
    }
    if (p.slots_per_pole_per_phase > 0 &&
        (p.slot_depth_frac <= 0.0 || p.slot_depth_frac >= 1.0 || p.slot_fill_frac <= 0.0 ||
         p.slot_fill_frac > 1.0))
        throw MeshError("slot fractions out of range");

    // Interface vertex count: divisible by N, and the per-step shift
    // V * div / (pole_pairs * N) must be a whole number of slots.
    const long pn = static_cast<long>(p.pole_pairs) * p.steps_per_period;
    const long shift_div = pn / std::gcd(pn, static_cast<long>(div));
    const long required = std::lcm(static_cast<long>(p.steps_per_period), shift_div);
    const double r_gap_mid = 0.5 * (p.rotor_outer_radius + p.stator_inner_radius);
    int V = p.interface_vertices;
    if (V == 0) {
        // arc spacing no coarser than the airgap width keeps the thin gap
        // bands from degrading into slivers
        const double arc_target =
            std::min(p.element_size, p.stator_inner_radius - p.rotor_outer_radius);
        const long suggested =
            std::max<long>(8, std::lround(sector_angle * r_gap_mid / arc_target));
        V = static_cast<int>(((suggested + required - 1) / required) * required);
    } else {
        if (V % p.steps_per_period != 0 || (static_cast<long>(V) * div) % pn != 0)
            throw MeshError("interface count not divisible: V=" + std::to_string(V) +
                            " with N=" + std::to_string(p.steps_per_period) +
                            " pole_pairs=" + std::to_string(p.pole_pairs));
    }

    const int n_cols = V;                                      // angular cells
    const int n_angular = symmetry == Symmetry::Full ? V : V + 1;  // angular node lines
    const double d_angle = sector_angle / n_cols;

    // radial node lines, rotor part up to the gap middle, stator part above
    const double rotor_span = p.rotor_outer_radius - p.shaft_radius;
    const double rm_in = p.shaft_radius + p.magnet_inner_frac * rotor_span;
    const double rm_out = p.shaft_radius + p.magnet_outer_frac * rotor_span;
    std::vector<std::pair<double, double>> rotor_segments;
    if (p.with_magnets) {
        rotor_segments = {{p.shaft_radius, rm_in}, {rm_in, rm_out}, {rm_out, p.rotor_outer_radius}};
    } else {
        rotor_segments = {{p.shaft_radius, p.rotor_outer_radius}};
    }
    rotor_segments.push_back({p.rotor_outer_radius, r_gap_mid});

    const double stator_span = p.stator_outer_radius - p.stator_inner_radius;
    const double r_slot_top = p.stator_inner_radius + p.slot_depth_frac * stator_span;
    std::vector<std::pair<double, double>> stator_segments;
    stator_segments.push_back({r_gap_mid, p.stator_inner_radius});
    if (p.slots_per_pole_per_phase > 0) {
        stator_segments.push_back({p.stator_inner_radius, r_slot_top});
        stator_segments.push_back({r_slot_top, p.stator_outer_radius});
    } else {
        stator_segments.push_back({p.stator_inner_radius, p.stator_outer_radius});
    }

    GridPart rotor{radial_lines(rotor_segments, p.element_size, sector_angle / V), 0};
    GridPart stator{radial_lines(stator_segments, p.element_size, sector_angle / V), 0};

    Mesh mesh;
    mesh.symmetry = symmetry;
    mesh.sector_angle = sector_angle;

    auto emit_part_nodes = [&](GridPart& part) {
        part.first_node = static_cast<int>(mesh.nodes.size());
        for (double r : part.radii)
            for (int j = 0; j < n_angular; ++j) {
                const double a = j * d_angle;
                mesh.nodes.push_back({r * std::cos(a), r * std::sin(a)});
            }
    };
    emit_part_nodes(rotor);
    emit_part_nodes(stator);

    auto node_id = [&](const GridPart& part, int ring, int col) {
        return part.first_node + ring * n_angular + (col % n_angular);
    };

    // cell classification
    const double pole_pitch = sector_angle / poles;
    const double magnet_half = 0.5 * p.magnet_angle_frac * pole_pitch;
    const double pocket_width = p.pocket_angle_frac * pole_pitch;
    const int slots = p.slots_per_pole_per_phase > 0 ? 3 * p.slots_per_pole_per_phase * poles : 0;
    const double slot_pitch = slots > 0 ? sector_angle / slots : 0.0;

    auto rotor_region = [&](double r_mid_cell, double a_mid_cell) -> int {
        if (r_mid_cell >= p.rotor_outer_radius) return kAirgapRotor;
        if (p.with_magnets && r_mid_cell > rm_in && r_mid_cell < rm_out) {
            const int pole = std::min(poles - 1, static_cast<int>(a_mid_cell / pole_pitch));
            const double center = (pole + 0.5) * pole_pitch;
            const double off = std::abs(a_mid_cell - center);
            if (off < magnet_half) return kMagnetBase + pole;
            if (off < magnet_half + pocket_width) return kAirRotor;
        }
        return kIronRotor;
    };
    auto stator_region = [&](double r_mid_cell, double a_mid_cell) -> int {
        if (r_mid_cell <= p.stator_inner_radius) return kAirgapStator;
        if (slots > 0 && r_mid_cell < r_slot_top) {
            const int slot = std::min(slots - 1, static_cast<int>(a_mid_cell / slot_pitch));
            const double center = (slot + 0.5) * slot_pitch;
            if (std::abs(a_mid_cell - center) < 0.5 * p.slot_fill_frac * slot_pitch)
                return kCoilBase + slot;
        }
        return kIronStator;
    };

    auto emit_part_cells = [&](const GridPart& part, bool is_rotor) {
        const int n_rings = static_cast<int>(part.radii.size());
        for (int i = 0; i + 1 < n_rings; ++i) {
            const double r_mid_cell = 0.5 * (part.radii[i] + part.radii[i + 1]);
            for (int j = 0; j < n_cols; ++j) {
                const double a_mid_cell = (j + 0.5) * d_angle;
                const int region = is_rotor ? rotor_region(r_mid_cell, a_mid_cell)
                                            : stator_region(r_mid_cell, a_mid_cell);
                const int n00 = node_id(part, i, j);
                const int n01 = node_id(part, i, j + 1);
                const int n10 = node_id(part, i + 1, j);
                const int n11 = node_id(part, i + 1, j + 1);
                if ((i + j) % 2 == 0) {
                    mesh.triangles.push_back({{n00, n10, n11}, region});
                    mesh.triangles.push_back({{n00, n11, n01}, region});
                } else {
                    mesh.triangles.push_back({{n00, n10, n01}, region});
                    mesh.triangles.push_back({{n10, n11, n01}, region});
                }
            }
        }
    };
    emit_part_cells(rotor, true);
    emit_part_cells(stator, false);

    // region table for the ids actually used
    std::map<int, RegionInfo> table;
    table[kIronRotor] = {RegionRole::IronRotor, 0, Phase::A, 1};
    table[kAirgapRotor] = {RegionRole::AirgapRotor, 0, Phase::A, 1};
    table[kAirgapStator] = {RegionRole::AirgapStator, 0, Phase::A, 1};
    table[kIronStator] = {RegionRole::IronStator, 0, Phase::A, 1};
    if (p.with_magnets && p.pocket_angle_frac > 0.0)
        table[kAirRotor] = {RegionRole::AirRotor, 0, Phase::A, 1};
    if (p.with_magnets)
        for (int pole = 0; pole < poles; ++pole)
            table[kMagnetBase + pole] = {RegionRole::Magnet, pole, Phase::A, 1};
    // 60-degree phase belts: A+ C- B+ A- C+ B-
    static constexpr Phase kBeltPhase[6] = {Phase::A, Phase::C, Phase::B,
                                            Phase::A, Phase::C, Phase::B};
    static constexpr int kBeltPolarity[6] = {+1, -1, +1, -1, +1, -1};
    for (int s = 0; s < slots; ++s) {
        const int belt = (s / p.slots_per_pole_per_phase) % 6;
        table[kCoilBase + s] = {RegionRole::Coil, s, kBeltPhase[belt], kBeltPolarity[belt]};
    }
    for (const auto& t : mesh.triangles)
        if (table.find(t.region) == table.end())
            throw MeshError("template produced unknown region id");  // unreachable
    // drop unused optional entries
    std::map<int, bool> used;
    for (const auto& t : mesh.triangles) used[t.region] = true;
    for (const auto& [id, info] : table)
        if (used.count(id)) mesh.region_table[id] = info;

    // boundary edges
    mesh.boundary_table[kShaftTag] = BoundaryRole::Shaft;
    mesh.boundary_table[kOuterTag] = BoundaryRole::Outer;
    mesh.boundary_table[kIfaceRotorTag] = BoundaryRole::InterfaceRotor;
    mesh.boundary_table[kIfaceStatorTag] = BoundaryRole::InterfaceStator;
    if (symmetry != Symmetry::Full) {
        mesh.boundary_table[kSideATag] = BoundaryRole::PeriodicA;
        mesh.boundary_table[kSideBTag] = BoundaryRole::PeriodicB;
    }

    const int rotor_rings = static_cast<int>(rotor.radii.size());
    const int stator_rings = static_cast<int>(stator.radii.size());
    for (int j = 0; j < n_cols; ++j) {
        mesh.boundary_edges.push_back({node_id(rotor, 0, j), node_id(rotor, 0, j + 1), kShaftTag});
        mesh.boundary_edges.push_back({node_id(rotor, rotor_rings - 1, j),
                                       node_id(rotor, rotor_rings - 1, j + 1), kIfaceRotorTag});
        mesh.boundary_edges.push_back(
            {node_id(stator, 0, j), node_id(stator, 0, j + 1), kIfaceStatorTag});
        mesh.boundary_edges.push_back({node_id(stator, stator_rings - 1, j),
                                       node_id(stator, stator_rings - 1, j + 1), kOuterTag});
    }
    if (symmetry != Symmetry::Full) {
        for (int i = 0; i + 1 < rotor_rings; ++i) {
            mesh.boundary_edges.push_back(
                {node_id(rotor, i, 0), node_id(rotor, i + 1, 0), kSideATag});
            mesh.boundary_edges.push_back(
                {node_id(rotor, i, n_cols), node_id(rotor, i + 1, n_cols), kSideBTag});
        }
        for (int i = 0; i + 1 < stator_rings; ++i) {
            mesh.boundary_edges.push_back(
                {node_id(stator, i, 0), node_id(stator, i + 1, 0), kSideATag});
            mesh.boundary_edges.push_back(
                {node_id(stator, i, n_cols), node_id(stator, i + 1, n_cols), kSideBTag});
        }
    }

    mesh.validate();
    return mesh;
}

}  // namespace emshape
