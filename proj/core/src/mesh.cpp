#include "emshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace emshape {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool rotor_side_role(RegionRole role) {
    switch (role) {
        case RegionRole::IronRotor:
        case RegionRole::AirRotor:
        case RegionRole::AirgapRotor:
        case RegionRole::Magnet:
            return true;
        default:
            return false;
    }
}

/// Union-find over node identifications carrying a relative sign.
/// value(node) = sign(node) * value(root). Contradictory cycles pin the
/// whole class to zero.
class SignedUnionFind {
public:
    explicit SignedUnionFind(int n) : parent_(n), sign_(n, 1.0), pinned_(n, false) {
        for (int i = 0; i < n; ++i) parent_[i] = i;
    }

    std::pair<int, double> find(int a) {
        if (parent_[a] == a) return {a, 1.0};
        auto [root, s] = find(parent_[a]);
        parent_[a] = root;
        sign_[a] *= s;
        return {root, sign_[a]};
    }

    void unite(int a, int b, double sign) {
        auto [ra, sa] = find(a);
        auto [rb, sb] = find(b);
        if (ra == rb) {
            if (sa * sign != sb) pinned_[ra] = true;
            return;
        }
        // keep the smaller index as root so masters are deterministic
        if (ra > rb) {
            std::swap(ra, rb);
            std::swap(sa, sb);
            sign = sign == 0.0 ? 0.0 : 1.0 / sign;  // invert relation a<->b
        }
        // value(b) = sb * value(rb); want value(b) = (sign relation) ...
        // relation: value(slave chain) handled via: value(a) = sa*value(ra),
        // value(b) = sb*value(rb), constraint value(b) = sign*value(a)
        // => value(rb) = (sign * sa / sb) * value(ra)
        parent_[rb] = ra;
        sign_[rb] = sign * sa / sb;
        pinned_[ra] = pinned_[ra] || pinned_[rb];
    }

    void pin(int a) { pinned_[find(a).first] = true; }
    bool is_pinned(int a) { return pinned_[find(a).first]; }

private:
    std::vector<int> parent_;
    std::vector<double> sign_;
    std::vector<bool> pinned_;
};

struct SidePairing {
    std::vector<std::pair<int, int>> pairs;  // (side A node, side B node)
    double sector_angle = kTwoPi;
};

/// Match periodic side nodes by (radius, rotor/stator part). Both parts touch
/// both sides, and the interface circle carries a coincident node pair on each
/// side, so radius alone is ambiguous.
SidePairing match_sides(const Mesh& mesh) {
    std::vector<bool> on_a(mesh.nodes.size(), false), on_b(mesh.nodes.size(), false);
    for (const auto& e : mesh.boundary_edges) {
        const auto role = mesh.boundary_table.at(e.tag);
        if (role == BoundaryRole::PeriodicA) on_a[e.a] = on_a[e.b] = true;
        if (role == BoundaryRole::PeriodicB) on_b[e.a] = on_b[e.b] = true;
    }

    std::vector<bool> rotor_part(mesh.nodes.size(), false);
    for (const auto& t : mesh.triangles) {
        if (rotor_side_role(mesh.region(t.region).role))
            for (int v : t.v) rotor_part[v] = true;
    }

    struct SideNode {
        double radius;
        bool rotor;
        int node;
    };
    std::vector<SideNode> a_nodes, b_nodes;
    for (size_t n = 0; n < mesh.nodes.size(); ++n) {
        if (on_a[n]) a_nodes.push_back({mesh.nodes[n].norm(), rotor_part[n], static_cast<int>(n)});
        if (on_b[n]) b_nodes.push_back({mesh.nodes[n].norm(), rotor_part[n], static_cast<int>(n)});
    }
    if (a_nodes.size() != b_nodes.size())
        throw MeshError("periodic side node counts differ: " + std::to_string(a_nodes.size()) +
                        " vs " + std::to_string(b_nodes.size()));

    auto by_key = [](const SideNode& l, const SideNode& r) {
        if (l.rotor != r.rotor) return l.rotor > r.rotor;
        return l.radius < r.radius;
    };
    std::sort(a_nodes.begin(), a_nodes.end(), by_key);
    std::sort(b_nodes.begin(), b_nodes.end(), by_key);

    SidePairing out;
    double r_max = 0.0;
    for (const auto& s : a_nodes) r_max = std::max(r_max, s.radius);
    const double tol = 1e-9 * std::max(r_max, 1e-30);

    double angle_sum = 0.0;
    int angle_count = 0;
    for (size_t i = 0; i < a_nodes.size(); ++i) {
        if (a_nodes[i].rotor != b_nodes[i].rotor ||
            std::abs(a_nodes[i].radius - b_nodes[i].radius) > tol)
            throw MeshError("periodic sides are not radius-matched");
        out.pairs.emplace_back(a_nodes[i].node, b_nodes[i].node);
        if (a_nodes[i].radius > tol) {
            double da = mesh.nodes[b_nodes[i].node].angle() - mesh.nodes[a_nodes[i].node].angle();
            while (da <= 0) da += kTwoPi;
            while (da > kTwoPi) da -= kTwoPi;
            angle_sum += da;
            ++angle_count;
        }
    }
    if (angle_count > 0) out.sector_angle = angle_sum / angle_count;
    return out;
}

}  // namespace

const RegionInfo& Mesh::region(int id) const {
    auto it = region_table.find(id);
    if (it == region_table.end())
        throw MeshError("triangle references unknown region id " + std::to_string(id));
    return it->second;
}

bool Mesh::has_interface() const {
    for (const auto& e : boundary_edges) {
        auto it = boundary_table.find(e.tag);
        if (it != boundary_table.end() && (it->second == BoundaryRole::InterfaceRotor ||
                                           it->second == BoundaryRole::InterfaceStator))
            return true;
    }
    return false;
}

void Mesh::validate() {
    const int n = static_cast<int>(nodes.size());
    for (size_t t = 0; t < triangles.size(); ++t) {
        auto& tri = triangles[t];
        for (int v : tri.v)
            if (v < 0 || v >= n)
                throw MeshError("triangle " + std::to_string(t) + " has node index out of range");
        double area = signed_area(nodes[tri.v[0]], nodes[tri.v[1]], nodes[tri.v[2]]);
        if (area < 0.0) {
            std::swap(tri.v[1], tri.v[2]);
            area = -area;
        }
        if (area == 0.0)
            throw MeshError("triangle " + std::to_string(t) + " is degenerate (zero area)");
        region(tri.region);  // throws when missing from the table
    }
    for (size_t i = 0; i < boundary_edges.size(); ++i) {
        const auto& e = boundary_edges[i];
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
            throw MeshError("boundary edge " + std::to_string(i) + " has node index out of range");
        if (boundary_table.find(e.tag) == boundary_table.end())
            throw MeshError("boundary edge " + std::to_string(i) + " references unknown tag " +
                            std::to_string(e.tag));
    }
    if (symmetry == Symmetry::Full) {
        sector_angle = kTwoPi;
    } else {
        sector_angle = match_sides(*this).sector_angle;
    }
    if (has_interface()) interface_rings();  // throws when rings are inconsistent
}

InterfaceRings Mesh::interface_rings() const {
    std::set<int> rotor_set, stator_set;
    for (const auto& e : boundary_edges) {
        const auto role = boundary_table.at(e.tag);
        if (role == BoundaryRole::InterfaceRotor) {
            rotor_set.insert(e.a);
            rotor_set.insert(e.b);
        } else if (role == BoundaryRole::InterfaceStator) {
            stator_set.insert(e.a);
            stator_set.insert(e.b);
        }
    }
    if (rotor_set.empty() || stator_set.empty())
        throw MeshError("mesh has no rotor/stator interface rings");

    auto sorted_by_angle = [&](const std::set<int>& s) {
        std::vector<int> v(s.begin(), s.end());
        std::sort(v.begin(), v.end(), [&](int l, int r) {
            return nodes[l].angle() < nodes[r].angle();
        });
        return v;
    };
    InterfaceRings rings;
    rings.rotor = sorted_by_angle(rotor_set);
    rings.stator = sorted_by_angle(stator_set);

    if (rings.rotor.size() != rings.stator.size())
        throw MeshError("interface vertex counts differ: " + std::to_string(rings.rotor.size()) +
                        " vs " + std::to_string(rings.stator.size()));

    // Sector rings carry the far-side endpoint as an extra vertex; it is the
    // periodic image of slot 0, not an identification slot of its own.
    if (symmetry != Symmetry::Full) {
        rings.rotor.pop_back();
        rings.stator.pop_back();
    }
    const int count = rings.vertex_count();
    if (count < 2) throw MeshError("interface rings need at least 2 vertices");

    double radius_sum = 0.0;
    for (int v : rings.rotor) radius_sum += nodes[v].norm();
    for (int v : rings.stator) radius_sum += nodes[v].norm();
    rings.radius = radius_sum / (2.0 * count);
    const double rtol = 1e-7 * rings.radius;
    for (int v : rings.rotor)
        if (std::abs(nodes[v].norm() - rings.radius) > rtol)
            throw MeshError("interface_rotor vertices are not on a common circle");
    for (int v : rings.stator)
        if (std::abs(nodes[v].norm() - rings.radius) > rtol)
            throw MeshError("interface_stator vertices are not on a common circle");

    rings.slot_angle = sector_angle / count;
    const double atol = 1e-7;
    for (int i = 0; i < count; ++i) {
        const double a0 = nodes[rings.rotor[0]].angle();
        double want = a0 + i * rings.slot_angle;
        auto wrap = [](double a) {
            while (a > std::numbers::pi) a -= kTwoPi;
            while (a <= -std::numbers::pi) a += kTwoPi;
            return a;
        };
        if (std::abs(wrap(nodes[rings.rotor[i]].angle() - want)) > atol)
            throw MeshError("interface_rotor vertices are not equispaced in angle");
        if (std::abs(wrap(nodes[rings.stator[i]].angle() - want)) > atol)
            throw MeshError("interface rings are not angle-aligned");
    }
    return rings;
}

ConstraintMap build_constraints(const Mesh& mesh, int shift) {
    if (shift < 0) throw MeshError("negative interface shift");
    const int n = static_cast<int>(mesh.nodes.size());
    SignedUnionFind uf(n);

    std::vector<bool> dirichlet(n, false);
    for (const auto& e : mesh.boundary_edges) {
        const auto role = mesh.boundary_table.at(e.tag);
        if (role == BoundaryRole::Outer || role == BoundaryRole::Shaft)
            dirichlet[e.a] = dirichlet[e.b] = true;
    }

    const bool anti = mesh.symmetry == Symmetry::Antiperiodic;
    if (mesh.symmetry != Symmetry::Full) {
        const double side_sign = anti ? -1.0 : 1.0;
        for (auto [a, b] : match_sides(mesh).pairs) uf.unite(a, b, side_sign);
    }

    int locked = 0;
    if (mesh.has_interface()) {
        const InterfaceRings rings = mesh.interface_rings();
        const int count = rings.vertex_count();
        locked = shift % count;
        for (int i = 0; i < count; ++i) {
            const int wraps = (i + shift) / count;
            const int rotor_slot = (i + shift) % count;
            const double sign = (anti && wraps % 2 != 0) ? -1.0 : 1.0;
            // value(stator i) = sign * value(rotor (i+k) mod V)
            uf.unite(rings.rotor[rotor_slot], rings.stator[i], sign);
        }
    } else if (shift != 0) {
        throw MeshError("nonzero shift on a mesh without interface rings");
    }

    ConstraintMap map;
    map.locked_shift = locked;
    std::vector<char> class_dirichlet(n, 0);
    for (int i = 0; i < n; ++i)
        if (dirichlet[i] || uf.is_pinned(i)) class_dirichlet[uf.find(i).first] = 1;
    for (int i = 0; i < n; ++i) {
        auto [root, sign] = uf.find(i);
        if (class_dirichlet[root]) {
            map.dirichlet.push_back(i);
        } else if (root != i) {
            map.pairs.push_back({root, i, sign});
        }
    }
    return map;
}

QualityReport quality(const Mesh& mesh) {
    QualityReport report;
    report.min_quality = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double q =
            triangle_quality(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
        if (q < report.min_quality) {
            report.min_quality = q;
            report.min_element = static_cast<int>(t);
        }
        if (q <= 0.0) ++report.inverted_count;
    }
    if (mesh.triangles.empty()) report.min_quality = 1.0;
    return report;
}

Mesh advect(const Mesh& mesh, const std::vector<Vec2>& theta, double t) {
    if (theta.size() != mesh.nodes.size())
        throw MeshError("advection field size does not match node count");
    Mesh out = mesh;
    if (t != 0.0)
        for (size_t i = 0; i < out.nodes.size(); ++i) out.nodes[i] += t * theta[i];
    return out;
}

std::vector<std::vector<int>> magnet_components(const Mesh& mesh) {
    std::vector<int> magnet_tris;
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
        if (mesh.region(mesh.triangles[t].region).role == RegionRole::Magnet)
            magnet_tris.push_back(static_cast<int>(t));

    const int m = static_cast<int>(magnet_tris.size());
    std::vector<int> parent(m);
    for (int i = 0; i < m; ++i) parent[i] = i;
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };

    std::map<std::pair<int, int>, int> edge_owner;
    for (int i = 0; i < m; ++i) {
        const auto& tri = mesh.triangles[magnet_tris[i]];
        for (int e = 0; e < 3; ++e) {
            int a = tri.v[e], b = tri.v[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            auto [it, inserted] = edge_owner.try_emplace({a, b}, i);
            if (!inserted) {
                int ra = find(it->second), rb = find(i);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }

    std::map<int, std::vector<int>> by_root;
    for (int i = 0; i < m; ++i) by_root[find(i)].push_back(magnet_tris[i]);
    std::vector<std::vector<int>> components;
    for (auto& [root, tris] : by_root) components.push_back(std::move(tris));
    return components;
}

std::string role_name(RegionRole role) {
    switch (role) {
        case RegionRole::IronRotor: return "iron_rotor";
        case RegionRole::IronStator: return "iron_stator";
        case RegionRole::AirRotor: return "air_rotor";
        case RegionRole::AirStator: return "air_stator";
        case RegionRole::AirgapRotor: return "airgap_rotor";
        case RegionRole::AirgapStator: return "airgap_stator";
        case RegionRole::Magnet: return "magnet";
        case RegionRole::Coil: return "coil";
    }
    return "?";
}

std::string role_name(BoundaryRole role) {
    switch (role) {
        case BoundaryRole::Outer: return "outer";
        case BoundaryRole::Shaft: return "shaft";
        case BoundaryRole::PeriodicA: return "periodic_a";
        case BoundaryRole::PeriodicB: return "periodic_b";
        case BoundaryRole::InterfaceRotor: return "interface_rotor";
        case BoundaryRole::InterfaceStator: return "interface_stator";
    }
    return "?";
}

}  // namespace emshape
