#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "test_helpers.hpp"

using namespace emshape;

namespace {

/// Resolve a node through the flattened constraint map: (root, sign), or
/// root = -1 for Dirichlet nodes.
std::pair<int, double> resolve(const ConstraintMap& map, int node) {
    for (int d : map.dirichlet)
        if (d == node) return {-1, 0.0};
    for (const auto& p : map.pairs)
        if (p.slave == node) return {p.master, p.sign};
    return {node, 1.0};
}

TemplateParams eighth_params(int interface_vertices) {
    TemplateParams params;
    params.sector = SectorFraction::Eighth;
    params.pole_pairs = 4;
    params.steps_per_period = 1;
    params.interface_vertices = interface_vertices;
    params.element_size = 0.01;
    return params;
}

}  // namespace

TEST_CASE("load_mesh accepts the smallest valid mesh") {
    std::istringstream in(
        "emsh 1\n"
        "nodes 3\n0 0\n1 0\n0 1\n"
        "triangles 1\n0 1 2 1\n"
        "edges 0\n"
        "regions 1\n1 iron_rotor\n"
        "boundaries 0\n");
    const Mesh mesh = load_mesh(in);
    CHECK(mesh.nodes.size() == 3);
    CHECK(mesh.triangles.size() == 1);
    CHECK(signed_area(mesh.nodes[0], mesh.nodes[1], mesh.nodes[2]) > 0.0);
}

TEST_CASE("load_mesh fixes clockwise triangles") {
    std::istringstream ccw(
        "emsh 1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 1\nedges 0\n"
        "regions 1\n1 iron_rotor\nboundaries 0\n");
    std::istringstream cw(
        "emsh 1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1 1\nedges 0\n"
        "regions 1\n1 iron_rotor\nboundaries 0\n");
    const Mesh a = load_mesh(ccw);
    const Mesh b = load_mesh(cw);
    CHECK(a.triangles[0].v == b.triangles[0].v);
}

TEST_CASE("load_mesh reports parse errors with line numbers") {
    std::istringstream in("emsh 1\nnodes 1\nnot_a_number 0\n");
    CHECK_THROWS_WITH_AS(load_mesh(in, "bad.emsh"), doctest::Contains("bad.emsh:3"), MeshError);
}

TEST_CASE("load_mesh rejects unknown roles") {
    std::istringstream in(
        "emsh 1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 1\nedges 0\n"
        "regions 1\n1 plutonium\nboundaries 0\n");
    CHECK_THROWS_WITH_AS(load_mesh(in), doctest::Contains("unknown region role"), MeshError);
}

TEST_CASE("mesh save/load round trip") {
    const Mesh mesh = generate_template(eighth_params(8));
    std::ostringstream out;
    save_mesh(mesh, out);
    std::istringstream in(out.str());
    const Mesh back = load_mesh(in);
    REQUIRE(back.nodes.size() == mesh.nodes.size());
    REQUIRE(back.triangles.size() == mesh.triangles.size());
    CHECK(back.symmetry == mesh.symmetry);
    for (size_t i = 0; i < mesh.nodes.size(); ++i) {
        CHECK(back.nodes[i].x == mesh.nodes[i].x);
        CHECK(back.nodes[i].y == mesh.nodes[i].y);
    }
    CHECK(back.region_table.size() == mesh.region_table.size());
}

TEST_CASE("interface ring count mismatch is a validation error") {
    Mesh mesh = generate_template(eighth_params(8));
    // drop two adjacent stator interface edges so one ring vertex disappears
    std::vector<BoundaryEdge> kept;
    int dropped = 0;
    for (const auto& e : mesh.boundary_edges) {
        if (mesh.boundary_table.at(e.tag) == BoundaryRole::InterfaceStator && dropped < 2) {
            ++dropped;
            continue;
        }
        kept.push_back(e);
    }
    mesh.boundary_edges = kept;
    CHECK_THROWS_WITH_AS(mesh.validate(), doctest::Contains("differ"), MeshError);
}

TEST_CASE("template full annulus without cutouts has decent quality") {
    TemplateParams params;
    params.sector = SectorFraction::Full;
    params.pole_pairs = 1;
    params.with_magnets = false;
    params.slots_per_pole_per_phase = 0;
    params.element_size = 0.01;
    const Mesh mesh = generate_template(params);
    const QualityReport report = quality(mesh);
    CHECK(report.inverted_count == 0);
    CHECK(report.min_quality > 0.4);
}

TEST_CASE("template eighth sector carries one magnet per pole") {
    const Mesh mesh = generate_template(eighth_params(16));
    int magnet_regions = 0;
    for (const auto& [id, info] : mesh.region_table)
        if (info.role == RegionRole::Magnet) ++magnet_regions;
    CHECK(magnet_regions == 1);  // one pole in an eighth of an 8-pole machine
    CHECK(mesh.symmetry == Symmetry::Antiperiodic);
    int magnet_triangles = 0;
    for (const auto& t : mesh.triangles)
        if (mesh.region(t.region).role == RegionRole::Magnet) ++magnet_triangles;
    CHECK(magnet_triangles > 0);
}

TEST_CASE("template rejects interface counts that do not divide") {
    TemplateParams params;
    params.sector = SectorFraction::Full;
    params.pole_pairs = 1;
    params.steps_per_period = 16;
    params.interface_vertices = 40;
    CHECK_THROWS_WITH_AS(generate_template(params), doctest::Contains("not divisible"),
                         MeshError);
}

TEST_CASE("build_constraints: zero shift is the identity pairing") {
    TemplateParams params;
    params.sector = SectorFraction::Full;
    params.pole_pairs = 1;
    params.with_magnets = false;
    params.slots_per_pole_per_phase = 0;
    params.element_size = 0.012;
    const Mesh mesh = generate_template(params);
    const InterfaceRings rings = mesh.interface_rings();
    const ConstraintMap map = build_constraints(mesh, 0);

    for (int i = 0; i < rings.vertex_count(); ++i) {
        const auto rotor = resolve(map, rings.rotor[i]);
        const auto stator = resolve(map, rings.stator[i]);
        CHECK(rotor.first == stator.first);
        CHECK(rotor.second == stator.second);
    }

    SUBCASE("shift V reproduces shift 0 exactly") {
        CHECK(build_constraints(mesh, rings.vertex_count()) == map);
    }
}

TEST_CASE("build_constraints: eighth sector wrap signs match the hand enumeration") {
    const Mesh mesh = generate_template(eighth_params(8));
    const InterfaceRings rings = mesh.interface_rings();
    REQUIRE(rings.vertex_count() == 8);
    const ConstraintMap map = build_constraints(mesh, 3);
    CHECK(map.locked_shift == 3);

    for (int i = 0; i < 8; ++i) {
        const int partner = (i + 3) % 8;
        const double expected_sign = (i + 3) < 8 ? 1.0 : -1.0;
        const auto stator = resolve(map, rings.stator[i]);
        const auto rotor = resolve(map, rings.rotor[partner]);
        REQUIRE(stator.first == rotor.first);
        CHECK(stator.second * rotor.second == doctest::Approx(expected_sign));
    }

    SUBCASE("antiperiodic models repeat with period 2V, not V") {
        CHECK(build_constraints(mesh, 3 + 16) == map);
        const ConstraintMap flipped = build_constraints(mesh, 3 + 8);
        CHECK(flipped.locked_shift == 3);
        CHECK_FALSE(flipped == map);
        // one full sector of extra shift flips every interface sign
        const auto stator = resolve(flipped, rings.stator[0]);
        const auto rotor = resolve(flipped, rings.rotor[3]);
        CHECK(stator.second * rotor.second == doctest::Approx(-1.0));
    }
}

TEST_CASE("quality: reference triangles") {
    Mesh mesh;
    mesh.nodes = {{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}};
    mesh.triangles = {{{0, 1, 2}, 1}};
    CHECK(quality(mesh).min_quality == doctest::Approx(1.0).epsilon(1e-12));

    Mesh right;
    right.nodes = {{0, 0}, {1, 0}, {0, 1}};
    right.triangles = {{{0, 1, 2}, 1}};
    CHECK(quality(right).min_quality == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));

    Mesh degenerate;
    degenerate.nodes = {{0, 0}, {1, 0}, {1, 0}};
    degenerate.triangles = {{{0, 1, 2}, 1}};
    const QualityReport report = quality(degenerate);
    CHECK(report.min_quality == doctest::Approx(0.0));
    CHECK(report.inverted_count == 1);
}

TEST_CASE("quality is invariant under rotation and scaling") {
    const Mesh mesh = generate_template(eighth_params(8));
    const double q0 = quality(mesh).min_quality;

    Mesh transformed = mesh;
    for (auto& p : transformed.nodes) p = rotate(p, 1.234) * 3.7;
    CHECK(quality(transformed).min_quality == doctest::Approx(q0).epsilon(1e-12));
}

TEST_CASE("advect basics") {
    const Mesh mesh = testing::tiny_triangle_mesh();
    std::vector<Vec2> theta = {{0.1, 0.2}, {-0.3, 0.05}, {0.0, -0.1}};

    SUBCASE("t = 0 is bitwise identity") {
        const Mesh same = advect(mesh, theta, 0.0);
        for (size_t i = 0; i < mesh.nodes.size(); ++i) {
            CHECK(same.nodes[i].x == mesh.nodes[i].x);
            CHECK(same.nodes[i].y == mesh.nodes[i].y);
        }
    }
    SUBCASE("constant field translates") {
        const std::vector<Vec2> c(mesh.nodes.size(), Vec2{0.25, -0.5});
        const Mesh moved = advect(mesh, c, 1.0);
        for (size_t i = 0; i < mesh.nodes.size(); ++i) {
            CHECK(moved.nodes[i].x == doctest::Approx(mesh.nodes[i].x + 0.25));
            CHECK(moved.nodes[i].y == doctest::Approx(mesh.nodes[i].y - 0.5));
        }
    }
    SUBCASE("forward then backward returns to round-off") {
        const Mesh back = advect(advect(mesh, theta, 0.37), theta, -0.37);
        for (size_t i = 0; i < mesh.nodes.size(); ++i) {
            CHECK(back.nodes[i].x ==
                  doctest::Approx(mesh.nodes[i].x).epsilon(1e-14).scale(1.0));
            CHECK(back.nodes[i].y ==
                  doctest::Approx(mesh.nodes[i].y).epsilon(1e-14).scale(1.0));
        }
    }
}

TEST_CASE("magnet_components: disjoint, single and edge-sharing blocks") {
    auto block = [](Mesh& mesh, double x0, int region, int base) {
        mesh.nodes.push_back({x0, 0});
        mesh.nodes.push_back({x0 + 1, 0});
        mesh.nodes.push_back({x0 + 1, 1});
        mesh.nodes.push_back({x0, 1});
        mesh.triangles.push_back({{base, base + 1, base + 2}, region});
        mesh.triangles.push_back({{base, base + 2, base + 3}, region});
    };

    SUBCASE("two disjoint rectangles form two components") {
        Mesh mesh;
        block(mesh, 0.0, 1, 0);
        block(mesh, 5.0, 2, 4);
        mesh.region_table[1] = {RegionRole::Magnet, 0, Phase::A, 1};
        mesh.region_table[2] = {RegionRole::Magnet, 1, Phase::A, 1};
        mesh.validate();
        CHECK(magnet_components(mesh).size() == 2);
    }
    SUBCASE("one region is one component covering its triangles") {
        Mesh mesh;
        block(mesh, 0.0, 1, 0);
        mesh.region_table[1] = {RegionRole::Magnet, 0, Phase::A, 1};
        mesh.validate();
        const auto components = magnet_components(mesh);
        REQUIRE(components.size() == 1);
        CHECK(components[0].size() == 2);
    }
    SUBCASE("two regions sharing an edge merge into one component") {
        Mesh mesh;
        mesh.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {2, 0}, {2, 1}};
        mesh.triangles = {{{0, 1, 2}, 1}, {{0, 2, 3}, 1}, {{1, 4, 5}, 2}, {{1, 5, 2}, 2}};
        mesh.region_table[1] = {RegionRole::Magnet, 0, Phase::A, 1};
        mesh.region_table[2] = {RegionRole::Magnet, 1, Phase::A, 1};
        mesh.validate();
        CHECK(magnet_components(mesh).size() == 1);
    }
}

TEST_CASE("magnet component union equals the conducting triangle set") {
    const Mesh mesh = generate_template(eighth_params(16));
    const auto components = magnet_components(mesh);
    std::map<int, int> seen;
    for (const auto& c : components)
        for (int t : c) ++seen[t];
    size_t expected = 0;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const bool is_magnet = mesh.region(mesh.triangles[t].region).role == RegionRole::Magnet;
        if (is_magnet) ++expected;
        CHECK(seen.count(static_cast<int>(t)) == (is_magnet ? 1u : 0u));
        if (seen.count(static_cast<int>(t))) CHECK(seen[static_cast<int>(t)] == 1);
    }
    size_t total = 0;
    for (const auto& c : components) total += c.size();
    CHECK(total == expected);
}

TEST_CASE("constraint maps are flattened forests") {
    // sides, interface identification and Dirichlet all interact at the
    // sector corners; the result must still resolve in a single hop
    for (int shift : {0, 3, 5, 11}) {
        const Mesh mesh = generate_template(eighth_params(8));
        const ConstraintMap map = build_constraints(mesh, shift);

        std::set<int> masters, slaves, dirichlet(map.dirichlet.begin(), map.dirichlet.end());
        for (const auto& p : map.pairs) {
            masters.insert(p.master);
            CHECK(slaves.insert(p.slave).second);  // each slave appears once
            CHECK(p.sign * p.sign == 1.0);
        }
        for (int s : slaves) {
            CHECK(masters.count(s) == 0);
            CHECK(dirichlet.count(s) == 0);
        }
        for (int m : masters) CHECK(dirichlet.count(m) == 0);
    }
}
