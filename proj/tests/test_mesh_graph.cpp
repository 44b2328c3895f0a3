#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "curveweave/graph.hpp"
#include "curveweave/mesh.hpp"

using namespace curveweave;

namespace {

// Independent side enumeration: every unordered node pair appearing as a
// triangle side, with the elements that use it.
std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>>
enumerate_sides(const Mesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>> sides;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& el = mesh.elements[e];
        for (int s = 0; s < 3; ++s) {
            std::uint32_t a = el[s], b = el[(s + 1) % 3];
            if (a > b) std::swap(a, b);
            sides[{a, b}].push_back(e);
        }
    }
    return sides;
}

std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set(const Graph& g) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const Edge& e : g.edges()) out.insert({e.u, e.v});
    return out;
}

// unit square split into two triangles along the 1-2 diagonal
Mesh two_triangle_mesh(Discretization disc) {
    Mesh m;
    m.discretization = disc;
    m.nodes = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    m.elements = {{0, 1, 2}, {1, 3, 2}};
    return m;
}

// 3x3 node grid, each of the four cells split into two triangles
Mesh grid3x3_mesh(Discretization disc) {
    Mesh m;
    m.discretization = disc;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) m.nodes.push_back({double(x), double(y)});
    for (std::uint32_t cy = 0; cy < 2; ++cy)
        for (std::uint32_t cx = 0; cx < 2; ++cx) {
            std::uint32_t a = cy * 3 + cx, b = a + 1, c = a + 3, d = a + 4;
            m.elements.push_back({a, b, c});
            m.elements.push_back({b, d, c});
        }
    return m;
}

// central triangle with a neighbor glued to each of its three sides
Mesh triforce_mesh(Discretization disc) {
    Mesh m;
    m.discretization = disc;
    m.nodes = {{0, 0}, {2, 0}, {1, 2}, {1, -1}, {2.5, 1.5}, {-0.5, 1.5}};
    m.elements = {{0, 1, 2}, {0, 1, 3}, {1, 2, 4}, {0, 2, 5}};
    return m;
}

} // namespace

TEST_CASE("structured grid graph has the five point stencil") {
    Graph g = build_grid_graph(3, 3);
    REQUIRE(g.vertex_count() == 9);
    REQUIRE(g.edge_count() == 12);
    // center node 4 touches all four axis neighbors, no diagonals
    REQUIRE(g.degree(4) == 4);
    REQUIRE(g.has_edge(4, 1));
    REQUIRE(g.has_edge(4, 3));
    REQUIRE(g.has_edge(4, 5));
    REQUIRE(g.has_edge(4, 7));
    REQUIRE_FALSE(g.has_edge(4, 0));
    REQUIRE_FALSE(g.has_edge(4, 8));
    REQUIRE(g.degree(0) == 2);

    Graph line = build_grid_graph(5, 1);
    REQUIRE(line.vertex_count() == 5);
    REQUIRE(line.edge_count() == 4);

    Graph one = build_grid_graph(1, 1);
    REQUIRE(one.vertex_count() == 1);
    REQUIRE(one.edge_count() == 0);

    REQUIRE_THROWS_AS(build_grid_graph(0, 3), std::invalid_argument);
}

TEST_CASE("continuous element graph matches independent side enumeration") {
    for (const Mesh& mesh : {two_triangle_mesh(Discretization::cg_p1),
                             grid3x3_mesh(Discretization::cg_p1),
                             triforce_mesh(Discretization::cg_p1)}) {
        Graph g = build_cg_graph(mesh);
        auto sides = enumerate_sides(mesh);
        REQUIRE(g.vertex_count() == mesh.node_count());
        REQUIRE(g.edge_count() == sides.size());
        auto edges = edge_set(g);
        for (const auto& [side, elems] : sides) REQUIRE(edges.count(side) == 1);
        for (const Edge& e : g.edges()) REQUIRE(e.w == 1.0);
    }
}

TEST_CASE("two triangle continuous mesh has five edges") {
    Graph g = build_cg_graph(two_triangle_mesh(Discretization::cg_p1));
    REQUIRE(g.vertex_count() == 4);
    REQUIRE(g.edge_count() == 5);
    REQUIRE(g.has_edge(1, 2)); // the shared diagonal appears once
}

TEST_CASE("3x3 triangulated grid has 16 unique sides") {
    Graph g = build_cg_graph(grid3x3_mesh(Discretization::cg_p1));
    REQUIRE(g.vertex_count() == 9);
    REQUIRE(g.edge_count() == 16);
}

TEST_CASE("discontinuous graph couples element corners and facing elements") {
    Mesh mesh = two_triangle_mesh(Discretization::dg_p1);
    Graph g = build_dg_graph(mesh);
    // 6 degrees of freedom; 3 edges inside each element plus a full 3x3
    // coupling across the one shared side makes the complete graph
    REQUIRE(g.vertex_count() == 6);
    REQUIRE(g.edge_count() == 15);
    for (std::uint32_t v = 0; v < 6; ++v) REQUIRE(g.degree(v) == 5);
}

TEST_CASE("discontinuous stencil against brute force side pairing") {
    for (const Mesh& mesh :
         {grid3x3_mesh(Discretization::dg_p1), triforce_mesh(Discretization::dg_p1)}) {
        Graph g = build_dg_graph(mesh);
        REQUIRE(g.vertex_count() == mesh.dg_node_count());

        std::set<std::pair<std::uint32_t, std::uint32_t>> expect;
        auto add = [&](std::uint32_t a, std::uint32_t b) {
            if (a > b) std::swap(a, b);
            expect.insert({a, b});
        };
        for (std::size_t e = 0; e < mesh.elements.size(); ++e)
            for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j)
                    add(std::uint32_t(3 * e + i), std::uint32_t(3 * e + j));
        for (const auto& [side, elems] : enumerate_sides(mesh)) {
            if (elems.size() != 2) continue;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    add(std::uint32_t(3 * elems[0] + i), std::uint32_t(3 * elems[1] + j));
        }
        REQUIRE(edge_set(g) == expect);
    }
}

TEST_CASE("surrounded element corners reach eleven neighbors") {
    Graph g = build_dg_graph(triforce_mesh(Discretization::dg_p1));
    // element 0 is flanked on all three sides: 2 in-element neighbors plus
    // 3 corners from each of the 3 facing elements
    for (std::uint32_t v : {0u, 1u, 2u}) REQUIRE(g.degree(v) == 11);
}

TEST_CASE("mesh graph dispatch rejects grid tags") {
    REQUIRE_THROWS_AS(build_mesh_graph(two_triangle_mesh(Discretization::grid5)),
                      std::invalid_argument);
    REQUIRE(build_mesh_graph(two_triangle_mesh(Discretization::cg_p1)).vertex_count() == 4);
    REQUIRE(build_mesh_graph(two_triangle_mesh(Discretization::dg_p1)).vertex_count() == 6);
}

TEST_CASE("degenerate and non manifold meshes are rejected") {
    Mesh bad = two_triangle_mesh(Discretization::cg_p1);
    bad.elements[0] = {1, 1, 2};
    REQUIRE_THROWS_AS(build_cg_graph(bad), std::invalid_argument);

    Mesh pancake = two_triangle_mesh(Discretization::cg_p1);
    pancake.elements.push_back({1, 2, 0}); // third element over side 1-2
    REQUIRE_THROWS_AS(build_cg_graph(pancake), std::invalid_argument);
    pancake.discretization = Discretization::dg_p1;
    REQUIRE_THROWS_AS(build_dg_graph(pancake), std::invalid_argument);
}

TEST_CASE("mesh parser reports the offending line") {
    SECTION("bad header") {
        std::istringstream in("mesh v2 cg_p1 1 0\n0 0\n");
        REQUIRE_THROWS_WITH(parse_mesh(in, "m.txt"),
                            Catch::Matchers::StartsWith("m.txt:1:"));
    }
    SECTION("unknown discretization") {
        std::istringstream in("mesh v1 spectral 1 0\n0 0\n");
        REQUIRE_THROWS_WITH(parse_mesh(in, "m.txt"),
                            Catch::Matchers::ContainsSubstring("spectral"));
    }
    SECTION("node index out of range, with line number") {
        std::istringstream in("# comment\nmesh v1 cg_p1 3 1\n0 0\n1 0\n0 1\n0 1 7\n");
        REQUIRE_THROWS_WITH(parse_mesh(in, "m.txt"),
                            Catch::Matchers::StartsWith("m.txt:6:") &&
                                Catch::Matchers::ContainsSubstring("out of range"));
    }
    SECTION("truncated file") {
        std::istringstream in("mesh v1 cg_p1 3 1\n0 0\n1 0\n");
        REQUIRE_THROWS_WITH(parse_mesh(in, "m.txt"),
                            Catch::Matchers::ContainsSubstring("end of file"));
    }
    SECTION("comments and blank lines are skipped") {
        std::istringstream in(
            "# triangulation\n\nmesh v1 cg_p1 3 1\n0 0\n# node two\n1 0\n0 1\n\n0 1 2\n");
        Mesh m = parse_mesh(in, "m.txt");
        REQUIRE(m.node_count() == 3);
        REQUIRE(m.element_count() == 1);
    }
}

TEST_CASE("mesh files round trip") {
    Mesh m = triforce_mesh(Discretization::dg_p1);
    std::ostringstream out;
    write_mesh(out, m);
    std::istringstream in(out.str());
    Mesh back = parse_mesh(in, "roundtrip");
    REQUIRE(back.nodes == m.nodes);
    REQUIRE(back.elements == m.elements);
    REQUIRE(back.discretization == m.discretization);
}

TEST_CASE("graph construction validates its edges") {
    REQUIRE_THROWS_AS(Graph(2, {{0, 0}}), std::invalid_argument);          // self loop
    REQUIRE_THROWS_AS(Graph(2, {{0, 5}}), std::invalid_argument);          // out of range
    REQUIRE_THROWS_AS(Graph(2, {{0, 1}, {1, 0}}), std::invalid_argument);  // duplicate
    REQUIRE_THROWS_AS(Graph(2, {{0, 1, 0.0}}), std::invalid_argument);     // non positive weight
    REQUIRE_THROWS_AS(Graph(2, {{0, 1, -1.0}}), std::invalid_argument);

    Graph g(4, {{2, 1, 3.0}, {0, 1}, {3, 0, 0.5}});
    auto nb = g.neighbors(1);
    REQUIRE(std::is_sorted(nb.begin(), nb.end()));
    REQUIRE(g.edge_weight(1, 2) == 3.0);
    REQUIRE(g.edge_weight(0, 3) == 0.5);
    REQUIRE(g.edge_weight(2, 3) == 0.0);
    REQUIRE(g.has_edge(0, 1));
    REQUIRE_FALSE(g.has_edge(1, 3));
}

TEST_CASE("connectivity queries and diagnostics") {
    Graph joined(4, {{0, 1}, {1, 2}, {2, 3}});
    REQUIRE(joined.is_connected());
    REQUIRE_NOTHROW(require_connected(joined, "test"));

    Graph broken(5, {{0, 1}, {2, 3}});
    REQUIRE_FALSE(broken.is_connected());
    auto comp = broken.components();
    REQUIRE(*std::max_element(comp.begin(), comp.end()) == 2); // three components
    REQUIRE(comp == std::vector<std::uint32_t>{0, 0, 1, 1, 2});
    try {
        require_connected(broken, "test op");
        FAIL("expected DisconnectedError");
    } catch (const DisconnectedError& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("test op") != std::string::npos);
        REQUIRE(msg.find('3') != std::string::npos); // component count appears
    }
}

TEST_CASE("graph files round trip and reject malformed input") {
    Graph g(4, {{0, 1, 2.0}, {1, 2}, {2, 3, 0.25}, {0, 3}});
    std::ostringstream out;
    write_graph(out, g);
    std::istringstream in(out.str());
    Graph back = parse_graph(in, "roundtrip");
    REQUIRE(back.vertex_count() == 4);
    REQUIRE(back.edge_count() == 4);
    REQUIRE(back.edge_weight(0, 1) == 2.0);
    REQUIRE(back.edge_weight(2, 3) == 0.25);

    std::istringstream bad1("graph v1 3 1\n2 1 1.0\n");
    REQUIRE_THROWS_WITH(parse_graph(bad1, "g.txt"),
                        Catch::Matchers::StartsWith("g.txt:2:")); // i < j violated
    std::istringstream bad2("graph v1 3 1\n0 9 1.0\n");
    REQUIRE_THROWS_AS(parse_graph(bad2, "g.txt"), ParseError);
    std::istringstream bad3("graph v1 3 2\n0 1 1.0\n");
    REQUIRE_THROWS_AS(parse_graph(bad3, "g.txt"), ParseError);
}
