#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/mesh.hpp"

namespace curveweave {

struct Edge {
    std::uint32_t u, v;
    double w = 1.0;
};

// Undirected weighted graph over vertices [0, n). Immutable once built;
// adjacency lists are sorted ascending, weights kept in lockstep. Self loops
// and duplicate edges are rejected, weights must be positive and finite.
class Graph {
public:
    Graph() = default;

    Graph(std::size_t n_vertices, const std::vector<Edge>& edges)
        : adj_(n_vertices), wts_(n_vertices) {
        for (const Edge& e : edges) {
            if (e.u >= n_vertices || e.v >= n_vertices)
                throw std::invalid_argument("edge (" + std::to_string(e.u) + "," +
                                            std::to_string(e.v) + ") out of range for " +
                                            std::to_string(n_vertices) + " vertices");
            if (e.u == e.v)
                throw std::invalid_argument("self loop at vertex " + std::to_string(e.u));
            if (!(e.w > 0.0) || !std::isfinite(e.w))
                throw std::invalid_argument("edge (" + std::to_string(e.u) + "," +
                                            std::to_string(e.v) + ") has non-positive weight");
            adj_[e.u].push_back(e.v);
            wts_[e.u].push_back(e.w);
            adj_[e.v].push_back(e.u);
            wts_[e.v].push_back(e.w);
        }
        for (std::size_t v = 0; v < n_vertices; ++v) {
            // sort neighbours, keep weights aligned
            std::vector<std::size_t> idx(adj_[v].size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return adj_[v][a] < adj_[v][b]; });
            std::vector<std::uint32_t> a(idx.size());
            std::vector<double> w(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                a[i] = adj_[v][idx[i]];
                w[i] = wts_[v][idx[i]];
            }
            for (std::size_t i = 1; i < a.size(); ++i)
                if (a[i] == a[i - 1])
                    throw std::invalid_argument("duplicate edge (" + std::to_string(v) + "," +
                                                std::to_string(a[i]) + ")");
            adj_[v] = std::move(a);
            wts_[v] = std::move(w);
            edge_count_ += adj_[v].size();
        }
        edge_count_ /= 2;
    }

    std::size_t vertex_count() const { return adj_.size(); }
    std::size_t edge_count() const { return edge_count_; }

    std::span<const std::uint32_t> neighbors(std::uint32_t v) const { return adj_[v]; }
    std::span<const double> weights(std::uint32_t v) const { return wts_[v]; }
    std::size_t degree(std::uint32_t v) const { return adj_[v].size(); }

    bool has_edge(std::uint32_t u, std::uint32_t v) const {
        return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
    }

    // weight of edge (u, v); 0 when absent
    double edge_weight(std::uint32_t u, std::uint32_t v) const {
        auto it = std::lower_bound(adj_[u].begin(), adj_[u].end(), v);
        if (it == adj_[u].end() || *it != v) return 0.0;
        return wts_[u][static_cast<std::size_t>(it - adj_[u].begin())];
    }

    // unique edges with u < v, ordered lexicographically
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edge_count_);
        for (std::uint32_t u = 0; u < adj_.size(); ++u)
            for (std::size_t i = 0; i < adj_[u].size(); ++i)
                if (u < adj_[u][i]) out.push_back({u, adj_[u][i], wts_[u][i]});
        return out;
    }

    // same adjacency, new weights from fn(u, v)
    template <typename Fn>
    Graph reweighted(Fn&& fn) const {
        std::vector<Edge> es = edges();
        for (Edge& e : es) e.w = fn(e.u, e.v);
        return Graph(vertex_count(), es);
    }

    // connected component id per vertex, ids dense in visitation order
    std::vector<std::uint32_t> components() const {
        std::vector<std::uint32_t> comp(vertex_count(), UINT32_MAX);
        std::uint32_t id = 0;
        std::vector<std::uint32_t> stack;
        for (std::uint32_t s = 0; s < vertex_count(); ++s) {
            if (comp[s] != UINT32_MAX) continue;
            comp[s] = id;
            stack.push_back(s);
            while (!stack.empty()) {
                std::uint32_t v = stack.back();
                stack.pop_back();
                for (std::uint32_t n : adj_[v])
                    if (comp[n] == UINT32_MAX) {
                        comp[n] = id;
                        stack.push_back(n);
                    }
            }
            ++id;
        }
        return comp;
    }

    bool is_connected() const {
        if (vertex_count() == 0) return true;
        auto comp = components();
        return std::all_of(comp.begin(), comp.end(), [](std::uint32_t c) { return c == 0; });
    }

private:
    std::vector<std::vector<std::uint32_t>> adj_;
    std::vector<std::vector<double>> wts_;
    std::size_t edge_count_ = 0;
};

// Raised when an operation needs a connected (sub)graph; names one vertex per
// component so the caller can see how the input fell apart.
class DisconnectedError : public std::runtime_error {
public:
    explicit DisconnectedError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_connected(const Graph& g, const std::string& context) {
    auto comp = g.components();
    std::uint32_t n_comp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
    if (n_comp <= 1) return;
    std::string msg = context + ": graph is disconnected (" + std::to_string(n_comp) +
                      " components; representative vertices";
    std::uint32_t listed = 0;
    for (std::uint32_t c = 0; c < n_comp && listed < 8; ++c) {
        auto it = std::find(comp.begin(), comp.end(), c);
        msg += ' ' + std::to_string(it - comp.begin());
        ++listed;
    }
    msg += ")";
    throw DisconnectedError(msg);
}

// 5-point stencil on an nx-by-ny grid, vertices row-major (index = y*nx + x),
// unit weights.
inline Graph build_grid_graph(std::size_t nx, std::size_t ny) {
    if (nx == 0 || ny == 0)
        throw std::invalid_argument("grid dimensions must be positive, got " +
                                    std::to_string(nx) + "x" + std::to_string(ny));
    std::vector<Edge> edges;
    edges.reserve(2 * nx * ny);
    auto id = [nx](std::size_t x, std::size_t y) { return static_cast<std::uint32_t>(y * nx + x); };
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            if (x + 1 < nx) edges.push_back({id(x, y), id(x + 1, y), 1.0});
            if (y + 1 < ny) edges.push_back({id(x, y), id(x, y + 1), 1.0});
        }
    return Graph(nx * ny, edges);
}

namespace detail {

inline void check_triangles(const Mesh& mesh) {
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& t = mesh.elements[e];
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw std::invalid_argument("degenerate element " + std::to_string(e) +
                                        " repeats a node index");
    }
}

// element index pairs sharing a side; throws if a side belongs to > 2 elements
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> side_neighbors(const Mesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> sides;
    for (std::uint32_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& t = mesh.elements[e];
        for (int s = 0; s < 3; ++s) {
            std::uint32_t a = t[s], b = t[(s + 1) % 3];
            sides[{std::min(a, b), std::max(a, b)}].push_back(e);
        }
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const auto& [side, els] : sides) {
        if (els.size() > 2)
            throw std::invalid_argument("side (" + std::to_string(side.first) + "," +
                                        std::to_string(side.second) + ") is shared by " +
                                        std::to_string(els.size()) + " elements");
        if (els.size() == 2) out.push_back({els[0], els[1]});
    }
    return out;
}

} // namespace detail

// Continuous P1 stencil: one vertex per mesh node, one unit-weight edge per
// unique element side.
inline Graph build_cg_graph(const Mesh& mesh) {
    detail::check_triangles(mesh);
    detail::side_neighbors(mesh); // reject non-manifold input for both stencils
    std::vector<Edge> edges;
    std::map<std::pair<std::uint32_t, std::uint32_t>, bool> seen;
    for (const auto& t : mesh.elements)
        for (int s = 0; s < 3; ++s) {
            std::uint32_t a = t[s], b = t[(s + 1) % 3];
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            if (!seen.emplace(key, true).second) continue;
            edges.push_back({key.first, key.second, 1.0});
        }
    return Graph(mesh.node_count(), edges);
}

// Discontinuous P1 stencil: vertices are element-local degrees of freedom
// (vertex 3e+m is corner m of element e, so vertex count is 3x element
// count). A vertex connects to the other two corners of its own element and
// to all three corners of every element sharing a side with it. Sides are
// matched by exact node index pairs.
inline Graph build_dg_graph(const Mesh& mesh) {
    detail::check_triangles(mesh);
    std::vector<Edge> edges;
    auto dof = [](std::uint32_t e, int m) { return 3 * e + static_cast<std::uint32_t>(m); };
    for (std::uint32_t e = 0; e < mesh.elements.size(); ++e) {
        edges.push_back({dof(e, 0), dof(e, 1), 1.0});
        edges.push_back({dof(e, 1), dof(e, 2), 1.0});
        edges.push_back({dof(e, 0), dof(e, 2), 1.0});
    }
    for (const auto& [e1, e2] : detail::side_neighbors(mesh))
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                edges.push_back({dof(e1, a), dof(e2, b), 1.0});
    return Graph(mesh.dg_node_count(), edges);
}

// grid5 meshes are implied by their dimensions; there is nothing in the node
// list to build from, so only the FE discretizations are accepted here.
inline Graph build_mesh_graph(const Mesh& mesh) {
    switch (mesh.discretization) {
        case Discretization::cg_p1: return build_cg_graph(mesh);
        case Discretization::dg_p1: return build_dg_graph(mesh);
        case Discretization::grid5:
            throw std::invalid_argument(
                "grid5 graphs are built from grid dimensions, not from a mesh file");
    }
    throw std::invalid_argument("unknown discretization");
}

// Text format:
//   graph v1 <n_vertices> <n_edges>
//   <i> <j> <w>        (n_edges lines, i < j)
inline void write_graph(std::ostream& out, const Graph& g) {
    out << "graph v1 " << g.vertex_count() << ' ' << g.edge_count() << '\n';
    out.precision(17);
    for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << ' ' << e.w << '\n';
}

inline void save_graph(const std::string& path, const Graph& g) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_graph(out, g);
}

inline Graph parse_graph(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    if (!detail::next_content_line(in, line, lineno))
        throw ParseError(source, lineno, "missing header line");
    std::istringstream hdr(line);
    std::string magic, version;
    std::size_t n_vertices = 0, n_edges = 0;
    if (!(hdr >> magic >> version >> n_vertices >> n_edges) || magic != "graph" || version != "v1")
        throw ParseError(source, lineno, "expected header 'graph v1 <n_vertices> <n_edges>'");
    std::vector<Edge> edges;
    edges.reserve(n_edges);
    for (std::size_t k = 0; k < n_edges; ++k) {
        if (!detail::next_content_line(in, line, lineno))
            throw ParseError(source, lineno, "unexpected end of file: expected " +
                             std::to_string(n_edges) + " edge lines, got " + std::to_string(k));
        std::istringstream ls(line);
        long long i, j;
        double w;
        if (!(ls >> i >> j >> w))
            throw ParseError(source, lineno, "malformed edge line (expected '<i> <j> <w>')");
        if (i < 0 || j < 0 || i >= j)
            throw ParseError(source, lineno, "edge endpoints must satisfy 0 <= i < j");
        edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w});
    }
    try {
        return Graph(n_vertices, edges);
    } catch (const std::invalid_argument& ex) {
        throw ParseError(source, lineno, ex.what());
    }
}

inline Graph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file '" + path + "'");
    return parse_graph(in, path);
}

} // namespace curveweave
