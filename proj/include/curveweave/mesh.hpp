#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace curveweave {

enum class Discretization { grid5, cg_p1, dg_p1 };

inline const char* to_string(Discretization d) {
    switch (d) {
        case Discretization::grid5: return "grid5";
        case Discretization::cg_p1: return "cg_p1";
        case Discretization::dg_p1: return "dg_p1";
    }
    return "?";
}

// Thrown on malformed mesh/graph/ordering files; message carries
// "<source>:<line>: <what>".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what) {}
};

// Triangulated 2D mesh as stored on disk. `elements` holds 0-based node
// triples; for dg_p1 these still reference the shared geometric nodes, the
// element-local degrees of freedom are derived when the graph is built.
struct Mesh {
    std::vector<std::array<double, 2>> nodes;
    std::vector<std::array<std::uint32_t, 3>> elements;
    Discretization discretization = Discretization::cg_p1;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t element_count() const { return elements.size(); }

    // one degree of freedom per element corner
    std::size_t dg_node_count() const { return 3 * elements.size(); }
};

namespace detail {

inline bool next_content_line(std::istream& in, std::string& line, std::size_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t i = line.find_first_not_of(" \t\r");
        if (i == std::string::npos) continue; // blank
        if (line[i] == '#') continue;         // comment
        return true;
    }
    return false;
}

} // namespace detail

// Parses the text mesh format:
//   mesh v1 <grid5|cg_p1|dg_p1> <n_nodes> <n_elements>
//   <x> <y>                       (n_nodes lines)
//   <i> <j> <k>                   (n_elements lines, 0-based node indices)
// Blank lines and lines starting with '#' are skipped. `source` names the
// input in diagnostics.
inline Mesh parse_mesh(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    if (!detail::next_content_line(in, line, lineno))
        throw ParseError(source, lineno, "missing header line");

    std::istringstream hdr(line);
    std::string magic, version, disc;
    std::size_t n_nodes = 0, n_elements = 0;
    if (!(hdr >> magic >> version >> disc >> n_nodes >> n_elements) ||
        magic != "mesh" || version != "v1")
        throw ParseError(source, lineno, "expected header 'mesh v1 <discretization> <n_nodes> <n_elements>'");

    Mesh mesh;
    if (disc == "grid5") mesh.discretization = Discretization::grid5;
    else if (disc == "cg_p1") mesh.discretization = Discretization::cg_p1;
    else if (disc == "dg_p1") mesh.discretization = Discretization::dg_p1;
    else throw ParseError(source, lineno, "unknown discretization tag '" + disc + "'");

    mesh.nodes.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (!detail::next_content_line(in, line, lineno))
            throw ParseError(source, lineno, "unexpected end of file: expected " +
                             std::to_string(n_nodes) + " node lines, got " + std::to_string(i));
        std::istringstream ls(line);
        double x, y;
        if (!(ls >> x >> y))
            throw ParseError(source, lineno, "malformed node line (expected '<x> <y>')");
        mesh.nodes.push_back({x, y});
    }

    mesh.elements.reserve(n_elements);
    for (std::size_t e = 0; e < n_elements; ++e) {
        if (!detail::next_content_line(in, line, lineno))
            throw ParseError(source, lineno, "unexpected end of file: expected " +
                             std::to_string(n_elements) + " element lines, got " + std::to_string(e));
        std::istringstream ls(line);
        long long i, j, k;
        if (!(ls >> i >> j >> k))
            throw ParseError(source, lineno, "malformed element line (expected '<i> <j> <k>')");
        for (long long idx : {i, j, k})
            if (idx < 0 || static_cast<std::size_t>(idx) >= n_nodes)
                throw ParseError(source, lineno, "node index " + std::to_string(idx) +
                                 " out of range [0, " + std::to_string(n_nodes) + ")");
        mesh.elements.push_back({static_cast<std::uint32_t>(i),
                                 static_cast<std::uint32_t>(j),
                                 static_cast<std::uint32_t>(k)});
    }
    return mesh;
}

inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mesh file '" + path + "'");
    return parse_mesh(in, path);
}

inline void write_mesh(std::ostream& out, const Mesh& mesh) {
    out << "mesh v1 " << to_string(mesh.discretization) << ' '
        << mesh.node_count() << ' ' << mesh.element_count() << '\n';
    out.precision(17);
    for (const auto& n : mesh.nodes) out << n[0] << ' ' << n[1] << '\n';
    for (const auto& e : mesh.elements) out << e[0] << ' ' << e[1] << ' ' << e[2] << '\n';
}

inline void save_mesh(const std::string& path, const Mesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_mesh(out, mesh);
}

} // namespace curveweave
