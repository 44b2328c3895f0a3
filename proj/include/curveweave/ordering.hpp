#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/mesh.hpp" // ParseError, detail::next_content_line

namespace curveweave {

// A bijection between curve positions and graph vertices. to_vertex[p] is the
// vertex visited at position p; to_position is its inverse.
struct SfcOrdering {
    std::vector<std::uint32_t> to_vertex;
    std::vector<std::uint32_t> to_position;

    SfcOrdering() = default;

    static SfcOrdering from_to_vertex(std::vector<std::uint32_t> tv) {
        SfcOrdering o;
        o.to_position.assign(tv.size(), UINT32_MAX);
        for (std::size_t p = 0; p < tv.size(); ++p) {
            std::uint32_t v = tv[p];
            if (v >= tv.size())
                throw std::invalid_argument("ordering entry " + std::to_string(v) +
                                            " out of range for " + std::to_string(tv.size()) +
                                            " vertices");
            if (o.to_position[v] != UINT32_MAX)
                throw std::invalid_argument("ordering visits vertex " + std::to_string(v) +
                                            " twice");
            o.to_position[v] = static_cast<std::uint32_t>(p);
        }
        o.to_vertex = std::move(tv);
        return o;
    }

    static SfcOrdering identity(std::size_t n) {
        std::vector<std::uint32_t> tv(n);
        for (std::size_t i = 0; i < n; ++i) tv[i] = static_cast<std::uint32_t>(i);
        return from_to_vertex(std::move(tv));
    }

    std::size_t size() const { return to_vertex.size(); }
};

// Text format:
//   sfc v1 <n>
//   <vertex>            (n lines; line p holds to_vertex[p])
inline void write_ordering(std::ostream& out, const SfcOrdering& o) {
    out << "sfc v1 " << o.size() << '\n';
    for (std::uint32_t v : o.to_vertex) out << v << '\n';
}

inline void save_ordering(const std::string& path, const SfcOrdering& o) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_ordering(out, o);
}

inline SfcOrdering parse_ordering(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    if (!detail::next_content_line(in, line, lineno))
        throw ParseError(source, lineno, "missing header line");
    std::istringstream hdr(line);
    std::string magic, version;
    std::size_t n = 0;
    if (!(hdr >> magic >> version >> n) || magic != "sfc" || version != "v1")
        throw ParseError(source, lineno, "expected header 'sfc v1 <n>'");
    std::vector<std::uint32_t> tv;
    tv.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        if (!detail::next_content_line(in, line, lineno))
            throw ParseError(source, lineno, "unexpected end of file: expected " +
                             std::to_string(n) + " entries, got " + std::to_string(p));
        std::istringstream ls(line);
        long long v;
        if (!(ls >> v) || v < 0)
            throw ParseError(source, lineno, "malformed ordering entry");
        tv.push_back(static_cast<std::uint32_t>(v));
    }
    try {
        return SfcOrdering::from_to_vertex(std::move(tv));
    } catch (const std::invalid_argument& ex) {
        throw ParseError(source, lineno, ex.what());
    }
}

inline SfcOrdering load_ordering(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ordering file '" + path + "'");
    return parse_ordering(in, path);
}

} // namespace curveweave
