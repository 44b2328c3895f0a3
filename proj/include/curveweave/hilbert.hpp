#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "curveweave/ordering.hpp"

namespace curveweave {

namespace detail {

// one quadrant-reflection step of the classic Hilbert index walk
inline void hilbert_rot(std::uint64_t s, std::uint64_t& x, std::uint64_t& y,
                        std::uint64_t rx, std::uint64_t ry) {
    if (ry == 0) {
        if (rx == 1) {
            x = s - 1 - x;
            y = s - 1 - y;
        }
        std::swap(x, y);
    }
}

inline void hilbert_d2xy(std::uint64_t n, std::uint64_t d, std::uint64_t& x, std::uint64_t& y) {
    x = y = 0;
    std::uint64_t t = d;
    for (std::uint64_t s = 1; s < n; s *= 2) {
        std::uint64_t rx = 1 & (t / 2);
        std::uint64_t ry = 1 & (t ^ rx);
        hilbert_rot(s, x, y, rx, ry);
        x += s * rx;
        y += s * ry;
        t /= 4;
    }
}

} // namespace detail

// Hilbert ordering of the 2^level x 2^level grid, vertices row-major
// (index = y*n + x). Canonical orientation: the curve enters at the top-left
// corner (0, n-1), the first U drops to (0, n-2)... i.e. at level 1 it visits
// (0,1), (0,0), (1,0), (1,1). Every consecutive pair is grid-adjacent, so the
// traversal cost is 4^level - 1.
inline SfcOrdering hilbert_ordering(unsigned level) {
    if (level < 1 || level > 14)
        throw std::invalid_argument("hilbert level must be in [1, 14], got " +
                                    std::to_string(level));
    const std::uint64_t n = 1ULL << level;
    std::vector<std::uint32_t> tv(n * n);
    for (std::uint64_t d = 0; d < n * n; ++d) {
        std::uint64_t x, y;
        detail::hilbert_d2xy(n, d, x, y);
        y = n - 1 - y; // mirror so the curve starts at the top-left corner
        tv[d] = static_cast<std::uint32_t>(y * n + x);
    }
    return SfcOrdering::from_to_vertex(std::move(tv));
}

// Rotates a square-grid ordering by quarter_turns * 90 degrees clockwise:
// each visited grid location (x, y) moves to (y, n-1-x). The rotated curve
// traverses the same grid, so adjacency and cost are preserved.
inline SfcOrdering rotate_ordering(const SfcOrdering& o, std::size_t n, unsigned quarter_turns) {
    if (n * n != o.size())
        throw std::invalid_argument("ordering of size " + std::to_string(o.size()) +
                                    " is not an " + std::to_string(n) + "x" +
                                    std::to_string(n) + " grid");
    std::vector<std::uint32_t> tv = o.to_vertex;
    for (unsigned q = 0; q < quarter_turns % 4; ++q)
        for (auto& v : tv) {
            std::uint32_t x = v % n, y = v / n;
            v = static_cast<std::uint32_t>((n - 1 - x) * n + y);
        }
    return SfcOrdering::from_to_vertex(std::move(tv));
}

} // namespace curveweave
