#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "curveweave/graph.hpp"
#include "curveweave/ordering.hpp"
#include "curveweave/partitioner.hpp"
#include "curveweave/rng.hpp"

namespace curveweave {

// Unweighted BFS hop distances with memoization. Small graphs cache whole
// distance rows; large ones fall back to early-exit searches plus a pair
// memo, since the sweep workloads query the same pairs repeatedly.
class DistanceCache {
public:
    explicit DistanceCache(const Graph& g, std::size_t row_mode_limit = 4096)
        : g_(&g), row_mode_(g.vertex_count() <= row_mode_limit) {
        if (row_mode_) rows_.resize(g.vertex_count());
    }

    // hop count between u and v; UINT32_MAX when unreachable
    std::uint32_t hop(std::uint32_t u, std::uint32_t v) {
        if (u == v) return 0;
        if (g_->has_edge(u, v)) return 1;
        if (row_mode_) {
            const auto& row = row_from(u);
            return row[v];
        }
        std::uint64_t key = (static_cast<std::uint64_t>(std::min(u, v)) << 32) | std::max(u, v);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        std::uint32_t d = bfs_target(u, v);
        memo_.emplace(key, d);
        return d;
    }

private:
    const std::vector<std::uint32_t>& row_from(std::uint32_t s) {
        auto& row = rows_[s];
        if (!row.empty()) return row;
        row.assign(g_->vertex_count(), UINT32_MAX);
        row[s] = 0;
        std::queue<std::uint32_t> q;
        q.push(s);
        while (!q.empty()) {
            std::uint32_t v = q.front();
            q.pop();
            for (std::uint32_t n : g_->neighbors(v))
                if (row[n] == UINT32_MAX) {
                    row[n] = row[v] + 1;
                    q.push(n);
                }
        }
        return row;
    }

    std::uint32_t bfs_target(std::uint32_t s, std::uint32_t t) {
        std::vector<std::uint32_t> dist(g_->vertex_count(), UINT32_MAX);
        dist[s] = 0;
        std::queue<std::uint32_t> q;
        q.push(s);
        while (!q.empty()) {
            std::uint32_t v = q.front();
            q.pop();
            if (v == t) return dist[t];
            for (std::uint32_t n : g_->neighbors(v))
                if (dist[n] == UINT32_MAX) {
                    dist[n] = dist[v] + 1;
                    q.push(n);
                }
        }
        return dist[t];
    }

    const Graph* g_;
    bool row_mode_;
    std::vector<std::vector<std::uint32_t>> rows_;
    std::unordered_map<std::uint64_t, std::uint32_t> memo_;
};

// Minimum number of edges on a path between u and v; throws when v cannot be
// reached from u.
inline std::uint32_t hop_cost(const Graph& g, std::uint32_t u, std::uint32_t v) {
    if (u >= g.vertex_count() || v >= g.vertex_count())
        throw std::invalid_argument("hop_cost: vertex out of range");
    DistanceCache cache(g, 0); // force targeted search
    std::uint32_t d = cache.hop(u, v);
    if (d == UINT32_MAX)
        throw std::runtime_error("hop_cost: vertex " + std::to_string(v) +
                                 " is unreachable from " + std::to_string(u));
    return d;
}

namespace detail {

// One block = the consecutive sequence positions holding the children of one
// parent partition (length 1 or 2). Only the two entries inside a block may
// swap, which is exactly the freedom the nested bisection leaves open.
struct SweepBlock {
    std::uint32_t start;
    std::uint32_t len;
};

inline std::uint64_t path_functional(const std::vector<std::uint32_t>& seq,
                                     std::size_t lo, std::size_t hi, // window [lo, hi)
                                     DistanceCache& dist) {
    // extend by the neighbouring committed vertex on each side that exists
    std::size_t from = lo > 0 ? lo - 1 : lo;
    std::size_t to = hi < seq.size() ? hi + 1 : hi;
    std::uint64_t f = 0;
    for (std::size_t p = from; p + 1 < to; ++p) {
        std::uint32_t d = dist.hop(seq[p], seq[p + 1]);
        if (d == UINT32_MAX)
            throw std::runtime_error("window sweep: sequence spans disconnected vertices");
        f += d;
    }
    return f;
}

// Sweeps windows of two adjacent blocks across the sequence, forward then
// backward, `sweeps` times. Each window evaluates all same-parent swap
// combinations through the path functional (hop costs over consecutive
// vertices, window extended by one committed vertex on each side where one
// exists). A combination is accepted only if it does not increase the
// functional; on ties the incumbent wins, and among equally improving
// candidates the lexicographically smallest window content wins. Because the
// functional counts every hop the swap can touch, the total traversal cost is
// non-increasing across sweeps. Appends the full-sequence functional after
// each sweep to *history when given.
inline void window_sweep_blocks(std::vector<std::uint32_t>& seq,
                                const std::vector<SweepBlock>& blocks,
                                DistanceCache& dist, std::size_t sweeps,
                                std::vector<std::uint64_t>* history) {
    const std::size_t nb = blocks.size();
    auto visit_window = [&](std::size_t b) {
        const SweepBlock& A = blocks[b];
        const SweepBlock& B = blocks[b + 1];
        const std::size_t lo = A.start, hi = B.start + B.len;
        // candidate orientations: (flipA, flipB), incumbent first
        std::vector<std::pair<int, int>> cands{{0, 0}};
        if (A.len == 2) cands.push_back({1, 0});
        if (A.len == 2 && B.len == 2) cands.push_back({1, 1});
        if (B.len == 2) cands.push_back({0, 1});
        if (cands.size() == 1) return;

        std::vector<std::uint32_t> incumbent(seq.begin() + lo, seq.begin() + hi);
        auto apply = [&](int fa, int fb) {
            std::vector<std::uint32_t> w = incumbent;
            if (fa) std::swap(w[0], w[1]);
            if (fb) std::swap(w[(B.start - lo)], w[(B.start - lo) + 1]);
            return w;
        };

        std::uint64_t best_f = 0;
        std::vector<std::uint32_t> best;
        bool best_is_incumbent = true;
        for (std::size_t c = 0; c < cands.size(); ++c) {
            std::vector<std::uint32_t> w = apply(cands[c].first, cands[c].second);
            std::copy(w.begin(), w.end(), seq.begin() + lo);
            std::uint64_t f = path_functional(seq, lo, hi, dist);
            if (c == 0) {
                best_f = f;
                best = w;
                continue;
            }
            if (f < best_f) {
                best_f = f;
                best = w;
                best_is_incumbent = false;
            } else if (f == best_f && !best_is_incumbent && w < best) {
                best = w;
            }
        }
        std::copy(best.begin(), best.end(), seq.begin() + lo);
    };

    for (std::size_t s = 0; s < sweeps; ++s) {
        if (nb >= 2) {
            for (std::size_t b = 0; b + 1 < nb; ++b) visit_window(b);
            for (std::size_t b = nb - 1; b-- > 0;) visit_window(b);
        }
        if (history)
            history->push_back(path_functional(seq, 0, seq.size(), dist));
    }
}

} // namespace detail

// Windowed pair-swap pass over an explicit vertex sequence. Positions pair up
// as (fixed_prefix + 2t, fixed_prefix + 2t + 1) inside the movable region;
// the fixed prefix and suffix never move but do extend the evaluation windows
// that touch them. Returns the reordered sequence.
inline std::vector<std::uint32_t> window_sweep(std::vector<std::uint32_t> sequence,
                                               const Graph& g, std::size_t fixed_prefix,
                                               std::size_t fixed_suffix,
                                               std::size_t sweeps = 10) {
    if (sequence.size() < 2) return sequence;
    if (fixed_prefix + fixed_suffix > sequence.size())
        throw std::invalid_argument("window_sweep: fixed regions exceed the sequence");
    for (std::uint32_t v : sequence)
        if (v >= g.vertex_count())
            throw std::invalid_argument("window_sweep: vertex " + std::to_string(v) +
                                        " out of range");
    std::vector<detail::SweepBlock> blocks;
    std::size_t lo = fixed_prefix, hi = sequence.size() - fixed_suffix;
    for (std::size_t p = lo; p < hi; p += 2)
        blocks.push_back({static_cast<std::uint32_t>(p),
                          static_cast<std::uint32_t>(std::min<std::size_t>(2, hi - p))});
    DistanceCache dist(g);
    detail::window_sweep_blocks(sequence, blocks, dist, sweeps, nullptr);
    return sequence;
}

// Total traversal cost: sum of hop counts between consecutive vertices.
inline std::uint64_t sfc_total_cost(const Graph& g, const SfcOrdering& o) {
    if (o.size() != g.vertex_count())
        throw std::invalid_argument("sfc_total_cost: ordering size " + std::to_string(o.size()) +
                                    " does not match vertex count " +
                                    std::to_string(g.vertex_count()));
    DistanceCache dist(g);
    std::uint64_t cost = 0;
    for (std::size_t p = 0; p + 1 < o.size(); ++p) {
        std::uint32_t d = dist.hop(o.to_vertex[p], o.to_vertex[p + 1]);
        if (d == UINT32_MAX)
            throw std::runtime_error("sfc_total_cost: ordering jumps between disconnected "
                                     "vertices");
        cost += d;
    }
    return cost;
}

struct SfcBuildConfig {
    std::size_t sweeps = 10;
};

namespace detail {

// Orders the vertices of one final-level partition. Cost is anchored on the
// already-placed predecessor and on the cheapest entry into the following
// partition. Exhaustive for up to 6 vertices, 2-opt descent beyond that.
inline std::vector<std::uint32_t> order_partition_members(
    std::vector<std::uint32_t> verts, const std::uint32_t* prev,
    const std::vector<std::uint32_t>* next_set, DistanceCache& dist) {
    if (verts.size() <= 1) return verts;
    std::sort(verts.begin(), verts.end());

    auto tour_cost = [&](const std::vector<std::uint32_t>& seq) {
        std::uint64_t c = 0;
        if (prev) c += dist.hop(*prev, seq.front());
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) c += dist.hop(seq[i], seq[i + 1]);
        if (next_set && !next_set->empty()) {
            std::uint32_t best = UINT32_MAX;
            for (std::uint32_t w : *next_set) best = std::min(best, dist.hop(seq.back(), w));
            c += best;
        }
        return c;
    };

    if (verts.size() <= 6) {
        std::vector<std::uint32_t> best = verts, perm = verts;
        std::uint64_t best_c = tour_cost(perm);
        while (std::next_permutation(perm.begin(), perm.end())) {
            std::uint64_t c = tour_cost(perm);
            if (c < best_c) {
                best_c = c;
                best = perm;
            }
        }
        return best;
    }

    // greedy chain from the anchor, then 2-opt segment reversals
    std::vector<std::uint32_t> seq;
    std::vector<char> used(verts.size(), 0);
    std::uint32_t cur = prev ? *prev : verts.front();
    if (!prev) {
        seq.push_back(verts.front());
        used[0] = 1;
        cur = verts.front();
    }
    while (seq.size() < verts.size()) {
        std::size_t pick = SIZE_MAX;
        std::uint32_t pick_d = UINT32_MAX;
        for (std::size_t i = 0; i < verts.size(); ++i) {
            if (used[i]) continue;
            std::uint32_t d = dist.hop(cur, verts[i]);
            if (d < pick_d) {
                pick_d = d;
                pick = i;
            }
        }
        used[pick] = 1;
        seq.push_back(verts[pick]);
        cur = verts[pick];
    }
    bool improved = true;
    std::size_t guard = 0;
    while (improved && guard++ < 64) {
        improved = false;
        for (std::size_t i = 0; i < seq.size(); ++i)
            for (std::size_t j = i + 1; j < seq.size(); ++j) {
                std::vector<std::uint32_t> alt = seq;
                std::reverse(alt.begin() + i, alt.begin() + j + 1);
                if (tour_cost(alt) < tour_cost(seq)) {
                    seq = alt;
                    improved = true;
                }
            }
    }
    return seq;
}

} // namespace detail

// Space-filling-curve ordering of a connected graph via nested mean-field
// bisection plus windowed sweeps. Each hierarchy level is laid out in the
// order inherited from its parents, then polished by pair swaps evaluated on
// the level graph (partitions as vertices, adjacency induced by the original
// edges). Final-level partitions holding several vertices are serialized by
// a local shortest-chain search on the original graph.
inline SfcOrdering build_sfc(const Graph& g, Rng& rng, const SfcBuildConfig& cfg = {}) {
    const std::size_t n = g.vertex_count();
    if (n == 0) throw std::invalid_argument("build_sfc: empty graph");
    require_connected(g, "build_sfc");
    if (n == 1) return SfcOrdering::identity(1);

    PartitionHierarchy hier = build_hierarchy(g, rng);
    const std::size_t L = hier.depth();

    std::vector<std::uint32_t> order{0, 1}; // level-1 partitions; first pair is arbitrary
    for (std::size_t level = 1; level <= L; ++level) {
        const auto& assign = hier.levels[level - 1];

        if (level > 1) {
            // children inherit their parent's slot, left child first
            std::vector<char> nonempty(std::size_t{1} << level, 0);
            for (std::uint32_t p : assign) nonempty[p] = 1;
            std::vector<std::uint32_t> next_order;
            for (std::uint32_t parent : order)
                for (std::uint32_t c : {2 * parent, 2 * parent + 1})
                    if (nonempty[c]) next_order.push_back(c);
            order = std::move(next_order);
        }
        if (order.size() < 3) continue; // fewer than two blocks: nothing to sweep

        // level graph over the nonempty partitions, ids densified by
        // ascending partition id so they do not depend on the sequence
        std::vector<std::uint32_t> sorted_ids = order;
        std::sort(sorted_ids.begin(), sorted_ids.end());
        std::vector<std::uint32_t> local_of(std::size_t{1} << level, UINT32_MAX);
        for (std::size_t i = 0; i < sorted_ids.size(); ++i)
            local_of[sorted_ids[i]] = static_cast<std::uint32_t>(i);

        std::vector<Edge> level_edges;
        {
            std::vector<std::pair<std::uint32_t, std::uint32_t>> raw;
            for (const Edge& e : g.edges()) {
                std::uint32_t a = local_of[assign[e.u]], b = local_of[assign[e.v]];
                if (a == b) continue;
                raw.push_back({std::min(a, b), std::max(a, b)});
            }
            std::sort(raw.begin(), raw.end());
            raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
            for (auto [a, b] : raw) level_edges.push_back({a, b, 1.0});
        }
        Graph level_graph(sorted_ids.size(), level_edges);
        DistanceCache dist(level_graph);

        std::vector<std::uint32_t> seq(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) seq[i] = local_of[order[i]];
        std::vector<detail::SweepBlock> blocks;
        for (std::size_t i = 0; i < order.size();) {
            std::uint32_t parent = order[i] >> 1;
            std::uint32_t len = (i + 1 < order.size() && (order[i + 1] >> 1) == parent) ? 2 : 1;
            blocks.push_back({static_cast<std::uint32_t>(i), len});
            i += len;
        }
        detail::window_sweep_blocks(seq, blocks, dist, cfg.sweeps, nullptr);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = sorted_ids[seq[i]];
    }

    // serialize the final level
    const auto& final_assign = hier.levels[L - 1];
    std::vector<std::vector<std::uint32_t>> members(std::size_t{1} << L);
    for (std::uint32_t v = 0; v < n; ++v) members[final_assign[v]].push_back(v);

    DistanceCache dist(g);
    std::vector<std::uint32_t> path;
    path.reserve(n);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& verts = members[order[k]];
        const std::uint32_t* prev = path.empty() ? nullptr : &path.back();
        const std::vector<std::uint32_t>* next_set =
            (k + 1 < order.size()) ? &members[order[k + 1]] : nullptr;
        if (verts.size() == 1) {
            path.push_back(verts[0]);
        } else {
            auto chain = detail::order_partition_members(verts, prev, next_set, dist);
            path.insert(path.end(), chain.begin(), chain.end());
        }
    }
    return SfcOrdering::from_to_vertex(std::move(path));
}

// Replaces every edge weight by max_m |pos_m(u) - pos_m(v)|^gamma over the
// already-built orderings, so edges the existing curves traverse directly
// stay cheap (1^gamma) and edges they stretch across become expensive. The
// next bisection then prefers to cut the cheap, already-covered edges.
inline Graph reweight_for_next_sfc(const Graph& g, const std::vector<SfcOrdering>& orderings,
                                   double gamma = 0.2) {
    if (orderings.empty())
        throw std::invalid_argument("reweight_for_next_sfc: need at least one ordering");
    for (const auto& o : orderings)
        if (o.size() != g.vertex_count())
            throw std::invalid_argument("reweight_for_next_sfc: ordering does not match graph");
    return g.reweighted([&](std::uint32_t u, std::uint32_t v) {
        double best = 0.0;
        for (const auto& o : orderings) {
            double d = std::abs(static_cast<double>(o.to_position[u]) -
                                static_cast<double>(o.to_position[v]));
            best = std::max(best, d);
        }
        return std::pow(best, gamma);
    });
}

// Builds `count` orderings; each one after the first works on the graph
// reweighted by the curves already present.
inline std::vector<SfcOrdering> build_multiple_sfcs(const Graph& g, std::size_t count, Rng& rng,
                                                    double gamma = 0.2,
                                                    const SfcBuildConfig& cfg = {}) {
    if (count == 0) throw std::invalid_argument("build_multiple_sfcs: count must be positive");
    std::vector<SfcOrdering> out;
    out.push_back(build_sfc(g, rng, cfg));
    for (std::size_t k = 1; k < count; ++k) {
        Graph rw = reweight_for_next_sfc(g, out, gamma);
        out.push_back(build_sfc(rw, rng, cfg));
    }
    return out;
}

struct CoverageReport {
    std::size_t total = 0;     // edges in the graph
    std::size_t covered = 0;   // traversed by at least one ordering
    std::size_t shared = 0;    // traversed by at least two orderings
    std::size_t uncovered = 0; // traversed by none
    std::vector<std::uint32_t> per_edge; // traversal count, aligned with Graph::edges()
};

// An edge counts as traversed by an ordering only when its two endpoints are
// consecutive on that curve; jumps across non-adjacent vertices cover
// nothing.
inline CoverageReport edge_coverage(const Graph& g, const std::vector<SfcOrdering>& orderings) {
    for (const auto& o : orderings)
        if (o.size() != g.vertex_count())
            throw std::invalid_argument("edge_coverage: ordering does not match graph");
    std::vector<Edge> es = g.edges();
    std::unordered_map<std::uint64_t, std::size_t> index;
    index.reserve(es.size());
    for (std::size_t i = 0; i < es.size(); ++i)
        index.emplace((static_cast<std::uint64_t>(es[i].u) << 32) | es[i].v, i);

    CoverageReport rep;
    rep.total = es.size();
    rep.per_edge.assign(es.size(), 0);
    for (const auto& o : orderings)
        for (std::size_t p = 0; p + 1 < o.size(); ++p) {
            std::uint32_t a = o.to_vertex[p], b = o.to_vertex[p + 1];
            if (a > b) std::swap(a, b);
            auto it = index.find((static_cast<std::uint64_t>(a) << 32) | b);
            if (it != index.end()) ++rep.per_edge[it->second];
        }
    for (std::uint32_t c : rep.per_edge) {
        if (c >= 1) ++rep.covered;
        if (c >= 2) ++rep.shared;
    }
    rep.uncovered = rep.total - rep.covered;
    return rep;
}

inline void write_coverage_csv(std::ostream& out, const CoverageReport& rep) {
    out << "total,covered,shared,uncovered\n"
        << rep.total << ',' << rep.covered << ',' << rep.shared << ',' << rep.uncovered << '\n';
}

} // namespace curveweave
