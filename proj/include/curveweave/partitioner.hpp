#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/graph.hpp"
#include "curveweave/rng.hpp"

namespace curveweave {

// smallest L with 2^L >= n
inline std::size_t levels_needed(std::size_t n) {
    if (n == 0) throw std::invalid_argument("levels_needed: vertex count must be positive");
    std::size_t L = 0;
    while ((std::size_t{1} << L) < n) ++L;
    return L;
}

namespace detail {

// Induced subgraph in local indices; `global` is the sorted vertex subset.
struct Subgraph {
    std::vector<std::uint32_t> global;
    std::vector<std::vector<std::uint32_t>> adj; // local neighbour indices
    std::vector<std::vector<double>> wts;
    double weight_sum = 0.0; // over undirected edges

    std::size_t size() const { return global.size(); }
};

inline Subgraph induce(const Graph& g, std::vector<std::uint32_t> subset) {
    std::sort(subset.begin(), subset.end());
    for (std::size_t i = 0; i + 1 < subset.size(); ++i)
        if (subset[i] == subset[i + 1])
            throw std::invalid_argument("vertex subset repeats vertex " +
                                        std::to_string(subset[i]));
    for (std::uint32_t v : subset)
        if (v >= g.vertex_count())
            throw std::invalid_argument("subset vertex " + std::to_string(v) + " out of range");
    Subgraph s;
    s.global = std::move(subset);
    s.adj.resize(s.global.size());
    s.wts.resize(s.global.size());
    for (std::size_t li = 0; li < s.global.size(); ++li) {
        std::uint32_t v = s.global[li];
        auto nb = g.neighbors(v);
        auto wt = g.weights(v);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            auto it = std::lower_bound(s.global.begin(), s.global.end(), nb[k]);
            if (it == s.global.end() || *it != nb[k]) continue;
            std::size_t lj = static_cast<std::size_t>(it - s.global.begin());
            s.adj[li].push_back(static_cast<std::uint32_t>(lj));
            s.wts[li].push_back(wt[k]);
            if (li < lj) s.weight_sum += wt[k];
        }
    }
    return s;
}

inline std::size_t subgraph_component_count(const Subgraph& s,
                                            std::vector<std::uint32_t>* representatives) {
    std::vector<char> seen(s.size(), 0);
    std::size_t n_comp = 0;
    std::vector<std::uint32_t> stack;
    for (std::uint32_t v = 0; v < s.size(); ++v) {
        if (seen[v]) continue;
        ++n_comp;
        if (representatives) representatives->push_back(s.global[v]);
        seen[v] = 1;
        stack.push_back(v);
        while (!stack.empty()) {
            std::uint32_t u = stack.back();
            stack.pop_back();
            for (std::uint32_t w : s.adj[u])
                if (!seen[w]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
        }
    }
    return n_comp;
}

} // namespace detail

// Coupling normalization for the two-way mean-field functional on the induced
// subgraph: alpha = (1/(S*n)) * sum_ij K_ij with S = 2, where K_ij is the
// edge weight for adjacent i != j and zero otherwise. The double sum counts
// both orientations, so this reduces to (sum of edge weights) / n.
inline double compute_alpha(const Graph& g, const std::vector<std::uint32_t>& subset) {
    detail::Subgraph s = detail::induce(g, subset);
    if (s.size() == 0) throw std::invalid_argument("compute_alpha: empty subset");
    return 2.0 * s.weight_sum / (2.0 * static_cast<double>(s.size()));
}

// Normalized two-way mean-field annealing state. Each vertex carries
// membership probabilities (z1, z2) with z1 + z2 = 1. The functional being
// descended is
//   F = 1/2 z^T K z + alpha/2 z^T C z
// with both K and C coupling only distinct partitions; K holds the edge
// weights and C is 1/2 on its diagonal and -1/2 elsewhere, which makes the
// per-vertex fields
//   phi1_i = sum_j h_ij z2_j + alpha (z2_i - n2/2)
//   phi2_i = sum_j h_ij z1_j + alpha (z1_i - n1/2)
// where n_mu is the current probability mass of partition mu. Updates are
// z_mu = exp(-phi_mu/T) normalized over mu, vertices visited in random order,
// T shrinking geometrically.
class MftAnneal {
public:
    MftAnneal(const detail::Subgraph& s, double alpha, Rng& rng)
        : s_(&s), alpha_(alpha) {
        const std::size_t n = s.size();
        z1_.resize(n);
        z2_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.01 * (2.0 * rng.uniform01() - 1.0);
            z1_[i] = 0.5 + d;
            z2_[i] = 0.5 - d;
        }
        mass1_ = std::accumulate(z1_.begin(), z1_.end(), 0.0);
        mass2_ = std::accumulate(z2_.begin(), z2_.end(), 0.0);
        temperature_ = initial_temperature();
        visit_.resize(n);
        for (std::size_t i = 0; i < n; ++i) visit_[i] = static_cast<std::uint32_t>(i);
    }

    double temperature() const { return temperature_; }
    const std::vector<double>& z1() const { return z1_; }
    const std::vector<double>& z2() const { return z2_; }

    // One pass over all vertices in fresh random order at the current
    // temperature; returns max |delta z|. Cooling belongs to run().
    double sweep(Rng& rng) {
        rng.shuffle(visit_);
        double max_delta = 0.0;
        for (std::uint32_t i : visit_) {
            auto [phi1, phi2] = fields(i);
            // normalized exponential update, stabilized by the smaller field
            double m = std::min(phi1, phi2);
            double e1 = std::exp(-(phi1 - m) / temperature_);
            double e2 = std::exp(-(phi2 - m) / temperature_);
            double n1 = e1 / (e1 + e2);
            double n2 = e2 / (e1 + e2);
            max_delta = std::max(max_delta, std::abs(n1 - z1_[i]));
            mass1_ += n1 - z1_[i];
            mass2_ += n2 - z2_[i];
            z1_[i] = n1;
            z2_[i] = n2;
        }
        return max_delta;
    }

    // Mean fraction of probability mass already committed; 0.5 at the
    // uniform start, 1 when every vertex is hard.
    double saturation() const {
        double s = 0.0;
        for (std::size_t i = 0; i < z1_.size(); ++i) s += std::max(z1_[i], z2_[i]);
        return s / static_cast<double>(z1_.size());
    }

    // Anneal until the state hardens and stops moving, or the sweep budget is
    // spent. Each temperature is held until the sweeps equilibrate (long-range
    // order needs several passes near the transition), then lowered
    // geometrically. A small |delta z| alone is not convergence: above the
    // critical temperature the uniform state is a fixed point, so cooling
    // must continue until the symmetry actually breaks.
    void run(Rng& rng, double tol = 1e-4, std::size_t max_sweeps = 2000) {
        if (temperature_ <= 0.0) return; // no coupling at all; nothing to relax
        std::size_t used = 0;
        while (used < max_sweeps) {
            double delta = 0.0;
            for (int k = 0; k < 50 && used < max_sweeps; ++k) {
                delta = sweep(rng);
                ++used;
                if (delta < tol) break;
            }
            if (delta < tol && saturation() > 0.999) return;
            temperature_ *= 0.95;
        }
    }

private:
    std::pair<double, double> fields(std::uint32_t i) const {
        double c1 = 0.0, c2 = 0.0;
        const auto& nb = s_->adj[i];
        const auto& wt = s_->wts[i];
        for (std::size_t k = 0; k < nb.size(); ++k) {
            c1 += wt[k] * z2_[nb[k]];
            c2 += wt[k] * z1_[nb[k]];
        }
        double phi1 = c1 + alpha_ * (z2_[i] - mass2_ / 2.0);
        double phi2 = c2 + alpha_ * (z1_[i] - mass1_ / 2.0);
        return {phi1, phi2};
    }

    // The normalized update depends only on phi1 - phi2, so the start
    // temperature is set by the largest field difference a vertex can
    // generate (its weighted degree plus the balance coupling), never by the
    // common-mode part of the fields, which grows with the subgraph size but
    // cancels in the update.
    double initial_temperature() const {
        double t = 0.0;
        for (std::uint32_t i = 0; i < s_->size(); ++i) {
            double wdeg = 0.0;
            for (double w : s_->wts[i]) wdeg += w;
            t = std::max(t, wdeg + alpha_);
        }
        return t;
    }

    const detail::Subgraph* s_;
    double alpha_;
    std::vector<double> z1_, z2_;
    double mass1_ = 0.0, mass2_ = 0.0;
    double temperature_ = 0.0;
    std::vector<std::uint32_t> visit_;
};

// Hard assignment from left-membership probabilities: vertex i starts on the
// left when p_left[i] >= 0.5. If the side counts then differ from
// target_left / (n - target_left), the overfull side donates the vertices
// with the highest probability of membership in the receiving side, ties
// broken by lower index. Returns one flag per vertex, 0 = left, 1 = right.
inline std::vector<std::uint8_t> rebalance(const std::vector<double>& p_left,
                                           std::size_t target_left) {
    const std::size_t n = p_left.size();
    if (target_left > n)
        throw std::invalid_argument("rebalance: target exceeds vertex count");
    std::vector<std::uint8_t> side(n);
    std::size_t count_left = 0;
    for (std::size_t i = 0; i < n; ++i) {
        side[i] = p_left[i] >= 0.5 ? 0 : 1;
        count_left += side[i] == 0;
    }
    auto donate = [&](std::uint8_t from, std::size_t moves) {
        std::vector<std::uint32_t> donors;
        for (std::uint32_t i = 0; i < n; ++i)
            if (side[i] == from) donors.push_back(i);
        // receiving-side probability: 1 - p for left donors, p for right donors
        std::stable_sort(donors.begin(), donors.end(), [&](std::uint32_t a, std::uint32_t b) {
            double ra = from == 0 ? 1.0 - p_left[a] : p_left[a];
            double rb = from == 0 ? 1.0 - p_left[b] : p_left[b];
            if (ra != rb) return ra > rb;
            return a < b;
        });
        for (std::size_t k = 0; k < moves; ++k) side[donors[k]] ^= 1;
    };
    if (count_left > target_left) donate(0, count_left - target_left);
    else if (count_left < target_left) donate(1, target_left - count_left);
    return side;
}

struct BisectResult {
    std::vector<std::uint32_t> left, right; // sorted global vertex ids
    double cut_weight = 0.0;
};

namespace detail {

inline double cut_weight_of(const Subgraph& s, const std::vector<std::uint8_t>& side) {
    double cut = 0.0;
    for (std::uint32_t i = 0; i < s.size(); ++i)
        for (std::size_t k = 0; k < s.adj[i].size(); ++k) {
            std::uint32_t j = s.adj[i][k];
            if (i < j && side[i] != side[j]) cut += s.wts[i][k];
        }
    return cut;
}

// Balanced pairwise-exchange descent: repeatedly applies the best
// cut-reducing (left, right) swap until none exists, so the returned
// assignment is a local minimum of the cut under the exact balance
// constraint. Only vertices incident to the cut can profit, which keeps the
// candidate sets small.
inline void swap_refine(const Subgraph& s, std::vector<std::uint8_t>& side) {
    const std::size_t n = s.size();
    std::vector<double> external(n), internal(n);
    auto recompute = [&]() {
        for (std::uint32_t i = 0; i < n; ++i) {
            double ext = 0.0, inl = 0.0;
            for (std::size_t k = 0; k < s.adj[i].size(); ++k)
                (side[s.adj[i][k]] != side[i] ? ext : inl) += s.wts[i][k];
            external[i] = ext;
            internal[i] = inl;
        }
    };
    for (std::size_t round = 0; round < 4 * n + 16; ++round) {
        recompute();
        std::vector<std::uint32_t> cand[2];
        for (std::uint32_t i = 0; i < n; ++i)
            if (external[i] > 0.0) cand[side[i]].push_back(i);
        double best_gain = 0.0;
        std::uint32_t best_a = 0, best_b = 0;
        bool found = false;
        for (std::uint32_t a : cand[0])
            for (std::uint32_t b : cand[1]) {
                double gain = (external[a] - internal[a]) + (external[b] - internal[b]);
                double w_ab = 0.0;
                for (std::size_t k = 0; k < s.adj[a].size(); ++k)
                    if (s.adj[a][k] == b) { w_ab = s.wts[a][k]; break; }
                gain -= 2.0 * w_ab;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_a = a;
                    best_b = b;
                    found = true;
                }
            }
        if (!found) break;
        side[best_a] = 1;
        side[best_b] = 0;
    }
}

// Core bisection on an induced subgraph; tolerates disconnected inputs (the
// pieces simply do not interact through the cut term).
inline BisectResult bisect_subgraph(const Subgraph& s, Rng& rng) {
    const std::size_t n = s.size();
    BisectResult res;
    if (n == 1) {
        res.left = {s.global[0]};
        return res;
    }
    std::vector<std::uint8_t> side;
    if (n == 2) {
        side = {0, 1};
    } else {
        const double alpha = 2.0 * s.weight_sum / (2.0 * static_cast<double>(n));
        // the annealed minimum depends on the symmetry-breaking noise, so a
        // few independent runs are kept and the cheapest cut wins
        double best_cut = std::numeric_limits<double>::infinity();
        for (int restart = 0; restart < 3; ++restart) {
            MftAnneal anneal(s, alpha, rng);
            anneal.run(rng);
            const std::vector<double>& p = anneal.z1();
            std::size_t hard_left = 0;
            for (double v : p) hard_left += v >= 0.5;
            // the side currently holding more mass keeps the odd vertex
            std::size_t target_left =
                hard_left * 2 >= n ? (n + 1) / 2 : n / 2;
            std::vector<std::uint8_t> cand = rebalance(p, target_left);
            swap_refine(s, cand);
            double cut = cut_weight_of(s, cand);
            if (cut < best_cut) {
                best_cut = cut;
                side = std::move(cand);
            }
        }
    }
    for (std::uint32_t i = 0; i < n; ++i)
        (side[i] == 0 ? res.left : res.right).push_back(s.global[i]);
    res.cut_weight = cut_weight_of(s, side);
    return res;
}

} // namespace detail

// Balanced two-way partition of the subgraph induced by `subset` (which must
// be connected): anneals the mean-field probabilities, hardens them to a
// balanced assignment, then descends pairwise exchanges so the cut weight is
// a local minimum under the balance constraint. Sizes differ by at most one.
inline BisectResult mft_bisect(const Graph& g, const std::vector<std::uint32_t>& subset,
                               Rng& rng) {
    if (subset.empty()) throw std::invalid_argument("mft_bisect: empty subset");
    detail::Subgraph s = detail::induce(g, subset);
    std::vector<std::uint32_t> reps;
    if (detail::subgraph_component_count(s, &reps) > 1) {
        std::string msg = "mft_bisect: subset induces a disconnected subgraph "
                          "(representative vertices";
        for (std::size_t i = 0; i < reps.size() && i < 8; ++i)
            msg += ' ' + std::to_string(reps[i]);
        msg += ")";
        throw DisconnectedError(msg);
    }
    return detail::bisect_subgraph(s, rng);
}

// Nested bisection assignments. levels[l-1][v] is the partition id of vertex
// v at level l (1-based); ids at level l lie in [0, 2^l) and children of
// partition p are 2p and 2p+1. Partitions may be empty once the recursion
// runs out of vertices.
struct PartitionHierarchy {
    std::size_t n_vertices = 0;
    std::vector<std::vector<std::uint32_t>> levels;

    std::size_t depth() const { return levels.size(); }

    std::vector<std::uint32_t> members(std::size_t level, std::uint32_t partition) const {
        std::vector<std::uint32_t> out;
        for (std::uint32_t v = 0; v < n_vertices; ++v)
            if (levels[level - 1][v] == partition) out.push_back(v);
        return out;
    }

    // how many final-level partitions hold two or more vertices
    std::size_t multi_vertex_final_count() const {
        if (levels.empty()) return 0;
        std::vector<std::size_t> counts(std::size_t{1} << depth(), 0);
        for (std::uint32_t p : levels.back()) ++counts[p];
        return static_cast<std::size_t>(
            std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c >= 2; }));
    }
};

// Recursive bisection down to levels_needed(n) levels. Every bisection draws
// from a child generator derived from (level, partition), so results do not
// depend on traversal order. Partitions that come out of a split disconnected
// are still bisected further (their pieces no longer interact, the balance
// term alone drives the split); the strict connectivity check applies only to
// the top-level input graph.
inline PartitionHierarchy build_hierarchy(const Graph& g, Rng& rng) {
    const std::size_t n = g.vertex_count();
    if (n == 0) throw std::invalid_argument("build_hierarchy: empty graph");
    require_connected(g, "build_hierarchy");

    PartitionHierarchy h;
    h.n_vertices = n;
    const std::size_t L = levels_needed(n);
    const std::uint64_t base = rng.next_u64();
    Rng derive_root(base);

    std::vector<std::uint32_t> cur(n, 0); // level-0 assignment: everything in partition 0
    for (std::size_t level = 1; level <= L; ++level) {
        std::vector<std::uint32_t> next(n, UINT32_MAX);
        const std::uint32_t parents = std::uint32_t{1} << (level - 1);
        for (std::uint32_t p = 0; p < parents; ++p) {
            std::vector<std::uint32_t> members;
            for (std::uint32_t v = 0; v < n; ++v)
                if (cur[v] == p) members.push_back(v);
            if (members.empty()) continue;
            if (members.size() == 1) {
                next[members[0]] = 2 * p; // lone vertex goes to the left child
                continue;
            }
            Rng child = derive_root.derive((static_cast<std::uint64_t>(level) << 32) | p);
            detail::Subgraph s = detail::induce(g, members);
            BisectResult r = detail::bisect_subgraph(s, child);
            for (std::uint32_t v : r.left) next[v] = 2 * p;
            for (std::uint32_t v : r.right) next[v] = 2 * p + 1;
        }
        h.levels.push_back(std::move(next));
        cur = h.levels.back();
    }
    return h;
}

// Text dump: per level one "level <l>:" line, then "<vertex> <partition>"
// lines for every vertex.
inline void write_hierarchy(std::ostream& out, const PartitionHierarchy& h) {
    for (std::size_t l = 1; l <= h.depth(); ++l) {
        out << "level " << l << ":\n";
        for (std::uint32_t v = 0; v < h.n_vertices; ++v)
            out << v << ' ' << h.levels[l - 1][v] << '\n';
    }
}

} // namespace curveweave
