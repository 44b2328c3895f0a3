#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "curveweave/rng.hpp"

namespace curveweave {

// Square-wave advection runs on [0, L]^2 with nodes at i*L/(n-1). The square
// corner (x0, y0) is drawn from [origin_lo, origin_hi]^2; side and velocities
// are chosen so the wave stays inside the domain over the simulated window.
struct AdvectionConfig {
    std::size_t nx = 32, ny = 32;
    double domain = 3.0;
    double u = 1.0, v = 1.0;
    double dt = 1e-2;
    std::size_t n_steps = 10;   // fields recorded per initial condition
    std::size_t n_initial = 64; // random initial conditions
    double origin_lo = 0.0, origin_hi = 2.0;
    double side = 0.5;
    std::uint64_t seed = 0;

    std::size_t node_count() const { return nx * ny; }
    std::size_t example_count() const { return n_steps * n_initial; }
    double dx() const { return domain / static_cast<double>(nx - 1); }
    double dy() const { return domain / static_cast<double>(ny - 1); }

    void validate() const {
        if (nx < 2 || ny < 2)
            throw std::invalid_argument("advection grid must be at least 2x2");
        if (!(dt > 0.0)) throw std::invalid_argument("advection time step must be positive");
        if (u < 0.0 || v < 0.0)
            throw std::invalid_argument(
                "negative advection velocities are unsupported (upwind sweep assumes "
                "flow to the east/north)");
    }

    static AdvectionConfig desk(std::uint64_t seed) {
        AdvectionConfig c;
        c.seed = seed;
        return c; // 32x32, 64 initial conditions, 10 steps
    }

    static AdvectionConfig full(std::uint64_t seed) {
        AdvectionConfig c;
        c.nx = c.ny = 128;
        c.n_steps = 30;
        c.n_initial = 512;
        c.seed = seed;
        return c;
    }
};

// Gaussian bumps exp(-((x-xc)^2 + (y-yc)^2) / (2 sigma^2)) with coordinates
// measured in grid-node units; centers are drawn over the whole grid, sigma
// uniformly from [sigma_lo, sigma_hi].
struct GaussianConfig {
    std::size_t nx = 32, ny = 32;
    std::size_t n_samples = 640;
    double sigma_lo = 2.5, sigma_hi = 5.0;
    std::uint64_t seed = 0;

    std::size_t node_count() const { return nx * ny; }

    void validate() const {
        if (nx < 2 || ny < 2) throw std::invalid_argument("gaussian grid must be at least 2x2");
        if (!(sigma_lo > 0.0) || sigma_hi < sigma_lo)
            throw std::invalid_argument("sigma range must satisfy 0 < lo <= hi");
    }

    static GaussianConfig desk(std::uint64_t seed) {
        GaussianConfig c;
        c.seed = seed;
        return c;
    }

    static GaussianConfig full(std::uint64_t seed) {
        GaussianConfig c;
        c.nx = c.ny = 128;
        c.n_samples = 15360;
        c.sigma_lo = 10.0;
        c.sigma_hi = 20.0;
        c.seed = seed;
        return c;
    }
};

// A set of snapshot fields. Values are stored per example, node-major with
// channels innermost (value(i, c) at index i*C + c), matching the on-disk
// layout. `denorm` maps stored values back to the originals per channel:
// original = lo + stored * (hi - lo); an identity record is (0, 1).
struct SnapshotSet {
    std::size_t n_nodes = 0;
    std::size_t n_channels = 1;
    std::vector<std::vector<double>> examples;
    std::vector<std::uint8_t> split;                    // empty, or one 0/1/2 label per example
    std::vector<std::pair<double, double>> denorm;      // one (lo, hi) per channel
    std::vector<std::uint8_t> constant_channels;        // flags from normalize()

    std::size_t n_examples() const { return examples.size(); }

    static SnapshotSet empty(std::size_t n_nodes, std::size_t n_channels) {
        SnapshotSet s;
        s.n_nodes = n_nodes;
        s.n_channels = n_channels;
        s.denorm.assign(n_channels, {0.0, 1.0});
        s.constant_channels.assign(n_channels, 0);
        return s;
    }

    std::vector<std::size_t> split_indices(std::uint8_t label) const {
        std::vector<std::size_t> out;
        for (std::size_t e = 0; e < split.size(); ++e)
            if (split[e] == label) out.push_back(e);
        return out;
    }
};

// One backward-Euler upwind step of c_t + u c_x + v c_y = 0 on the row-major
// field (node (x, y) at index y*nx + x). With u, v >= 0 the implicit system
//   (1 + lx + ly) c_xy - lx c_(x-1)y - ly c_x(y-1) = c_xy_old
// is lower triangular under a row-major sweep, so one forward substitution
// solves it exactly. Inflow boundaries (west/south) carry value 0.
inline std::vector<double> step_advection(const std::vector<double>& field,
                                          const AdvectionConfig& cfg) {
    cfg.validate();
    if (field.size() != cfg.node_count())
        throw std::invalid_argument("step_advection: field has " + std::to_string(field.size()) +
                                    " values, grid has " + std::to_string(cfg.node_count()) +
                                    " nodes");
    const double lx = cfg.u * cfg.dt / cfg.dx();
    const double ly = cfg.v * cfg.dt / cfg.dy();
    const double diag = 1.0 + lx + ly;
    std::vector<double> next(field.size());
    for (std::size_t y = 0; y < cfg.ny; ++y)
        for (std::size_t x = 0; x < cfg.nx; ++x) {
            const std::size_t i = y * cfg.nx + x;
            double rhs = field[i];
            if (x > 0) rhs += lx * next[i - 1];
            if (y > 0) rhs += ly * next[i - cfg.nx];
            next[i] = rhs / diag;
        }
    return next;
}

// Unit square-wave initial condition: node value 1 iff the node lies in the
// closed square [x0, x0+side] x [y0, y0+side].
inline std::vector<double> square_wave_field(const AdvectionConfig& cfg, double x0, double y0) {
    std::vector<double> f(cfg.node_count(), 0.0);
    for (std::size_t y = 0; y < cfg.ny; ++y)
        for (std::size_t x = 0; x < cfg.nx; ++x) {
            double px = static_cast<double>(x) * cfg.dx();
            double py = static_cast<double>(y) * cfg.dy();
            if (px >= x0 && px <= x0 + cfg.side && py >= y0 && py <= y0 + cfg.side)
                f[y * cfg.nx + x] = 1.0;
        }
    return f;
}

// N_s random squares, each advanced N_t steps; the dataset holds every
// post-step field (N_s * N_t examples, single channel).
inline SnapshotSet generate_square_wave(const AdvectionConfig& cfg) {
    cfg.validate();
    SnapshotSet set = SnapshotSet::empty(cfg.node_count(), 1);
    set.examples.reserve(cfg.example_count());
    Rng rng(cfg.seed);
    for (std::size_t s = 0; s < cfg.n_initial; ++s) {
        double x0 = rng.uniform(cfg.origin_lo, cfg.origin_hi);
        double y0 = rng.uniform(cfg.origin_lo, cfg.origin_hi);
        std::vector<double> field = square_wave_field(cfg, x0, y0);
        for (std::size_t t = 0; t < cfg.n_steps; ++t) {
            field = step_advection(field, cfg);
            set.examples.push_back(field);
        }
    }
    return set;
}

// Gaussian evaluated at the grid nodes, coordinates in node units.
inline std::vector<double> gaussian_field(std::size_t nx, std::size_t ny, double xc, double yc,
                                          double sigma) {
    std::vector<double> f(nx * ny);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            double dx = static_cast<double>(x) - xc;
            double dy = static_cast<double>(y) - yc;
            f[y * nx + x] = std::exp(-(dx * dx + dy * dy) * inv);
        }
    return f;
}

inline SnapshotSet generate_gaussians(const GaussianConfig& cfg) {
    cfg.validate();
    SnapshotSet set = SnapshotSet::empty(cfg.node_count(), 1);
    set.examples.reserve(cfg.n_samples);
    Rng rng(cfg.seed);
    for (std::size_t s = 0; s < cfg.n_samples; ++s) {
        double xc = rng.uniform(0.0, static_cast<double>(cfg.nx - 1));
        double yc = rng.uniform(0.0, static_cast<double>(cfg.ny - 1));
        double sigma = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
        set.examples.push_back(gaussian_field(cfg.nx, cfg.ny, xc, yc, sigma));
    }
    return set;
}

// Affine per-channel normalization onto [target_lo, target_hi]. The denorm
// record is composed with any existing one, so round trips through
// denormalize() always recover the original values. A constant channel maps
// to the interval midpoint and is flagged.
inline SnapshotSet normalize(SnapshotSet set, double target_lo, double target_hi) {
    if (!(target_hi > target_lo))
        throw std::invalid_argument("normalize: target interval is empty");
    const std::size_t C = set.n_channels, N = set.n_nodes;
    for (std::size_t c = 0; c < C; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& ex : set.examples)
            for (std::size_t i = 0; i < N; ++i) {
                lo = std::min(lo, ex[i * C + c]);
                hi = std::max(hi, ex[i * C + c]);
            }
        if (set.examples.empty()) lo = hi = 0.0;
        const auto [old_lo, old_hi] = set.denorm[c];
        if (hi == lo) {
            const double mid = 0.5 * (target_lo + target_hi);
            for (auto& ex : set.examples)
                for (std::size_t i = 0; i < N; ++i) ex[i * C + c] = mid;
            double orig = old_lo + lo * (old_hi - old_lo);
            set.denorm[c] = {orig, orig}; // degenerate record: every stored value maps to orig
            set.constant_channels[c] = 1;
            continue;
        }
        const double scale = (target_hi - target_lo) / (hi - lo);
        for (auto& ex : set.examples)
            for (std::size_t i = 0; i < N; ++i)
                ex[i * C + c] = target_lo + (ex[i * C + c] - lo) * scale;
        // stored value s recovers the pre-normalization value via
        // p = lo + (s - target_lo)/scale; compose with the previous record
        double p0 = lo - target_lo / scale;               // pre-value at s = 0
        double p1 = lo + (1.0 - target_lo) / scale;       // pre-value at s = 1
        set.denorm[c] = {old_lo + p0 * (old_hi - old_lo), old_lo + p1 * (old_hi - old_lo)};
    }
    return set;
}

// Inverts the denorm records, restoring original values.
inline SnapshotSet denormalize(SnapshotSet set) {
    const std::size_t C = set.n_channels, N = set.n_nodes;
    for (std::size_t c = 0; c < C; ++c) {
        const auto [lo, hi] = set.denorm[c];
        for (auto& ex : set.examples)
            for (std::size_t i = 0; i < N; ++i) ex[i * C + c] = lo + ex[i * C + c] * (hi - lo);
        set.denorm[c] = {0.0, 1.0};
    }
    return set;
}

// Random disjoint train/val/test assignment with sizes matching the ratios
// by largest remainder. Labels: 0 train, 1 val, 2 test.
inline SnapshotSet split(SnapshotSet set, double r_train, double r_val, double r_test, Rng& rng) {
    if (!(r_train > 0.0) || !(r_val > 0.0) || !(r_test > 0.0))
        throw std::invalid_argument("split: ratios must be positive");
    const std::size_t E = set.n_examples();
    const double total = r_train + r_val + r_test;
    const double quota[3] = {E * r_train / total, E * r_val / total, E * r_test / total};
    std::size_t sizes[3];
    std::size_t assigned = 0;
    double frac[3];
    for (int k = 0; k < 3; ++k) {
        sizes[k] = static_cast<std::size_t>(quota[k]);
        frac[k] = quota[k] - static_cast<double>(sizes[k]);
        assigned += sizes[k];
    }
    while (assigned < E) { // largest remainder, earlier split wins ties
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (frac[k] > frac[best]) best = k;
        ++sizes[best];
        frac[best] = -1.0;
        ++assigned;
    }
    std::vector<std::size_t> idx(E);
    for (std::size_t e = 0; e < E; ++e) idx[e] = e;
    rng.shuffle(idx);
    set.split.assign(E, 2);
    std::size_t p = 0;
    for (std::size_t k = 0; k < sizes[0]; ++k) set.split[idx[p++]] = 0;
    for (std::size_t k = 0; k < sizes[1]; ++k) set.split[idx[p++]] = 1;
    return set;
}

// --- binary snapshot file ----------------------------------------------
// little-endian: magic "SNP1"; u64 N, u64 E, u32 C, u32 split flag;
// E*N*C float64 values (example-major, then node, then channel); E split
// bytes if flagged; then per channel f64 lo, f64 hi of the denorm record.

namespace detail {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated snapshot file '" + path + "'");
    return v;
}

} // namespace detail

inline void save_snapshots(const std::string& path, const SnapshotSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write("SNP1", 4);
    detail::write_raw<std::uint64_t>(out, set.n_nodes);
    detail::write_raw<std::uint64_t>(out, set.n_examples());
    detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(set.n_channels));
    detail::write_raw<std::uint32_t>(out, set.split.empty() ? 0 : 1);
    for (const auto& ex : set.examples)
        out.write(reinterpret_cast<const char*>(ex.data()),
                  static_cast<std::streamsize>(ex.size() * sizeof(double)));
    if (!set.split.empty())
        out.write(reinterpret_cast<const char*>(set.split.data()),
                  static_cast<std::streamsize>(set.split.size()));
    for (const auto& [lo, hi] : set.denorm) {
        detail::write_raw<double>(out, lo);
        detail::write_raw<double>(out, hi);
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline SnapshotSet load_snapshots(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open snapshot file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SNP1", 4) != 0)
        throw std::runtime_error("'" + path + "' is not a snapshot file (bad magic)");
    auto N = detail::read_raw<std::uint64_t>(in, path);
    auto E = detail::read_raw<std::uint64_t>(in, path);
    auto C = detail::read_raw<std::uint32_t>(in, path);
    auto has_split = detail::read_raw<std::uint32_t>(in, path);
    SnapshotSet set = SnapshotSet::empty(N, C);
    set.examples.assign(E, std::vector<double>(N * C));
    for (auto& ex : set.examples) {
        in.read(reinterpret_cast<char*>(ex.data()),
                static_cast<std::streamsize>(ex.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated snapshot file '" + path + "'");
    }
    if (has_split) {
        set.split.resize(E);
        in.read(reinterpret_cast<char*>(set.split.data()), static_cast<std::streamsize>(E));
        if (!in) throw std::runtime_error("truncated snapshot file '" + path + "'");
    }
    for (std::size_t c = 0; c < C; ++c) {
        double lo = detail::read_raw<double>(in, path);
        double hi = detail::read_raw<double>(in, path);
        set.denorm[c] = {lo, hi};
    }
    return set;
}

} // namespace curveweave
