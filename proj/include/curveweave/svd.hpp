#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/datagen.hpp"

namespace curveweave {

// Dense column-major matrix, just enough for the low-rank baseline.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data; // data[c * rows + r]

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[c * rows + r]; }
    double at(std::size_t r, std::size_t c) const { return data[c * rows + r]; }
    double* col(std::size_t c) { return data.data() + c * rows; }
    const double* col(std::size_t c) const { return data.data() + c * rows; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    Mat transposed() const {
        Mat t(cols, rows);
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t r = 0; r < rows; ++r) t.at(c, r) = at(r, c);
        return t;
    }
};

// Thin SVD a = u * diag(sigma) * v^T with u (m x k), v (n x k), k = min(m, n),
// sigma sorted descending. Columns of u and v are orthonormal; the first
// component of each u column that is not negligible is positive.
struct SvdResult {
    Mat u;
    std::vector<double> sigma;
    Mat v;
};

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Fills zero-norm columns of u with unit vectors orthogonalized against all
// other columns, so u stays orthonormal even for rank-deficient input.
inline void complete_basis(Mat& u, const std::vector<std::uint8_t>& needs) {
    const std::size_t m = u.rows, k = u.cols;
    for (std::size_t c = 0; c < k; ++c) {
        if (!needs[c]) continue;
        for (std::size_t axis = 0; axis < m; ++axis) {
            std::vector<double> cand(m, 0.0);
            cand[axis] = 1.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == c || needs[j]) continue;
                double p = dot(cand.data(), u.col(j), m);
                for (std::size_t i = 0; i < m; ++i) cand[i] -= p * u.col(j)[i];
            }
            for (std::size_t j = 0; j < c; ++j) {
                if (!needs[j]) continue; // already filled earlier in this loop
                double p = dot(cand.data(), u.col(j), m);
                for (std::size_t i = 0; i < m; ++i) cand[i] -= p * u.col(j)[i];
            }
            double nrm = std::sqrt(dot(cand.data(), cand.data(), m));
            if (nrm > 0.5) { // unit vector minus projections; 0.5 rules out near-dependence
                for (std::size_t i = 0; i < m; ++i) u.col(c)[i] = cand[i] / nrm;
                break;
            }
        }
    }
    // mark every column filled so later completions orthogonalize against them
    // (handled by the j < c loop above)
}

// One-sided Jacobi on the columns of w, accumulating rotations into v.
// On return the columns of w are mutually orthogonal.
inline void jacobi_orthogonalize(Mat& w, Mat& v) {
    const std::size_t m = w.rows, n = w.cols;
    const double eps = 1e-15;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double* wp = w.col(p);
                double* wq = w.col(q);
                double alpha = dot(wp, wp, m);
                double beta = dot(wq, wq, m);
                double gamma = dot(wp, wq, m);
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    double a = wp[i], b = wq[i];
                    wp[i] = c * a - s * b;
                    wq[i] = s * a + c * b;
                }
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (std::size_t i = 0; i < n; ++i) {
                    double a = vp[i], b = vq[i];
                    vp[i] = c * a - s * b;
                    vq[i] = s * a + c * b;
                }
            }
        if (!rotated) break;
    }
}

inline SvdResult svd_tall(const Mat& a) {
    const std::size_t m = a.rows, n = a.cols;
    Mat w = a;
    Mat v = Mat::identity(n);
    jacobi_orthogonalize(w, v);

    std::vector<double> sigma(n);
    for (std::size_t c = 0; c < n; ++c) sigma[c] = std::sqrt(dot(w.col(c), w.col(c), m));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    double smax = sigma.empty() ? 0.0 : sigma[order[0]];
    double tiny = smax * 1e-13;

    SvdResult r;
    r.u = Mat(m, n);
    r.v = Mat(n, n);
    r.sigma.resize(n);
    std::vector<std::uint8_t> needs(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t src = order[k];
        double s = sigma[src];
        if (s <= tiny) {
            r.sigma[k] = 0.0;
            needs[k] = 1; // normalized direction is meaningless; fill below
            for (std::size_t i = 0; i < n; ++i) r.v.col(k)[i] = v.col(src)[i];
            continue;
        }
        r.sigma[k] = s;
        for (std::size_t i = 0; i < m; ++i) r.u.col(k)[i] = w.col(src)[i] / s;
        for (std::size_t i = 0; i < n; ++i) r.v.col(k)[i] = v.col(src)[i];
    }
    complete_basis(r.u, needs);

    for (std::size_t k = 0; k < n; ++k) {
        double mx = 0.0;
        for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, std::abs(r.u.col(k)[i]));
        for (std::size_t i = 0; i < m; ++i) {
            if (std::abs(r.u.col(k)[i]) > 1e-12 * mx) {
                if (r.u.col(k)[i] < 0.0) {
                    for (std::size_t t = 0; t < m; ++t) r.u.col(k)[t] = -r.u.col(k)[t];
                    for (std::size_t t = 0; t < n; ++t) r.v.col(k)[t] = -r.v.col(k)[t];
                }
                break;
            }
        }
    }
    return r;
}

} // namespace detail

inline SvdResult svd(const Mat& a) {
    if (a.rows == 0 || a.cols == 0) throw std::invalid_argument("svd: empty matrix");
    if (a.rows >= a.cols) return detail::svd_tall(a);
    Mat t = a.transposed();
    SvdResult r = detail::svd_tall(t);
    std::swap(r.u, r.v); // a = (a^T)^T = (U S V^T)^T = V S U^T
    // re-apply the sign convention to the new u (columns came from v)
    const std::size_t m = r.u.rows, n = r.v.rows, k = r.sigma.size();
    for (std::size_t c = 0; c < k; ++c) {
        double mx = 0.0;
        for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, std::abs(r.u.col(c)[i]));
        for (std::size_t i = 0; i < m; ++i) {
            if (std::abs(r.u.col(c)[i]) > 1e-12 * mx) {
                if (r.u.col(c)[i] < 0.0) {
                    for (std::size_t t2 = 0; t2 < m; ++t2) r.u.col(c)[t2] = -r.u.col(c)[t2];
                    for (std::size_t t2 = 0; t2 < n; ++t2) r.v.col(c)[t2] = -r.v.col(c)[t2];
                }
                break;
            }
        }
    }
    return r;
}

// Rank-k reconstruction u_k diag(sigma_k) v_k^T.
inline Mat truncate_reconstruct(const SvdResult& r, std::size_t k) {
    if (k > r.sigma.size()) throw std::invalid_argument("truncate_reconstruct: rank too large");
    Mat out(r.u.rows, r.v.rows);
    for (std::size_t j = 0; j < k; ++j) {
        const double* uc = r.u.col(j);
        const double* vc = r.v.col(j);
        double s = r.sigma[j];
        for (std::size_t c = 0; c < out.cols; ++c) {
            double sv = s * vc[c];
            double* dst = out.col(c);
            for (std::size_t i = 0; i < out.rows; ++i) dst[i] += uc[i] * sv;
        }
    }
    return out;
}

// Mean squared truncation error of the factored matrix at rank k, evaluated
// as tail energy: sum of squared discarded singular values over rows * cols.
inline double truncation_mse(const SvdResult& r, std::size_t k) {
    if (k > r.sigma.size()) throw std::invalid_argument("truncation_mse: rank too large");
    double tail = 0.0;
    for (std::size_t j = k; j < r.sigma.size(); ++j) tail += r.sigma[j] * r.sigma[j];
    return tail / (static_cast<double>(r.u.rows) * static_cast<double>(r.v.rows));
}

// Mean squared error of approximating b by its projection onto the first k
// left singular vectors: |b - u_k u_k^T b|^2 / (rows * cols). For the matrix
// that was factored this equals truncation_mse at the same rank.
inline double projection_mse(const SvdResult& r, std::size_t k, const Mat& b) {
    if (b.rows != r.u.rows)
        throw std::invalid_argument("projection_mse: row count differs from the factored matrix");
    if (k > r.sigma.size()) throw std::invalid_argument("projection_mse: rank too large");
    if (b.cols == 0) return 0.0;
    const std::size_t m = b.rows;
    double err = 0.0;
    std::vector<double> resid(m);
    for (std::size_t c = 0; c < b.cols; ++c) {
        const double* bc = b.col(c);
        std::copy(bc, bc + m, resid.begin());
        for (std::size_t j = 0; j < k; ++j) {
            const double* uc = r.u.col(j);
            double p = detail::dot(uc, bc, m);
            for (std::size_t i = 0; i < m; ++i) resid[i] -= p * uc[i];
        }
        err += detail::dot(resid.data(), resid.data(), m);
    }
    return err / (static_cast<double>(m) * static_cast<double>(b.cols));
}

// Snapshot matrix with one column per selected example. Rows are grouped by
// channel: row c*N + i holds channel c at node i. Passing label 255 selects
// every example regardless of split.
inline Mat snapshot_matrix(const SnapshotSet& set, std::uint8_t label = 255) {
    const std::size_t N = set.n_nodes, C = set.n_channels;
    std::vector<std::size_t> sel;
    for (std::size_t e = 0; e < set.n_examples(); ++e)
        if (label == 255 || (e < set.split.size() && set.split[e] == label)) sel.push_back(e);
    Mat m(N * C, sel.size());
    for (std::size_t c = 0; c < sel.size(); ++c) {
        const auto& ex = set.examples[sel[c]];
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t i = 0; i < N; ++i) m.at(ch * N + i, c) = ex[i * C + ch];
    }
    return m;
}

} // namespace curveweave
