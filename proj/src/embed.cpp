#include "distkern/embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "distkern/error.hpp"
#include "distkern/gram.hpp"

namespace distkern {

Matrix LleWeights::dense() const {
    Matrix w(size, size);
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t a = 0; a < neighbors[i].size(); ++a) w(i, neighbors[i][a]) = weights[i][a];
    return w;
}

Matrix kernel_distances(const Matrix& gram) {
    if (!gram.square()) throw DataError("kernel_distances: Gram matrix is not square");
    const std::size_t n = gram.rows();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d(i, j) = i == j ? 0.0 : std::max(0.0, gram(i, i) + gram(j, j) - 2.0 * gram(i, j));
    return d;
}

std::vector<std::size_t> nearest_indices(const Matrix& sq_dist, std::size_t i, std::size_t kappa,
                                         std::span<const std::size_t> candidates) {
    std::vector<std::size_t> pool;
    if (candidates.empty()) {
        for (std::size_t j = 0; j < sq_dist.rows(); ++j)
            if (j != i) pool.push_back(j);
    } else {
        for (std::size_t j : candidates)
            if (j != i) pool.push_back(j);
    }
    if (kappa == 0 || kappa > pool.size())
        throw ConfigError("kappa=" + std::to_string(kappa) + " invalid for " + std::to_string(pool.size()) +
                          " candidate neighbors");
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kappa), pool.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double da = sq_dist(i, a);
                          const double db = sq_dist(i, b);
                          return da < db || (da == db && a < b);
                      });
    pool.resize(kappa);
    return pool;
}

std::vector<double> reconstruct(const Matrix& gram, std::size_t i, std::span<const std::size_t> neighbors,
                                double regularization) {
    const std::size_t k = neighbors.size();
    if (k == 0) throw ConfigError("reconstruct: no neighbors");
    if (k == 1) return {1.0};
    // Local covariance C_ab = <phi_i - phi_a, phi_i - phi_b>.
    Matrix c(k, k);
    double trace = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            const std::size_t ja = neighbors[a];
            const std::size_t jb = neighbors[b];
            c(a, b) = gram(i, i) - gram(i, ja) - gram(i, jb) + gram(ja, jb);
        }
        trace += c(a, a);
    }
    const double ridge = trace > 0.0 ? regularization * trace / static_cast<double>(k) : regularization;
    for (std::size_t a = 0; a < k; ++a) c(a, a) += ridge;

    // Solve C w = 1 by Gaussian elimination with partial pivoting, then normalize.
    Matrix aug = c;
    std::vector<double> rhs(k, 1.0);
    double scale = 0.0;
    for (double v : c.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(aug(r, col)) > std::abs(aug(piv, col))) piv = r;
        if (!(std::abs(aug(piv, col)) > 1e-14 * scale))
            throw ConvergenceError("reconstruct: singular local system for row " + std::to_string(i));
        if (piv != col) {
            for (std::size_t cc = 0; cc < k; ++cc) std::swap(aug(piv, cc), aug(col, cc));
            std::swap(rhs[piv], rhs[col]);
        }
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = aug(r, col) / aug(col, col);
            if (f == 0.0) continue;
            for (std::size_t cc = col; cc < k; ++cc) aug(r, cc) -= f * aug(col, cc);
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> w(k);
    for (std::size_t r = k; r-- > 0;) {
        double s = rhs[r];
        for (std::size_t cc = r + 1; cc < k; ++cc) s -= aug(r, cc) * w[cc];
        w[r] = s / aug(r, r);
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(std::abs(total) > 0.0) || !std::isfinite(total))
        throw ConvergenceError("reconstruct: degenerate weights for row " + std::to_string(i));
    for (double& v : w) v /= total;
    return w;
}

LleWeights reconstruction_weights(const Matrix& gram, const LleConfig& cfg) {
    const std::size_t n = gram.rows();
    if (!gram.square()) throw DataError("reconstruction_weights: Gram matrix is not square");
    if (cfg.kappa < 1 || cfg.kappa >= n)
        throw ConfigError("kappa must satisfy 1 <= kappa < T (kappa=" + std::to_string(cfg.kappa) +
                          ", T=" + std::to_string(n) + ")");
    const Matrix dist = kernel_distances(gram);
    LleWeights out;
    out.size = n;
    out.neighbors.resize(n);
    out.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.neighbors[i] = nearest_indices(dist, i, cfg.kappa);
        out.weights[i] = reconstruct(gram, i, out.neighbors[i], cfg.regularization);
    }
    return out;
}

std::vector<double> drdr_weights(const Matrix& gram, std::size_t query, std::span<const std::size_t> training,
                                 const LleConfig& cfg, std::vector<std::size_t>* chosen) {
    const Matrix dist = kernel_distances(gram);
    auto nb = nearest_indices(dist, query, cfg.kappa, training);
    auto w = reconstruct(gram, query, nb, cfg.regularization);
    if (chosen) *chosen = std::move(nb);
    return w;
}

Matrix embedding_cost_matrix(const LleWeights& weights) {
    const std::size_t n = weights.size;
    Matrix iw = Matrix::identity(n) - weights.dense();
    Matrix m(n, n);
    // (I-W)^T (I-W): m_ab = sum_r iw_ra iw_rb
    for (std::size_t r = 0; r < n; ++r) {
        auto row = iw.row(r);
        for (std::size_t a = 0; a < n; ++a) {
            if (row[a] == 0.0) continue;
            for (std::size_t b = 0; b < n; ++b) m(a, b) += row[a] * row[b];
        }
    }
    return m;
}

Embedding embed(const LleWeights& weights, std::size_t out_dim) {
    const std::size_t n = weights.size;
    if (out_dim < 1 || out_dim + 1 > n)
        throw ConfigError("embedding dimension " + std::to_string(out_dim) + " needs at least " +
                          std::to_string(out_dim + 1) + " sets");
    const auto e = eigh(embedding_cost_matrix(weights));
    Embedding out{Matrix(n, out_dim), {}};
    const double scale = std::sqrt(static_cast<double>(n));
    // Ascending order: index n-1 is the constant eigenvector; take the next out_dim.
    for (std::size_t c = 0; c < out_dim; ++c) {
        const std::size_t idx = n - 2 - c;
        out.eigenvalues.push_back(e.values[idx]);
        // Fix the sign so the first nonzero entry is positive; eigenvector signs are arbitrary.
        double sign = 1.0;
        for (std::size_t r = 0; r < n; ++r)
            if (std::abs(e.vectors(r, idx)) > 1e-12) {
                sign = e.vectors(r, idx) > 0 ? 1.0 : -1.0;
                break;
            }
        for (std::size_t r = 0; r < n; ++r) out.coords(r, c) = sign * scale * e.vectors(r, idx);
    }
    return out;
}

}  // namespace distkern
