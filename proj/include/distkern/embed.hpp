#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distkern/matrix.hpp"

namespace distkern {

struct LleConfig {
    std::size_t kappa = 5;        // neighbors per distribution
    std::size_t out_dim = 2;      // embedding dimension
    double regularization = 1e-3; // ridge, relative to the local trace
};

/// Sparse rows of reconstruction weights. Row i has entries only on neighbors[i].
struct LleWeights {
    std::size_t size = 0;
    std::vector<std::vector<std::size_t>> neighbors;
    std::vector<std::vector<double>> weights;

    Matrix dense() const;
};

struct Embedding {
    Matrix coords;               // T x out_dim
    std::vector<double> eigenvalues;  // eigenvalues of (I-W)^T (I-W) behind each column
};

/// Squared feature-space distances G_ii + G_jj - 2 G_ij, clamped at 0, zero diagonal.
Matrix kernel_distances(const Matrix& gram);

/// The `kappa` nearest other indices of i under `sq_dist`, restricted to `candidates` when
/// given. Ties go to the smaller index.
std::vector<std::size_t> nearest_indices(const Matrix& sq_dist, std::size_t i, std::size_t kappa,
                                         std::span<const std::size_t> candidates = {});

/// Affine (sum-to-one) weights reconstructing feature vector `i` from `neighbors`, minimizing
/// G_ii - 2 sum_j w_j G_ij + sum_jk w_j w_k G_jk plus the ridge term. Throws
/// ConvergenceError if the local system is singular even after regularization.
std::vector<double> reconstruct(const Matrix& gram, std::size_t i, std::span<const std::size_t> neighbors,
                                double regularization);

/// Weights for every row, with neighbors chosen by kernel distance.
LleWeights reconstruction_weights(const Matrix& gram, const LleConfig& cfg);

/// Distribution-response regression for one held-out distribution: `gram` includes the query
/// at `query`; it is reconstructed from its kappa nearest among `training`.
std::vector<double> drdr_weights(const Matrix& gram, std::size_t query, std::span<const std::size_t> training,
                                 const LleConfig& cfg, std::vector<std::size_t>* chosen = nullptr);

/// Bottom eigenvectors of M = (I-W)^T (I-W) after the constant one, scaled by sqrt(T).
Embedding embed(const LleWeights& weights, std::size_t out_dim);

/// (I-W)^T (I-W).
Matrix embedding_cost_matrix(const LleWeights& weights);

}  // namespace distkern
