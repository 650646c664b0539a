#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "distkern/divergence.hpp"
#include "distkern/matrix.hpp"

namespace distkern {

/// Gaussian kernel width: either fixed, or a factor times the median of the strictly positive
/// off-diagonal squared distances.
struct SigmaRule {
    bool median_scaled = true;
    double value = 1.0;  // fixed sigma, or the factor when median_scaled

    static SigmaRule fixed(double sigma) { return {false, sigma}; }
    static SigmaRule median(double factor) { return {true, factor}; }
};

struct KernelSpec {
    enum class Type { linear, polynomial, gaussian };
    Type type = Type::gaussian;
    double c = 0.0;       // polynomial offset
    int degree = 1;       // polynomial degree s
    DistanceKind distance = DistanceKind::hellinger();  // gaussian only
    SigmaRule sigma;      // gaussian only

    static KernelSpec linear() {
        KernelSpec s;
        s.type = Type::linear;
        return s;
    }
    static KernelSpec polynomial(double c, int degree);
    static KernelSpec gaussian(DistanceKind distance, SigmaRule sigma = {});

    /// The quantity estimated per ordered pair: D_{0,1} for linear/polynomial kernels,
    /// the squared distance for gaussian kernels.
    bool uses_distance() const noexcept { return type == Type::gaussian; }
    std::string name() const;
};

struct GramMatrix {
    Matrix values;
    bool symmetric = false;
    bool psd_projected = false;
    double min_eigenvalue_before = std::numeric_limits<double>::quiet_NaN();
};

/// Every ordered pair (i, j) of `estimator`'s sets: the estimates of `terms`, one matrix
/// per term. Cells are computed independently on up to `jobs` threads.
std::vector<Matrix> pairwise_terms(const PairEstimator& estimator, std::span<const Term> terms,
                                   unsigned jobs = 1, EstimateDiagnostics* diag = nullptr);

/// Matrix of the per-pair base quantity for `spec` (see KernelSpec::uses_distance).
Matrix pairwise_base(const PairEstimator& estimator, const KernelSpec& spec, unsigned jobs = 1,
                     EstimateDiagnostics* diag = nullptr);

/// Median of the strictly positive off-diagonal entries (restricted to `idx` if non-empty).
/// Returns 1 when there are none.
double median_positive_offdiagonal(const Matrix& m, std::span<const std::size_t> idx = {});

/// Resolves the sigma rule against a squared-distance matrix.
double resolve_sigma(const SigmaRule& rule, const Matrix& sq_dist, std::span<const std::size_t> idx = {});

/// Applies the kernel to a base matrix: (c + D)^s for polynomial, D for linear, and
/// exp(-0.5 mu^2 / sigma^2) for gaussian.
Matrix apply_kernel(const Matrix& base, const KernelSpec& spec, double sigma);

/// Full pipeline for one collection: estimate all pairs, resolve sigma, apply the kernel.
/// The result is neither symmetrized nor projected. Throws DataError naming the pair on
/// estimation failure.
GramMatrix build_gram(std::span<const SampleSet> sets, const KernelSpec& spec, int div_k,
                      const NeighborConfig& cfg = {}, unsigned jobs = 1,
                      EstimateDiagnostics* diag = nullptr);

/// (G + G^T) / 2.
GramMatrix symmetrize(const GramMatrix& g);

struct EigenDecomposition {
    std::vector<double> values;  // descending
    Matrix vectors;              // column j is the eigenvector of values[j]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Stops when the off-diagonal Frobenius
/// norm drops below 1e-12 ||M||_F; throws ConvergenceError after 100 sweeps and
/// std::invalid_argument on non-symmetric input.
EigenDecomposition eigh(const Matrix& m);

/// Nearest symmetric PSD matrix in Frobenius norm: clip negative eigenvalues to zero.
/// Requires the symmetric flag.
GramMatrix project_psd(const GramMatrix& g);

/// Projects only the rows/columns `block` of a symmetric matrix; other entries are kept.
GramMatrix project_psd_block(const GramMatrix& g, std::span<const std::size_t> block);

}  // namespace distkern
