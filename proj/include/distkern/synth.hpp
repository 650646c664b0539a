#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "distkern/matrix.hpp"
#include "distkern/sampleset.hpp"

namespace distkern::synth {

struct Gaussian {
    std::vector<double> mean;
    Matrix cov;
};

/// Zero-mean 2-d Gaussian with covariance R(angle) base_cov R(angle)^T.
struct RotatedGaussian {
    Matrix base_cov;
    double angle = 0.0;
};

struct Beta {
    double a = 1.0;
    double b = 1.0;
};

struct Uniform {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct GaussianMixture {
    std::vector<Gaussian> components;
    std::vector<double> weights;
};

using Family = std::variant<Gaussian, RotatedGaussian, Beta, Uniform, GaussianMixture>;

struct GeneratorSpec {
    Family family;
    std::size_t n_points = 500;
    std::uint64_t seed = 0;
};

/// n_points i.i.d. draws, deterministic in (spec, seed). Throws ConfigError on invalid
/// parameters (non-PSD covariance, weights not summing to 1, ...).
SampleSet sample(const GeneratorSpec& spec, const std::string& id = {});

/// Lower Cholesky factor of a symmetric PSD matrix (zero pivots allowed).
Matrix cholesky(const Matrix& cov);

/// 2-d rotation matrix.
Matrix rotation(double angle);

/// R(angle) base R(angle)^T.
Matrix rotated_covariance(const Matrix& base_cov, double angle);

/// Skewness of Beta(a, b): 2 (b - a) sqrt(a + b + 1) / ((a + b + 2) sqrt(a b)).
double beta_skewness(double a, double b);

/// Entropy of the first marginal of N(0, R base R^T): 0.5 ln(2 pi e M_11).
double rotated_gaussian_marginal_entropy(const Matrix& base_cov, double angle);

/// Closed-form Renyi-alpha divergence D_alpha(p || q) between Gaussians.
double gaussian_renyi_divergence(const Gaussian& p, const Gaussian& q, double alpha);

/// Covariance used by the entropy experiment.
Matrix entropy_experiment_covariance();

// Experiment datasets. All are deterministic in their seed.

/// Beta(a, 3) sets with a ~ U[3, 20]; targets are skewness values. The last n_test sets are
/// marked test, the rest train.
Dataset beta_skewness_dataset(std::size_t n_sets = 350, std::size_t n_test = 50, std::size_t n_points = 500,
                              std::uint64_t seed = 1);

/// Rotated 2-d Gaussians with angles i pi / n_angles (i = 1..n_angles, cycled over the sets);
/// targets are first-marginal entropies. n_test sets chosen at random are marked test.
Dataset gaussian_entropy_dataset(std::size_t n_sets = 300, std::size_t n_test = 50, std::size_t n_points = 500,
                                 std::size_t n_angles = 150, std::uint64_t seed = 2);

/// 63 rotated Gaussians with base covariance diag(9, 1) and angles (i-1)/20; targets hold
/// the angles (for evaluation only).
Dataset rotated_lle_dataset(std::size_t n_sets = 63, std::size_t n_points = 2000, std::uint64_t seed = 3);

/// Two classes of zero-mean 2-d Gaussian mixtures: class 0 has its two components split along
/// a random direction near the x axis, class 1 near the y axis. Sets get a small random shift.
Dataset mixture_classification_dataset(std::size_t sets_per_class = 100, std::size_t n_points = 500,
                                       double separation = 1.0, std::uint64_t seed = 4);

/// n_normal N(0, I) sets plus one N(shift, I) set at a random position; class label 1 marks
/// the planted set. n_train sets chosen at random are marked train, the others test.
Dataset planted_outlier_dataset(std::size_t n_normal = 99, std::size_t n_points = 200, std::size_t dim = 2,
                                double shift = 5.0, std::size_t n_train = 50, std::uint64_t seed = 5);

/// Two Gaussian classes with means -mu and +mu (each coordinate), identity covariance.
Dataset two_gaussian_classes_dataset(std::size_t sets_per_class = 50, std::size_t n_points = 200,
                                     std::size_t dim = 2, double mu = 3.0, std::uint64_t seed = 6);

}  // namespace distkern::synth
