#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distkern/matrix.hpp"
#include "distkern/smo.hpp"

namespace distkern {

/// Dual coefficients below this count as zero when collecting support vectors and when
/// averaging the SVM bias.
inline constexpr double kSupportThreshold = 1e-8;

struct TrainOptions {
    SolverOptions solver;
    /// Reject Gram matrices with eigenvalues below -1e-10 * lambda_max instead of training.
    bool strict_psd = false;
};

/// Soft-margin SVM over a precomputed Gram matrix.
struct SvmModel {
    std::vector<double> dual_coeffs;  // alpha_i in [0, C]
    std::vector<int> labels;          // +1 / -1
    double bias = 0.0;
    std::vector<std::size_t> support_indices;
    double C = 1.0;
    double dual_objective = 0.0;      // sum(alpha) - 0.5 sum alpha_i alpha_j y_i y_j G_ij
    double kkt_gap = 0.0;
    std::size_t iterations = 0;
};

struct Prediction {
    int label;
    double decision;
};

/// Throws DataError if only one class is present or shapes disagree.
/// `warm_start` optionally holds dual coefficients from a solve with a smaller C; they are a
/// feasible starting point and typically cut the iteration count along an ascending C grid.
SvmModel train_binary_svm(const Matrix& gram, std::span<const int> labels, double C,
                          const TrainOptions& options = {}, std::span<const double> warm_start = {});

/// Decision value sum_i alpha_i y_i K_i + b; label +1 when the value is >= 0.
Prediction predict_binary(const SvmModel& model, std::span<const double> kernel_row);

/// One binary model per unordered class pair (first < second). The first class maps to +1.
struct PairwiseSvm {
    int first;
    int second;
    std::vector<std::size_t> members;  // training indices used by this model
    SvmModel model;
};

struct MulticlassSvm {
    int num_classes = 0;
    std::vector<PairwiseSvm> models;
};

/// Throws DataError when fewer than two classes are present or a class id in 0..r-1 is unused.
MulticlassSvm train_multiclass(const Matrix& gram, std::span<const int> class_labels, double C,
                               const TrainOptions& options = {}, const MulticlassSvm* warm_start = nullptr);

/// Pairwise voting; `kernel_row` holds kernel values against every training index.
/// Most votes wins, ties go to the smallest class index.
int predict_multiclass(const MulticlassSvm& model, std::span<const double> kernel_row);

/// nu-one-class SVM: minimize 0.5 a^T G a, 0 <= a_i <= 1/(nu T), sum a = 1.
struct OneClassModel {
    std::vector<double> dual_coeffs;
    double offset = 0.0;
    double nu = 0.1;
    std::vector<std::size_t> support_indices;
    double dual_objective = 0.0;  // 0.5 a^T G a
    double kkt_gap = 0.0;
    std::size_t iterations = 0;
};

/// The offset is the ceil(nu T)-th smallest training value of (G a)_i, so that this training
/// point scores exactly zero.
OneClassModel train_one_class(const Matrix& gram, double nu, const TrainOptions& options = {});

/// sum_i a_i K_i - offset; positive means inside the learned region. `self_kernel` (K(p, p))
/// is accepted for interface symmetry with distance-based variants and does not enter the
/// nu formulation.
double score_one_class(const OneClassModel& model, std::span<const double> kernel_row,
                       double self_kernel = 0.0);

/// epsilon-insensitive support vector regression.
struct SvrModel {
    std::vector<double> dual_diff;  // alpha_i - alpha_i^*, in [-C, C]
    double bias = 0.0;
    double epsilon = 0.01;
    double C = 1.0;
    std::vector<std::size_t> support_indices;
    double dual_objective = 0.0;  // 0.5 b^T G b + eps sum(a + a*) - z^T b, with b = a - a*
    double kkt_gap = 0.0;
    std::size_t iterations = 0;
};

/// `warm_start` as for train_binary_svm, holding alpha - alpha^* from a smaller C.
SvrModel train_svr(const Matrix& gram, std::span<const double> targets, double C, double epsilon,
                   const TrainOptions& options = {}, std::span<const double> warm_start = {});

double predict_svr(const SvrModel& model, std::span<const double> kernel_row);

nlohmann::json to_json(const SvmModel& m);
nlohmann::json to_json(const MulticlassSvm& m);
nlohmann::json to_json(const OneClassModel& m);
nlohmann::json to_json(const SvrModel& m);
SvmModel svm_from_json(const nlohmann::json& j);
MulticlassSvm multiclass_from_json(const nlohmann::json& j);
OneClassModel one_class_from_json(const nlohmann::json& j);
SvrModel svr_from_json(const nlohmann::json& j);

}  // namespace distkern
