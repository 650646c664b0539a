#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distkern/matrix.hpp"

namespace distkern {

struct SolverOptions {
    double tolerance = 1e-6;          // stop when the maximal KKT violation m(a) - M(a) < tolerance
    std::size_t max_iterations = 1'000'000;
};

/// min 0.5 a^T Q a + p^T a  s.t.  y^T a = const, 0 <= a_t <= upper_t, with y_t in {+1, -1}.
/// Q is the sign-folded matrix Q_ij = y_i y_j K_ij and must be symmetric PSD.
struct QpProblem {
    const Matrix* q = nullptr;
    std::span<const double> p;
    std::span<const int> y;
    std::span<const double> upper;
    std::span<const double> initial;  // feasible start; empty means all zeros
};

struct QpSolution {
    std::vector<double> alpha;
    std::vector<double> gradient;  // Q a + p
    double objective = 0.0;        // 0.5 a^T Q a + p^T a
    double kkt_gap = 0.0;          // m(a) - M(a) at exit
    std::size_t iterations = 0;
};

/// Sequential minimal optimization. The first working variable is the maximal KKT violator;
/// the second is chosen among violators by the second-order gain estimate. No shrinking.
/// Throws ConvergenceError when max_iterations is reached.
QpSolution solve_smo(const QpProblem& problem, const SolverOptions& options = {});

/// Objective 0.5 a^T Q a + p^T a.
double qp_objective(const Matrix& q, std::span<const double> p, std::span<const double> alpha);

}  // namespace distkern
