#include "distkern/smo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "distkern/error.hpp"

namespace distkern {

namespace {
constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double qp_objective(const Matrix& q, std::span<const double> p, std::span<const double> alpha) {
    double obj = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] == 0.0) continue;
        auto row = q.row(i);
        double qa = 0.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) qa += row[j] * alpha[j];
        obj += alpha[i] * (0.5 * qa + p[i]);
    }
    return obj;
}

QpSolution solve_smo(const QpProblem& prob, const SolverOptions& options) {
    if (!prob.q || !prob.q->square()) throw std::invalid_argument("solve_smo: Q must be square");
    const Matrix& q = *prob.q;
    const std::size_t n = q.rows();
    if (prob.p.size() != n || prob.y.size() != n || prob.upper.size() != n ||
        (!prob.initial.empty() && prob.initial.size() != n))
        throw std::invalid_argument("solve_smo: vector lengths do not match Q");

    QpSolution sol;
    sol.alpha.assign(n, 0.0);
    if (!prob.initial.empty()) sol.alpha.assign(prob.initial.begin(), prob.initial.end());
    auto& a = sol.alpha;
    auto& g = sol.gradient;
    g.assign(prob.p.begin(), prob.p.end());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == 0.0) continue;
        auto row = q.row(i);
        for (std::size_t t = 0; t < n; ++t) g[t] += a[i] * row[t];
    }

    const auto& y = prob.y;
    const auto& ub = prob.upper;
    auto in_up = [&](std::size_t t) { return y[t] > 0 ? a[t] < ub[t] : a[t] > 0.0; };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0.0 : a[t] < ub[t]; };

    for (;;) {
        // First variable: maximal violator in I_up.
        double gmax = -kInf;
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (in_up(t) && -y[t] * g[t] > gmax) {
                gmax = -y[t] * g[t];
                i = t;
            }
        // Second variable: best second-order decrease among violators in I_low.
        double gmax2 = -kInf;
        double best = kInf;
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double yg = y[t] * g[t];
            gmax2 = std::max(gmax2, yg);
            if (i == n) continue;
            const double b = gmax + yg;
            if (b > 0.0) {
                double quad = q(i, i) + q(t, t) - 2.0 * y[i] * y[t] * q(i, t);
                if (quad <= 0.0) quad = kTau;
                const double gain = -(b * b) / quad;
                if (gain < best) {
                    best = gain;
                    j = t;
                }
            }
        }
        sol.kkt_gap = (i == n || gmax2 == -kInf) ? 0.0 : std::max(0.0, gmax + gmax2);
        if (i == n || j == n || sol.kkt_gap < options.tolerance) break;
        if (sol.iterations >= options.max_iterations)
            throw ConvergenceError("SMO did not reach KKT tolerance " + std::to_string(options.tolerance) +
                                   " within " + std::to_string(options.max_iterations) +
                                   " iterations (gap " + std::to_string(sol.kkt_gap) + ")");
        ++sol.iterations;

        const double old_i = a[i];
        const double old_j = a[j];
        const double ci = ub[i];
        const double cj = ub[j];
        const double qij = q(i, j);
        if (y[i] != y[j]) {
            double quad = q(i, i) + q(j, j) + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0.0) {
                if (a[j] < 0.0) { a[j] = 0.0; a[i] = diff; }
            } else {
                if (a[i] < 0.0) { a[i] = 0.0; a[j] = -diff; }
            }
            if (diff > ci - cj) {
                if (a[i] > ci) { a[i] = ci; a[j] = ci - diff; }
            } else {
                if (a[j] > cj) { a[j] = cj; a[i] = cj + diff; }
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > ci) {
                if (a[i] > ci) { a[i] = ci; a[j] = sum - ci; }
            } else {
                if (a[j] < 0.0) { a[j] = 0.0; a[i] = sum; }
            }
            if (sum > cj) {
                if (a[j] > cj) { a[j] = cj; a[i] = sum - cj; }
            } else {
                if (a[i] < 0.0) { a[i] = 0.0; a[j] = sum; }
            }
        }

        const double di = a[i] - old_i;
        const double dj = a[j] - old_j;
        auto qi = q.row(i);
        auto qj = q.row(j);
        for (std::size_t t = 0; t < n; ++t) g[t] += qi[t] * di + qj[t] * dj;
    }

    sol.objective = 0.0;
    for (std::size_t t = 0; t < n; ++t) sol.objective += a[t] * (g[t] + prob.p[t]);
    sol.objective *= 0.5;
    return sol;
}

}  // namespace distkern
