#include "distkern/gram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "distkern/error.hpp"
#include "distkern/parallel.hpp"

namespace distkern {

KernelSpec KernelSpec::polynomial(double c, int degree) {
    if (c < 0.0) throw ConfigError("polynomial offset c must be >= 0");
    if (degree < 1) throw ConfigError("polynomial degree must be >= 1");
    KernelSpec s;
    s.type = Type::polynomial;
    s.c = c;
    s.degree = degree;
    return s;
}

KernelSpec KernelSpec::gaussian(DistanceKind distance, SigmaRule sigma) {
    if (!(sigma.value > 0.0)) throw ConfigError("gaussian sigma (or factor) must be > 0");
    KernelSpec s;
    s.type = Type::gaussian;
    s.distance = distance;
    s.sigma = sigma;
    return s;
}

std::string KernelSpec::name() const {
    std::ostringstream out;
    switch (type) {
        case Type::linear: out << "linear"; break;
        case Type::polynomial: out << "polynomial(c=" << c << ",s=" << degree << ")"; break;
        case Type::gaussian:
            out << "gaussian(" << distance.name() << ",";
            if (sigma.median_scaled) out << "median*" << sigma.value;
            else out << "sigma=" << sigma.value;
            out << ")";
            break;
    }
    return out.str();
}

std::vector<Matrix> pairwise_terms(const PairEstimator& estimator, std::span<const Term> terms,
                                   unsigned jobs, EstimateDiagnostics* diag) {
    const std::size_t n = estimator.size();
    std::vector<Matrix> out(terms.size(), Matrix(n, n));
    std::vector<EstimateDiagnostics> cell_diag(n * n);
    parallel_for(n * n, jobs, [&](std::size_t cell) {
        const std::size_t i = cell / n;
        const std::size_t j = cell % n;
        try {
            const auto values = estimator.terms(i, j, terms, &cell_diag[cell]);
            for (std::size_t t = 0; t < terms.size(); ++t) out[t](i, j) = values[t];
        } catch (const std::exception& e) {
            throw DataError("estimation failed for pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + "): " + e.what());
        }
    });
    if (diag)
        for (const auto& d : cell_diag) *diag += d;
    return out;
}

Matrix pairwise_base(const PairEstimator& estimator, const KernelSpec& spec, unsigned jobs,
                     EstimateDiagnostics* diag) {
    if (!spec.uses_distance()) {
        const Term linear{0.0, 1.0};
        return std::move(pairwise_terms(estimator, std::span(&linear, 1), jobs, diag).front());
    }
    const auto terms = spec.distance.terms();
    const auto tables = pairwise_terms(estimator, terms, jobs, diag);
    const std::size_t n = estimator.size();
    Matrix out(n, n);
    std::vector<double> values(terms.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t t = 0; t < terms.size(); ++t) values[t] = tables[t](i, j);
            out(i, j) = spec.distance.compose(values, diag);
        }
    return out;
}

double median_positive_offdiagonal(const Matrix& m, std::span<const std::size_t> idx) {
    std::vector<std::size_t> all;
    if (idx.empty()) {
        all.resize(m.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        idx = all;
    }
    std::vector<double> values;
    for (std::size_t a : idx)
        for (std::size_t b : idx)
            if (a != b && m(a, b) > 0.0) values.push_back(m(a, b));
    if (values.empty()) return 1.0;
    std::sort(values.begin(), values.end());
    const std::size_t h = values.size() / 2;
    return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

double resolve_sigma(const SigmaRule& rule, const Matrix& sq_dist, std::span<const std::size_t> idx) {
    const double sigma = rule.median_scaled ? rule.value * median_positive_offdiagonal(sq_dist, idx) : rule.value;
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("resolved gaussian sigma is not positive");
    return sigma;
}

Matrix apply_kernel(const Matrix& base, const KernelSpec& spec, double sigma) {
    Matrix out(base.rows(), base.cols());
    auto in = base.data();
    auto o = out.data();
    switch (spec.type) {
        case KernelSpec::Type::linear:
            return base;
        case KernelSpec::Type::polynomial:
            for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::pow(spec.c + in[i], spec.degree);
            return out;
        case KernelSpec::Type::gaussian: {
            const double scale = -0.5 / (sigma * sigma);
            for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::exp(scale * in[i]);
            return out;
        }
    }
    return out;
}

GramMatrix build_gram(std::span<const SampleSet> sets, const KernelSpec& spec, int div_k,
                      const NeighborConfig& cfg, unsigned jobs, EstimateDiagnostics* diag) {
    if (sets.size() < 2) throw DataError("a Gram matrix needs at least two sets");
    NeighborConfig c = cfg;
    c.k = div_k;
    const PairEstimator estimator(sets, c, jobs);
    const Matrix base = pairwise_base(estimator, spec, jobs, diag);
    const double sigma = spec.uses_distance() ? resolve_sigma(spec.sigma, base) : 1.0;
    return GramMatrix{apply_kernel(base, spec, sigma)};
}

GramMatrix symmetrize(const GramMatrix& g) {
    if (!g.values.square()) throw std::invalid_argument("symmetrize: matrix is not square");
    GramMatrix out = g;
    const std::size_t n = g.values.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (g.values(i, j) + g.values(j, i));
            out.values(i, j) = v;
            out.values(j, i) = v;
        }
    out.symmetric = true;
    return out;
}

EigenDecomposition eigh(const Matrix& m) {
    if (!m.square()) throw std::invalid_argument("eigh: matrix is not square");
    const std::size_t n = m.rows();
    double max_abs = 0.0;
    for (double v : m.data()) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs_asymmetry(m) > 1e-12 * std::max(1.0, max_abs))
        throw std::invalid_argument("eigh: matrix is not symmetric");

    Matrix a = m;
    Matrix vt = Matrix::identity(n);  // row j holds eigenvector j
    const double target = 1e-12 * frobenius_norm(m);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    for (; sweep <= kMaxSweeps; ++sweep) {
        if (off_norm() <= target) break;
        if (sweep == kMaxSweeps)
            throw ConvergenceError("eigh: Jacobi did not converge in 100 sweeps");
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                auto rp = a.row(p);
                auto rq = a.row(q);
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double x = rp[r];
                    const double y = rq[r];
                    rp[r] = c * x - s * y;
                    rq[r] = s * x + c * y;
                    a(r, p) = rp[r];
                    a(r, q) = rq[r];
                }
                auto vp = vt.row(p);
                auto vq = vt.row(q);
                for (std::size_t r = 0; r < n; ++r) {
                    const double x = vp[r];
                    const double y = vq[r];
                    vp[r] = c * x - s * y;
                    vq[r] = s * x + c * y;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        auto v = vt.row(order[j]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = v[r];
    }
    return out;
}

namespace {

/// V diag(max(lambda, 0)) V^T, symmetrized exactly.
Matrix clipped_reconstruction(const EigenDecomposition& e) {
    const std::size_t n = e.values.size();
    Matrix out(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lambda = e.values[j];
        if (lambda <= 0.0) continue;
        for (std::size_t r = 0; r < n; ++r) {
            const double vr = lambda * e.vectors(r, j);
            if (vr == 0.0) continue;
            auto row = out.row(r);
            for (std::size_t c = r; c < n; ++c) row[c] += vr * e.vectors(c, j);
        }
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < r; ++c) out(r, c) = out(c, r);
    return out;
}

}  // namespace

GramMatrix project_psd(const GramMatrix& g) {
    if (!g.symmetric) throw std::invalid_argument("project_psd: matrix is not flagged symmetric");
    const auto e = eigh(g.values);
    GramMatrix out;
    out.values = clipped_reconstruction(e);
    out.symmetric = true;
    out.psd_projected = true;
    out.min_eigenvalue_before = e.values.empty() ? 0.0 : e.values.back();
    return out;
}

GramMatrix project_psd_block(const GramMatrix& g, std::span<const std::size_t> block) {
    if (!g.symmetric) throw std::invalid_argument("project_psd_block: matrix is not flagged symmetric");
    GramMatrix sub{g.values.submatrix(block), true};
    const GramMatrix projected = project_psd(sub);
    GramMatrix out = g;
    for (std::size_t a = 0; a < block.size(); ++a)
        for (std::size_t b = 0; b < block.size(); ++b) out.values(block[a], block[b]) = projected.values(a, b);
    out.psd_projected = block.size() == g.values.rows();
    out.min_eigenvalue_before = projected.min_eigenvalue_before;
    return out;
}

}  // namespace distkern
