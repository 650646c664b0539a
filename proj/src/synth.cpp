#include "distkern/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <string>

#include "distkern/error.hpp"
#include "distkern/rng.hpp"

namespace distkern::synth {

namespace {

std::string make_id(const char* prefix, std::size_t i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
    return buf;
}

void check_gaussian(const Gaussian& g) {
    const std::size_t d = g.mean.size();
    if (d == 0) throw ConfigError("gaussian needs a non-empty mean");
    if (g.cov.rows() != d || g.cov.cols() != d) throw ConfigError("gaussian covariance shape does not match mean");
    if (max_abs_asymmetry(g.cov) > 1e-12) throw ConfigError("gaussian covariance is not symmetric");
}

void draw_gaussian(Rng& rng, const std::vector<double>& mean, const Matrix& chol, std::span<double> out) {
    const std::size_t d = mean.size();
    double z[64];
    std::vector<double> big;
    double* zp = z;
    if (d > 64) {
        big.resize(d);
        zp = big.data();
    }
    for (std::size_t c = 0; c < d; ++c) zp[c] = rng.normal();
    for (std::size_t r = 0; r < d; ++r) {
        double v = mean[r];
        for (std::size_t c = 0; c <= r; ++c) v += chol(r, c) * zp[c];
        out[r] = v;
    }
}

/// log-determinant and inverse of a symmetric positive definite matrix via Cholesky.
double spd_logdet(const Matrix& m) {
    const Matrix l = cholesky(m);
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0)) throw ConfigError("matrix is not positive definite");
        s += 2.0 * std::log(l(i, i));
    }
    return s;
}

std::vector<double> spd_solve(const Matrix& m, std::span<const double> b) {
    const Matrix l = cholesky(m);
    const std::size_t n = b.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        if (!(l(i, i) > 0.0)) throw ConfigError("matrix is not positive definite");
        y[i] = s / l(i, i);
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

}  // namespace

Matrix cholesky(const Matrix& cov) {
    const std::size_t n = cov.rows();
    if (!cov.square()) throw ConfigError("cholesky: matrix is not square");
    Matrix l(n, n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(cov(i, i)));
    const double tol = 1e-12 * std::max(scale, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = cov(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d < -tol) throw ConfigError("covariance is not positive semi-definite");
        const double ljj = d > 0.0 ? std::sqrt(d) : 0.0;
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = cov(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (ljj > 0.0) l(i, j) = s / ljj;
            else if (std::abs(s) > tol) throw ConfigError("covariance is not positive semi-definite");
        }
    }
    return l;
}

Matrix rotation(double angle) {
    Matrix r(2, 2);
    r(0, 0) = std::cos(angle);
    r(0, 1) = -std::sin(angle);
    r(1, 0) = std::sin(angle);
    r(1, 1) = std::cos(angle);
    return r;
}

Matrix rotated_covariance(const Matrix& base_cov, double angle) {
    if (base_cov.rows() != 2 || base_cov.cols() != 2) throw ConfigError("rotated gaussian needs a 2x2 covariance");
    const Matrix r = rotation(angle);
    Matrix m = r * base_cov * r.transpose();
    // exact symmetry
    const double off = 0.5 * (m(0, 1) + m(1, 0));
    m(0, 1) = off;
    m(1, 0) = off;
    return m;
}

SampleSet sample(const GeneratorSpec& spec, const std::string& id) {
    if (spec.n_points == 0) throw ConfigError("n_points must be positive");
    Rng rng(spec.seed);
    const std::size_t n = spec.n_points;
    return std::visit(
        [&](const auto& fam) -> SampleSet {
            using T = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                check_gaussian(fam);
                const Matrix l = cholesky(fam.cov);
                Matrix pts(n, fam.mean.size());
                for (std::size_t i = 0; i < n; ++i) draw_gaussian(rng, fam.mean, l, pts.row(i));
                return SampleSet(std::move(pts), id);
            } else if constexpr (std::is_same_v<T, RotatedGaussian>) {
                const Matrix l = cholesky(rotated_covariance(fam.base_cov, fam.angle));
                const std::vector<double> mean(2, 0.0);
                Matrix pts(n, 2);
                for (std::size_t i = 0; i < n; ++i) draw_gaussian(rng, mean, l, pts.row(i));
                return SampleSet(std::move(pts), id);
            } else if constexpr (std::is_same_v<T, Beta>) {
                if (!(fam.a > 0.0) || !(fam.b > 0.0)) throw ConfigError("beta parameters must be positive");
                Matrix pts(n, 1);
                for (std::size_t i = 0; i < n; ++i) pts(i, 0) = rng.beta(fam.a, fam.b);
                return SampleSet(std::move(pts), id);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (fam.lo.empty() || fam.lo.size() != fam.hi.size()) throw ConfigError("uniform bounds mismatch");
                for (std::size_t c = 0; c < fam.lo.size(); ++c)
                    if (!(fam.lo[c] < fam.hi[c])) throw ConfigError("uniform needs lo < hi");
                Matrix pts(n, fam.lo.size());
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t c = 0; c < fam.lo.size(); ++c) pts(i, c) = rng.uniform(fam.lo[c], fam.hi[c]);
                return SampleSet(std::move(pts), id);
            } else {
                if (fam.components.empty() || fam.components.size() != fam.weights.size())
                    throw ConfigError("mixture needs one weight per component");
                double total = 0.0;
                for (double w : fam.weights) {
                    if (w < 0.0) throw ConfigError("mixture weights must be >= 0");
                    total += w;
                }
                if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
                std::vector<Matrix> chol;
                for (const auto& c : fam.components) {
                    check_gaussian(c);
                    if (c.mean.size() != fam.components.front().mean.size())
                        throw ConfigError("mixture components differ in dimension");
                    chol.push_back(cholesky(c.cov));
                }
                Matrix pts(n, fam.components.front().mean.size());
                for (std::size_t i = 0; i < n; ++i) {
                    double u = rng.uniform();
                    std::size_t c = 0;
                    while (c + 1 < fam.weights.size() && u >= fam.weights[c]) u -= fam.weights[c++];
                    draw_gaussian(rng, fam.components[c].mean, chol[c], pts.row(i));
                }
                return SampleSet(std::move(pts), id);
            }
        },
        spec.family);
}

double beta_skewness(double a, double b) {
    return 2.0 * (b - a) * std::sqrt(a + b + 1.0) / ((a + b + 2.0) * std::sqrt(a * b));
}

double rotated_gaussian_marginal_entropy(const Matrix& base_cov, double angle) {
    const double m11 = rotated_covariance(base_cov, angle)(0, 0);
    if (!(m11 > 0.0)) throw ConfigError("first marginal variance must be positive");
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * m11);
}

double gaussian_renyi_divergence(const Gaussian& p, const Gaussian& q, double alpha) {
    check_gaussian(p);
    check_gaussian(q);
    if (p.mean.size() != q.mean.size()) throw ConfigError("gaussians differ in dimension");
    if (alpha == 1.0) throw ConfigError("Renyi alpha must differ from 1");
    const std::size_t d = p.mean.size();
    Matrix mix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) mix(i, j) = alpha * q.cov(i, j) + (1.0 - alpha) * p.cov(i, j);
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < d; ++i) diff[i] = p.mean[i] - q.mean[i];
    double logdet_mix;
    std::vector<double> sol;
    try {
        logdet_mix = spd_logdet(mix);
        sol = spd_solve(mix, diff);
    } catch (const ConfigError&) {
        throw ConfigError("interpolated covariance alpha*Sq + (1-alpha)*Sp is not positive definite");
    }
    const double quad = std::inner_product(diff.begin(), diff.end(), sol.begin(), 0.0);
    const double logdet_p = spd_logdet(p.cov);
    const double logdet_q = spd_logdet(q.cov);
    return 0.5 * alpha * quad -
           (logdet_mix - (1.0 - alpha) * logdet_p - alpha * logdet_q) / (2.0 * (alpha - 1.0));
}

Matrix entropy_experiment_covariance() {
    Matrix s(2, 2);
    s(0, 0) = 0.29;
    s(0, 1) = -0.57;
    s(1, 0) = -0.57;
    s(1, 1) = 1.83;
    return s;
}

Dataset beta_skewness_dataset(std::size_t n_sets, std::size_t n_test, std::size_t n_points, std::uint64_t seed) {
    if (n_test >= n_sets) throw ConfigError("n_test must be smaller than n_sets");
    Rng params(derive_seed(seed, 0));
    std::vector<SampleSet> sets;
    RealTargets targets;
    std::vector<Partition> part;
    for (std::size_t i = 0; i < n_sets; ++i) {
        const double a = params.uniform(3.0, 20.0);
        sets.push_back(sample({Beta{a, 3.0}, n_points, derive_seed(seed, 1 + i)}, make_id("beta", i)));
        targets.push_back(beta_skewness(a, 3.0));
        part.push_back(i + n_test >= n_sets ? Partition::test : Partition::train);
    }
    return Dataset(std::move(sets), std::move(targets), std::move(part));
}

Dataset gaussian_entropy_dataset(std::size_t n_sets, std::size_t n_test, std::size_t n_points, std::size_t n_angles,
                                 std::uint64_t seed) {
    if (n_test >= n_sets) throw ConfigError("n_test must be smaller than n_sets");
    if (n_angles == 0) throw ConfigError("n_angles must be positive");
    const Matrix sigma = entropy_experiment_covariance();
    std::vector<SampleSet> sets;
    RealTargets targets;
    for (std::size_t i = 0; i < n_sets; ++i) {
        const double angle = static_cast<double>(i % n_angles + 1) * std::numbers::pi / static_cast<double>(n_angles);
        sets.push_back(sample({RotatedGaussian{sigma, angle}, n_points, derive_seed(seed, 1 + i)}, make_id("rot", i)));
        targets.push_back(rotated_gaussian_marginal_entropy(sigma, angle));
    }
    std::vector<std::size_t> order(n_sets);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0));
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<Partition> part(n_sets, Partition::train);
    for (std::size_t t = 0; t < n_test; ++t) part[order[t]] = Partition::test;
    return Dataset(std::move(sets), std::move(targets), std::move(part));
}

Dataset rotated_lle_dataset(std::size_t n_sets, std::size_t n_points, std::uint64_t seed) {
    Matrix sigma(2, 2);
    sigma(0, 0) = 9.0;
    sigma(1, 1) = 1.0;
    std::vector<SampleSet> sets;
    RealTargets angles;
    for (std::size_t i = 0; i < n_sets; ++i) {
        const double angle = static_cast<double>(i) / 20.0;
        sets.push_back(sample({RotatedGaussian{sigma, angle}, n_points, derive_seed(seed, 1 + i)}, make_id("lle", i)));
        angles.push_back(angle);
    }
    return Dataset(std::move(sets), std::move(angles));
}

Dataset mixture_classification_dataset(std::size_t sets_per_class, std::size_t n_points, double separation,
                                       std::uint64_t seed) {
    Rng params(derive_seed(seed, 0));
    std::vector<SampleSet> sets;
    ClassLabels labels;
    const Matrix eye = Matrix::identity(2);
    for (std::size_t i = 0; i < 2 * sets_per_class; ++i) {
        const int cls = static_cast<int>(i % 2);
        const double base = cls == 0 ? 0.0 : std::numbers::pi / 2.0;
        const double angle = base + params.uniform(-std::numbers::pi / 8.0, std::numbers::pi / 8.0);
        const double sx = 0.25 * params.normal();
        const double sy = 0.25 * params.normal();
        const double dx = separation * std::cos(angle);
        const double dy = separation * std::sin(angle);
        GaussianMixture mix{{Gaussian{{sx + dx, sy + dy}, eye}, Gaussian{{sx - dx, sy - dy}, eye}}, {0.5, 0.5}};
        sets.push_back(sample({mix, n_points, derive_seed(seed, 1 + i)}, make_id("mix", i)));
        labels.push_back(cls);
    }
    return Dataset(std::move(sets), std::move(labels));
}

Dataset planted_outlier_dataset(std::size_t n_normal, std::size_t n_points, std::size_t dim, double shift,
                                std::size_t n_train, std::uint64_t seed) {
    const std::size_t total = n_normal + 1;
    if (n_train < 2 || n_train > total) throw ConfigError("n_train must lie in [2, number of sets]");
    Rng rng(derive_seed(seed, 0));
    const auto planted = static_cast<std::size_t>(rng.below(total));
    std::vector<SampleSet> sets;
    ClassLabels labels;
    const Matrix eye = Matrix::identity(dim);
    for (std::size_t i = 0; i < total; ++i) {
        const bool outlier = i == planted;
        Gaussian g{std::vector<double>(dim, outlier ? shift : 0.0), eye};
        sets.push_back(sample({g, n_points, derive_seed(seed, 1 + i)}, make_id("grp", i)));
        labels.push_back(outlier ? 1 : 0);
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<Partition> part(total, Partition::test);
    for (std::size_t t = 0; t < n_train; ++t) part[order[t]] = Partition::train;
    return Dataset(std::move(sets), std::move(labels), std::move(part));
}

Dataset two_gaussian_classes_dataset(std::size_t sets_per_class, std::size_t n_points, std::size_t dim, double mu,
                                     std::uint64_t seed) {
    std::vector<SampleSet> sets;
    ClassLabels labels;
    const Matrix eye = Matrix::identity(dim);
    for (std::size_t i = 0; i < 2 * sets_per_class; ++i) {
        const int cls = static_cast<int>(i % 2);
        Gaussian g{std::vector<double>(dim, cls == 0 ? -mu : mu), eye};
        sets.push_back(sample({g, n_points, derive_seed(seed, 1 + i)}, make_id("cls", i)));
        labels.push_back(cls);
    }
    return Dataset(std::move(sets), std::move(labels));
}

}  // namespace distkern::synth
