#include "distkern/divergence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "distkern/error.hpp"
#include "distkern/parallel.hpp"

namespace distkern {

namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczosCoeffs = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

/// Weighted sum over points of rho^(-d alpha) nu^(-d beta), with the flooring rules.
double weighted_sum(std::span<const double> rho, std::span<const double> nu, int dim, double alpha,
                    double beta, EstimateDiagnostics* diag) {
    const double ea = -static_cast<double>(dim) * alpha;
    const double eb = -static_cast<double>(dim) * beta;
    std::size_t clamped = 0;
    double sum = 0.0;
    auto factor = [&clamped](double dist, double expo) {
        if (expo == 0.0) return 0.0;  // log-contribution of x^0
        if (expo < 0.0 && dist < kDistanceFloor) {
            ++clamped;
            dist = kDistanceFloor;
        }
        return expo * std::log(dist);  // dist == 0 with expo > 0 gives -inf, i.e. a zero term
    };
    for (std::size_t i = 0; i < rho.size(); ++i) sum += std::exp(factor(rho[i], ea) + factor(nu[i], eb));
    if (diag) diag->clamped_distances += clamped;
    return sum;
}

// D_{a,b}(p||p) = D_{a+b,0}(p||p). Pairing a sample with itself makes nu equal rho, so the
// cross-sample correction no longer applies; the within-set form is the consistent estimate.
DivergenceSpec self_spec(const DivergenceSpec& s) { return {s.alpha + s.beta, 0.0, s.k}; }

}  // namespace

double gamma_function(double x) {
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        if (x == std::floor(x)) throw ConfigError("Gamma function pole at " + std::to_string(x));
        return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_function(1.0 - x));
    }
    x -= 1.0;
    double a = kLanczosCoeffs[0];
    const double t = x + kLanczosG + 0.5;
    for (std::size_t i = 1; i < kLanczosCoeffs.size(); ++i) a += kLanczosCoeffs[i] / (x + static_cast<double>(i));
    return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

double unit_ball_volume(int d) {
    if (d < 1) throw ConfigError("dimension must be >= 1");
    const double half = 0.5 * d;
    return std::pow(std::numbers::pi, half) / gamma_function(half + 1.0);
}

double correction_constant(int k, int d, double alpha, double beta) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(k - alpha > 0.0) || !(k - beta > 0.0)) {
        std::ostringstream msg;
        msg << "non-positive Gamma argument: k=" << k << ", alpha=" << alpha << ", beta=" << beta;
        throw ConfigError(msg.str());
    }
    const double gk = gamma_function(static_cast<double>(k));
    const double ratio = (gk / gamma_function(k - alpha)) * (gk / gamma_function(k - beta));
    return std::pow(unit_ball_volume(d), -alpha - beta) * ratio;
}

bool DivergenceSpec::consistent() const noexcept {
    return k > 2.0 * std::max(std::abs(alpha), std::abs(beta)) + 1.0;
}

double estimate_from_distances(std::span<const double> rho, std::span<const double> nu, std::size_t m,
                               int dim, const DivergenceSpec& spec, EstimateDiagnostics* diag) {
    if (rho.size() != nu.size()) throw DataError("rho and nu lengths differ");
    if (rho.size() < 2) throw DataError("need at least two points in the first sample");
    const double b = correction_constant(spec.k, dim, spec.alpha, spec.beta);
    if (diag && !spec.consistent()) ++diag->inconsistent_specs;
    const double n = static_cast<double>(rho.size());
    const double mean = weighted_sum(rho, nu, dim, spec.alpha, spec.beta, diag) / n;
    return b * mean * std::pow(n - 1.0, -spec.alpha) * std::pow(static_cast<double>(m), -spec.beta);
}

double estimate_D(const SampleSet& x, const SampleSet& y, const DivergenceSpec& spec,
                  const NeighborConfig& cfg, EstimateDiagnostics* diag) {
    if (x.dim() != y.dim()) throw DataError("dimension mismatch between '" + x.id() + "' and '" + y.id() + "'");
    const auto rho = knn_within(x, spec.k, cfg.backend);
    if (&x == &y || x.points() == y.points())
        return estimate_from_distances(rho, rho, x.size(), static_cast<int>(x.dim()), self_spec(spec), diag);
    const auto nu = knn_cross(x, y, spec.k, cfg.backend);
    return estimate_from_distances(rho, nu, y.size(), static_cast<int>(x.dim()), spec, diag);
}

DistanceKind DistanceKind::renyi(double alpha) {
    if (alpha == 1.0 || !std::isfinite(alpha)) throw ConfigError("Renyi alpha must be finite and != 1");
    return {Type::renyi, alpha};
}

std::vector<Term> DistanceKind::terms() const {
    switch (type) {
        case Type::l2: return {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 2.0}};
        case Type::hellinger: return {{-0.5, 0.5}};
        case Type::renyi: return {{alpha - 1.0, 1.0 - alpha}};
    }
    return {};
}

double DistanceKind::compose(std::span<const double> v, EstimateDiagnostics* diag) const {
    auto clip = [diag](double value, double lo, double hi) {
        if (value < lo || value > hi) {
            if (diag) ++diag->clipped_distances;
            return std::clamp(value, lo, hi);
        }
        return value;
    };
    switch (type) {
        case Type::l2:
            return clip(v[0] - 2.0 * v[1] + v[2], 0.0, std::numeric_limits<double>::infinity());
        case Type::hellinger:
            return clip(1.0 - v[0], 0.0, 1.0);
        case Type::renyi: {
            double d = v[0];
            if (!(d >= kRenyiLogFloor)) {
                if (diag) ++diag->floored_logs;
                d = kRenyiLogFloor;
            }
            const double r = std::log(d) / (alpha - 1.0);
            return r * r;
        }
    }
    return 0.0;
}

std::string DistanceKind::name() const {
    switch (type) {
        case Type::l2: return "l2";
        case Type::hellinger: return "hellinger";
        case Type::renyi: {
            std::ostringstream s;
            s << "renyi:" << alpha;
            return s.str();
        }
    }
    return "?";
}

DistanceKind DistanceKind::parse(const std::string& text, double alpha) {
    if (text == "l2") return l2();
    if (text == "hellinger") return hellinger();
    if (text == "kl") return kl();
    if (text == "renyi") return renyi(alpha);
    if (text.rfind("renyi:", 0) == 0) {
        try {
            return renyi(std::stod(text.substr(6)));
        } catch (const std::invalid_argument&) {
        }
    }
    throw ConfigError("unknown distance '" + text + "' (expected l2, hellinger, kl, renyi, renyi:<alpha>)");
}

double squared_distance(const SampleSet& x, const SampleSet& y, const DistanceKind& kind,
                        const NeighborConfig& cfg, EstimateDiagnostics* diag) {
    const auto terms = kind.terms();
    std::vector<double> values;
    values.reserve(terms.size());
    for (const auto& t : terms) values.push_back(estimate_D(x, y, {t.alpha, t.beta, cfg.k}, cfg, diag));
    return kind.compose(values, diag);
}

PairEstimator::PairEstimator(std::span<const SampleSet> sets, const NeighborConfig& cfg, unsigned jobs)
    : sets_(sets), cfg_(cfg) {
    for (const auto& s : sets)
        if (s.dim() != sets.front().dim())
            throw DataError("dimension mismatch: set '" + s.id() + "' differs from '" + sets.front().id() + "'");
    indices_.reserve(sets.size());
    for (const auto& s : sets) indices_.emplace_back(s, cfg.backend);
    rho_.resize(sets.size());
    parallel_for(sets.size(), jobs, [&](std::size_t i) { rho_[i] = indices_[i].within(cfg_.k); });
}

std::vector<double> PairEstimator::terms(std::size_t i, std::size_t j, std::span<const Term> wanted,
                                         EstimateDiagnostics* diag) const {
    const bool self = i == j || sets_[i].points() == sets_[j].points();
    const auto nu = self ? rho_.at(i) : indices_.at(j).cross(sets_[i], cfg_.k);
    std::vector<double> out;
    out.reserve(wanted.size());
    const int dim = static_cast<int>(sets_[i].dim());
    for (const auto& t : wanted) {
        const DivergenceSpec spec{t.alpha, t.beta, cfg_.k};
        out.push_back(self ? estimate_from_distances(rho_.at(i), nu, sets_[i].size(), dim, self_spec(spec), diag)
                           : estimate_from_distances(rho_.at(i), nu, sets_[j].size(), dim, spec, diag));
    }
    return out;
}

}  // namespace distkern
