#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "distkern/neighbors.hpp"
#include "distkern/sampleset.hpp"

namespace distkern {

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with reflection below 0.5.
double gamma_function(double x);

/// Volume of the d-dimensional unit ball, pi^(d/2) / Gamma(d/2 + 1).
double unit_ball_volume(int d);

/// Bias correction c_d^(-alpha-beta) * Gamma(k)^2 / (Gamma(k-alpha) * Gamma(k-beta)).
/// Throws ConfigError when k - alpha or k - beta is not positive.
double correction_constant(int k, int d, double alpha, double beta);

/// Which functional D_{alpha,beta}(p||q) = \int p^alpha q^beta p to estimate.
struct DivergenceSpec {
    double alpha = 0.0;
    double beta = 0.0;
    int k = 5;

    /// k > 2 max(|alpha|, |beta|) + 1; estimates still run when this fails.
    bool consistent() const noexcept;
};

/// Floor applied to k-NN distances raised to a negative power.
inline constexpr double kDistanceFloor = 1e-12;
/// Floor applied to D inside the Renyi logarithm.
inline constexpr double kRenyiLogFloor = 1e-300;

/// Counters describing numerical repairs made during estimation.
struct EstimateDiagnostics {
    std::size_t clamped_distances = 0;  // zero/tiny distances floored before a negative power
    std::size_t floored_logs = 0;       // Renyi log arguments floored
    std::size_t clipped_distances = 0;  // composed distances clipped into their valid range
    std::size_t inconsistent_specs = 0; // terms evaluated with k <= 2 max(|a|,|b|) + 1

    EstimateDiagnostics& operator+=(const EstimateDiagnostics& o) noexcept {
        clamped_distances += o.clamped_distances;
        floored_logs += o.floored_logs;
        clipped_distances += o.clipped_distances;
        inconsistent_specs += o.inconsistent_specs;
        return *this;
    }
};

/// Exponent pair of one D term.
struct Term {
    double alpha;
    double beta;
    bool operator==(const Term&) const = default;
};

/// Evaluates B / (n (n-1)^alpha m^beta) * sum_i rho_i^(-d alpha) nu_i^(-d beta) from
/// precomputed k-th neighbor distances. `m` is the size of the second sample.
double estimate_from_distances(std::span<const double> rho, std::span<const double> nu,
                               std::size_t m, int dim, const DivergenceSpec& spec,
                               EstimateDiagnostics* diag = nullptr);

/// Estimate of D_{alpha,beta}(p||q) from x ~ p and y ~ q. Uses spec.k; cfg supplies the backend.
double estimate_D(const SampleSet& x, const SampleSet& y, const DivergenceSpec& spec,
                  const NeighborConfig& cfg = {}, EstimateDiagnostics* diag = nullptr);

/// Squared distances that can be composed from D terms.
struct DistanceKind {
    enum class Type { l2, hellinger, renyi };
    Type type = Type::hellinger;
    double alpha = 0.0;  // renyi only

    static DistanceKind l2() { return {Type::l2, 0.0}; }
    static DistanceKind hellinger() { return {Type::hellinger, 0.0}; }
    /// Squared Renyi-alpha divergence; alpha != 1.
    static DistanceKind renyi(double alpha);
    /// KL proxy: squared Renyi divergence at alpha = 0.99.
    static DistanceKind kl() { return renyi(0.99); }

    /// D terms this distance is composed from, in the order compose() expects.
    std::vector<Term> terms() const;
    /// Combines term estimates into a squared distance, clipping into the valid range.
    double compose(std::span<const double> values, EstimateDiagnostics* diag = nullptr) const;

    std::string name() const;
    /// Parses "l2", "hellinger", "kl", "renyi" (uses `alpha`), or "renyi:0.9".
    static DistanceKind parse(const std::string& text, double alpha = 0.9);
};

/// Squared distance between the densities behind x and y, composed from D estimates with
/// neighbor index cfg.k. Always >= 0.
double squared_distance(const SampleSet& x, const SampleSet& y, const DistanceKind& kind,
                        const NeighborConfig& cfg = {}, EstimateDiagnostics* diag = nullptr);

/// Per-set neighbor structures for estimating many pairs over one collection of sets.
/// Construction computes each set's within-set distances once; term() calls are then
/// independent and may run concurrently.
class PairEstimator {
public:
    PairEstimator(std::span<const SampleSet> sets, const NeighborConfig& cfg, unsigned jobs = 1);

    std::size_t size() const noexcept { return sets_.size(); }
    const NeighborConfig& config() const noexcept { return cfg_; }

    /// Estimates of each requested term for the ordered pair (x = sets[i], y = sets[j]).
    std::vector<double> terms(std::size_t i, std::size_t j, std::span<const Term> wanted,
                              EstimateDiagnostics* diag = nullptr) const;

private:
    std::span<const SampleSet> sets_;
    NeighborConfig cfg_;
    std::vector<NeighborIndex> indices_;
    std::vector<std::vector<double>> rho_;
};

}  // namespace distkern
