#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distkern/embed.hpp"
#include "distkern/gram.hpp"
#include "distkern/learners.hpp"
#include "distkern/sampleset.hpp"

namespace distkern {

enum class Mode { transductive, inductive };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

/// C values 2^-9, 2^-6, ..., 2^21.
std::vector<double> default_c_grid();
/// Gaussian width factors 2^-4, 2^-2, ..., 2^10 (times the median squared distance).
std::vector<double> default_sigma_grid();

/// Everything a run needs. Serializes to and from JSON; reports embed the resolved form.
struct RunConfig {
    std::string task = "classify";  // gram, classify, regress, anomaly, lle
    nlohmann::json data;             // {"manifest": path} or {"generator": name, ...}
    KernelSpec kernel = KernelSpec::gaussian(DistanceKind::renyi(0.9));
    int k = 5;
    Backend backend = Backend::automatic;
    std::vector<Mode> modes{Mode::transductive};
    std::vector<double> c_grid = default_c_grid();
    std::vector<double> sigma_grid = default_sigma_grid();
    std::size_t folds = 2;        // outer CV when the data has no train/test partition
    std::size_t repeats = 1;      // outer CV repetitions
    std::size_t inner_folds = 3;  // tuning CV
    std::size_t test_count = 50;  // regression split when the data has no partition
    std::size_t anomaly_train = 0;  // 0: half the sets, when the data has no partition
    double epsilon = 0.01;
    double nu = 0.1;
    double sigma_factor = 1.0;    // fixed width factor for anomaly and lle
    LleConfig lle;
    double angle_period = 3.141592653589793;  // lle evaluation: target periodicity (0 = none)
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    double tolerance = 1e-6;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults. Throws ConfigError on invalid values.
    static RunConfig from_json(const nlohmann::json& j);
    void validate() const;
};

nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);

/// Materializes the configured data source.
Dataset make_dataset(const nlohmann::json& data, std::uint64_t seed);

/// Kernel blocks for one evaluation: the training block (projected per mode) and the rows of
/// test-versus-train kernel values.
struct SplitKernel {
    Matrix train;
    Matrix test_rows;
    double sigma = 0.0;
    double min_eigenvalue_before = 0.0;
};

/// `base` holds per-pair base quantities for all sets. `universe` (train followed by test
/// indices) is projected jointly in transductive mode; inductive mode projects the training
/// block only and keeps raw symmetrized test values. Sigma resolves against the train block.
SplitKernel make_split_kernel(const Matrix& base, const KernelSpec& spec, double sigma_factor, Mode mode,
                              std::span<const std::size_t> train, std::span<const std::size_t> test);

struct TuneResult {
    double c = 1.0;
    double sigma_factor = 1.0;
    double score = 0.0;  // accuracy, or negative MSE for regression
    std::size_t tied = 1;
    std::size_t nonconverged_cells = 0;  // (sigma, C, fold) cells that hit the iteration cap
};

/// Grid search by inner CV over `train`. `targets` has one value per dataset set (class ids
/// as doubles for classification). Ties in score are broken uniformly at random from `seed`.
/// C is swept upwards with warm starts; a configuration whose solver hits the iteration cap
/// in any inner fold is not eligible, and so is every larger C for that width and fold.
/// Throws ConvergenceError when no configuration is eligible.
TuneResult tune(const Matrix& base, const KernelSpec& spec, Mode mode, std::span<const std::size_t> train,
                std::span<const double> targets, bool classification, const RunConfig& cfg, std::uint64_t seed);

/// Builds the per-pair base matrix for the dataset (the expensive step).
Matrix compute_base(const Dataset& data, const RunConfig& cfg, EstimateDiagnostics* diag = nullptr);

nlohmann::json run_classify(const Dataset& data, const RunConfig& cfg, const Matrix* base = nullptr);
nlohmann::json run_regress(const Dataset& data, const RunConfig& cfg, const Matrix* base = nullptr);
nlohmann::json run_anomaly(const Dataset& data, const RunConfig& cfg, const Matrix* base = nullptr);
nlohmann::json run_lle(const Dataset& data, const RunConfig& cfg, const Matrix* base = nullptr);

/// Dispatches on cfg.task. Non-null `out_dir` receives CSV tables next to the report.
nlohmann::json run_task(const Dataset& data, const RunConfig& cfg,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// A preset is a config object, optionally with "variants": a list of objects (each with a
/// "name") merged over the shared keys. Returns one named config per variant, or a single
/// config named after the task.
std::vector<std::pair<std::string, RunConfig>> expand_preset(const nlohmann::json& preset);

/// Runs every variant of a preset. `adjust` may override fields (jobs, seed, ...) before each
/// run. Variant outputs go to out_dir/<variant name> when out_dir is set.
nlohmann::json run_preset(const nlohmann::json& preset, const std::function<void(RunConfig&)>& adjust = {},
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Fraction of sets whose nearest embedded neighbor is one of their two nearest sets by
/// target value (distance taken modulo `period` when period > 0).
double neighbor_preservation(const Matrix& coords, std::span<const double> targets, double period);

/// Writes a matrix as CSV with 17 significant digits.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace distkern
