#include "distkern/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "distkern/error.hpp"
#include "distkern/parallel.hpp"
#include "distkern/rng.hpp"
#include "distkern/synth.hpp"

namespace distkern {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Mode m) { return m == Mode::transductive ? "transductive" : "inductive"; }

Mode parse_mode(const std::string& s) {
    if (s == "transductive") return Mode::transductive;
    if (s == "inductive") return Mode::inductive;
    throw ConfigError("unknown mode '" + s + "' (expected transductive or inductive)");
}

std::vector<double> default_c_grid() {
    std::vector<double> g;
    for (int e = -9; e <= 21; e += 3) g.push_back(std::ldexp(1.0, e));
    return g;
}

std::vector<double> default_sigma_grid() {
    std::vector<double> g;
    for (int e = -4; e <= 10; e += 2) g.push_back(std::ldexp(1.0, e));
    return g;
}

// ---------------------------------------------------------------------------------------------
// Configuration

json kernel_to_json(const KernelSpec& spec) {
    switch (spec.type) {
        case KernelSpec::Type::linear: return {{"type", "linear"}};
        case KernelSpec::Type::polynomial: return {{"type", "polynomial"}, {"c", spec.c}, {"degree", spec.degree}};
        case KernelSpec::Type::gaussian: {
            json j{{"type", "gaussian"}};
            switch (spec.distance.type) {
                case DistanceKind::Type::l2: j["distance"] = "l2"; break;
                case DistanceKind::Type::hellinger: j["distance"] = "hellinger"; break;
                case DistanceKind::Type::renyi:
                    j["distance"] = "renyi";
                    j["alpha"] = spec.distance.alpha;
                    break;
            }
            if (spec.sigma.median_scaled) {
                j["sigma"] = "median-scaled";
                j["sigma_factor"] = spec.sigma.value;
            } else {
                j["sigma"] = spec.sigma.value;
            }
            return j;
        }
    }
    return {};
}

KernelSpec kernel_from_json(const json& j) {
    const std::string type = j.value("type", std::string("gaussian"));
    if (type == "linear") return KernelSpec::linear();
    if (type == "polynomial") return KernelSpec::polynomial(j.value("c", 0.0), j.value("degree", 1));
    if (type != "gaussian") throw ConfigError("unknown kernel type '" + type + "'");
    const DistanceKind dist = DistanceKind::parse(j.value("distance", std::string("hellinger")), j.value("alpha", 0.9));
    SigmaRule rule;
    if (j.contains("sigma") && j["sigma"].is_number()) {
        rule = SigmaRule::fixed(j["sigma"].get<double>());
    } else {
        const std::string s = j.value("sigma", std::string("median-scaled"));
        if (s != "median-scaled") throw ConfigError("sigma must be a number or \"median-scaled\"");
        rule = SigmaRule::median(j.value("sigma_factor", 1.0));
    }
    return KernelSpec::gaussian(dist, rule);
}

namespace {

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::brute: return "brute";
        case Backend::kdtree: return "kdtree";
        case Backend::automatic: return "auto";
    }
    return "auto";
}

Backend parse_backend(const std::string& s) {
    if (s == "brute") return Backend::brute;
    if (s == "kdtree") return Backend::kdtree;
    if (s == "auto") return Backend::automatic;
    throw ConfigError("unknown backend '" + s + "'");
}

}  // namespace

json RunConfig::to_json() const {
    json modes_json = json::array();
    for (Mode m : modes) modes_json.push_back(to_string(m));
    return {{"task", task},
            {"data", data},
            {"kernel", kernel_to_json(kernel)},
            {"k", k},
            {"backend", backend_name(backend)},
            {"modes", modes_json},
            {"c_grid", c_grid},
            {"sigma_grid", sigma_grid},
            {"folds", folds},
            {"repeats", repeats},
            {"inner_folds", inner_folds},
            {"test_count", test_count},
            {"anomaly_train", anomaly_train},
            {"epsilon", epsilon},
            {"nu", nu},
            {"sigma_factor", sigma_factor},
            {"lle", {{"kappa", lle.kappa}, {"out_dim", lle.out_dim}, {"regularization", lle.regularization}}},
            {"angle_period", angle_period},
            {"seed", seed},
            {"tolerance", tolerance}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        c.task = j.value("task", c.task);
        if (j.contains("data")) c.data = j["data"];
        if (j.contains("kernel")) c.kernel = kernel_from_json(j["kernel"]);
        c.k = j.value("k", c.k);
        if (j.contains("backend")) c.backend = parse_backend(j["backend"].get<std::string>());
        if (j.contains("modes")) {
            c.modes.clear();
            for (const auto& m : j["modes"]) c.modes.push_back(parse_mode(m.get<std::string>()));
        } else if (j.contains("mode")) {
            const auto m = j["mode"].get<std::string>();
            c.modes = m == "both" ? std::vector<Mode>{Mode::transductive, Mode::inductive}
                                  : std::vector<Mode>{parse_mode(m)};
        }
        if (j.contains("c_grid")) c.c_grid = j["c_grid"].get<std::vector<double>>();
        if (j.contains("sigma_grid")) c.sigma_grid = j["sigma_grid"].get<std::vector<double>>();
        c.folds = j.value("folds", c.folds);
        c.repeats = j.value("repeats", c.repeats);
        c.inner_folds = j.value("inner_folds", c.inner_folds);
        c.test_count = j.value("test_count", c.test_count);
        c.anomaly_train = j.value("anomaly_train", c.anomaly_train);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.nu = j.value("nu", c.nu);
        c.sigma_factor = j.value("sigma_factor", c.sigma_factor);
        if (j.contains("lle")) {
            const auto& l = j["lle"];
            c.lle.kappa = l.value("kappa", c.lle.kappa);
            c.lle.out_dim = l.value("out_dim", c.lle.out_dim);
            c.lle.regularization = l.value("regularization", c.lle.regularization);
        }
        c.angle_period = j.value("angle_period", c.angle_period);
        c.seed = j.value("seed", c.seed);
        c.tolerance = j.value("tolerance", c.tolerance);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    c.validate();
    return c;
}

void RunConfig::validate() const {
    static const std::vector<std::string> tasks{"gram", "classify", "regress", "anomaly", "lle"};
    if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) throw ConfigError("unknown task '" + task + "'");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (modes.empty()) throw ConfigError("at least one mode is required");
    if (c_grid.empty() || sigma_grid.empty()) throw ConfigError("tuning grids must be non-empty");
    for (double c : c_grid)
        if (!(c > 0.0)) throw ConfigError("C grid values must be positive");
    for (double s : sigma_grid)
        if (!(s > 0.0)) throw ConfigError("sigma grid values must be positive");
    if (folds < 2 || inner_folds < 2) throw ConfigError("fold counts must be >= 2");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu must lie in (0, 1]");
    if (!(sigma_factor > 0.0)) throw ConfigError("sigma_factor must be positive");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
}

Dataset make_dataset(const json& data, std::uint64_t seed) {
    if (data.is_null()) throw ConfigError("no data source configured");
    if (data.contains("manifest")) return load_dataset(data["manifest"].get<std::string>());
    const std::string gen = data.value("generator", std::string{});
    const std::uint64_t s = data.value("seed", seed);
    const std::size_t pts = data.value("n_points", std::size_t{0});
    auto points = [&](std::size_t dflt) { return pts ? pts : dflt; };
    if (gen == "beta-skewness")
        return synth::beta_skewness_dataset(data.value("n_sets", 350), data.value("n_test", 50), points(500), s);
    if (gen == "gauss-entropy")
        return synth::gaussian_entropy_dataset(data.value("n_sets", 300), data.value("n_test", 50), points(500),
                                               data.value("n_angles", 150), s);
    if (gen == "rot-gauss-lle") return synth::rotated_lle_dataset(data.value("n_sets", 63), points(2000), s);
    if (gen == "mixture-classes")
        return synth::mixture_classification_dataset(data.value("sets_per_class", 100), points(500),
                                                     data.value("separation", 1.0), s);
    if (gen == "planted-outlier")
        return synth::planted_outlier_dataset(data.value("n_normal", 99), points(200), data.value("dim", 2),
                                              data.value("shift", 5.0), data.value("n_train", 50), s);
    if (gen == "two-gaussians")
        return synth::two_gaussian_classes_dataset(data.value("sets_per_class", 50), points(200), data.value("dim", 2),
                                                   data.value("mu", 3.0), s);
    throw ConfigError("unknown generator '" + gen + "'");
}

// ---------------------------------------------------------------------------------------------
// Kernel blocks and tuning

SplitKernel make_split_kernel(const Matrix& base, const KernelSpec& spec, double sigma_factor, Mode mode,
                              std::span<const std::size_t> train, std::span<const std::size_t> test) {
    std::vector<std::size_t> universe(train.begin(), train.end());
    universe.insert(universe.end(), test.begin(), test.end());
    const Matrix sub = base.submatrix(universe);
    std::vector<std::size_t> local_train(train.size());
    std::iota(local_train.begin(), local_train.end(), std::size_t{0});
    std::vector<std::size_t> local_test(test.size());
    std::iota(local_test.begin(), local_test.end(), train.size());

    SplitKernel out;
    if (spec.uses_distance()) {
        const double unit = spec.sigma.median_scaled ? median_positive_offdiagonal(sub, local_train) : spec.sigma.value;
        out.sigma = sigma_factor * unit;
        if (!(out.sigma > 0.0) || !std::isfinite(out.sigma)) throw ConfigError("resolved gaussian sigma is not positive");
    }
    const GramMatrix sym = symmetrize(GramMatrix{apply_kernel(sub, spec, out.sigma)});
    GramMatrix projected = mode == Mode::transductive ? project_psd(sym) : project_psd_block(sym, local_train);
    out.min_eigenvalue_before = projected.min_eigenvalue_before;
    out.train = projected.values.submatrix(local_train);
    const Matrix& test_source = mode == Mode::transductive ? projected.values : sym.values;
    out.test_rows = test_source.submatrix(local_test, local_train);
    return out;
}

namespace {

struct Scored {
    double value = 0.0;   // correct count or squared error sum
    double max_gap = 0.0;
};

/// Trains on `kernel.train` for one C and scores the test rows. `warm` carries the previous
/// model along an ascending C sweep (may be null).
struct WarmState {
    MulticlassSvm svm;
    std::vector<double> svr;
    bool valid = false;
};

Scored evaluate(const SplitKernel& kernel, std::span<const std::size_t> train, std::span<const std::size_t> test,
                std::span<const double> targets, bool classification, double c, const RunConfig& cfg,
                WarmState* warm = nullptr) {
    TrainOptions opts;
    opts.solver.tolerance = cfg.tolerance;
    Scored s;
    if (classification) {
        std::vector<int> y;
        for (std::size_t i : train) y.push_back(static_cast<int>(targets[i]));
        auto model = train_multiclass(kernel.train, y, c, opts, warm && warm->valid ? &warm->svm : nullptr);
        for (const auto& pw : model.models) s.max_gap = std::max(s.max_gap, pw.model.kkt_gap);
        for (std::size_t t = 0; t < test.size(); ++t)
            if (predict_multiclass(model, kernel.test_rows.row(t)) == static_cast<int>(targets[test[t]])) s.value += 1.0;
        if (warm) {
            warm->svm = std::move(model);
            warm->valid = true;
        }
    } else {
        std::vector<double> y;
        for (std::size_t i : train) y.push_back(targets[i]);
        auto model = train_svr(kernel.train, y, c, cfg.epsilon, opts,
                               warm && warm->valid ? std::span<const double>(warm->svr) : std::span<const double>{});
        s.max_gap = model.kkt_gap;
        for (std::size_t t = 0; t < test.size(); ++t) {
            const double e = predict_svr(model, kernel.test_rows.row(t)) - targets[test[t]];
            s.value += e * e;
        }
        if (warm) {
            warm->svr = std::move(model.dual_diff);
            warm->valid = true;
        }
    }
    return s;
}

std::vector<double> sigma_grid_for(const KernelSpec& spec, const RunConfig& cfg) {
    return spec.uses_distance() ? cfg.sigma_grid : std::vector<double>{1.0};
}

}  // namespace

TuneResult tune(const Matrix& base, const KernelSpec& spec, Mode mode, std::span<const std::size_t> train,
                std::span<const double> targets, bool classification, const RunConfig& cfg, std::uint64_t seed) {
    std::vector<int> classes;
    if (classification)
        for (std::size_t i : train) classes.push_back(static_cast<int>(targets[i]));
    const auto folds = split_folds(train, classes, cfg.inner_folds, derive_seed(seed, 1));
    const auto sigmas = sigma_grid_for(spec, cfg);
    const std::size_t nc = cfg.c_grid.size();
    std::vector<std::size_t> c_order(nc);
    std::iota(c_order.begin(), c_order.end(), std::size_t{0});
    std::stable_sort(c_order.begin(), c_order.end(),
                     [&](std::size_t a, std::size_t b) { return cfg.c_grid[a] < cfg.c_grid[b]; });

    // One unit per (sigma, fold): project once, then sweep C upwards with warm starts. A cell
    // that hits the iteration cap disqualifies itself and every larger C in that unit.
    struct Unit {
        std::vector<double> scores;
        std::vector<char> converged;
    };
    std::vector<Unit> units(sigmas.size() * folds.size());
    parallel_for(units.size(), cfg.jobs, [&](std::size_t u) {
        const std::size_t si = u / folds.size();
        const auto& fold = folds[u % folds.size()];
        const auto kernel = make_split_kernel(base, spec, sigmas[si], mode, fold.train, fold.test);
        auto& unit = units[u];
        unit.scores.assign(nc, 0.0);
        unit.converged.assign(nc, 0);
        WarmState warm;
        for (std::size_t ci : c_order) {
            try {
                unit.scores[ci] = evaluate(kernel, fold.train, fold.test, targets, classification, cfg.c_grid[ci], cfg, &warm).value;
                unit.converged[ci] = 1;
            } catch (const ConvergenceError&) {
                break;
            }
        }
    });

    const double total = static_cast<double>(train.size());
    std::vector<double> score(sigmas.size() * nc, 0.0);
    std::vector<char> eligible(sigmas.size() * nc, 1);
    std::size_t failed_cells = 0;
    for (std::size_t si = 0; si < sigmas.size(); ++si)
        for (std::size_t f = 0; f < folds.size(); ++f)
            for (std::size_t ci = 0; ci < nc; ++ci) {
                const auto& unit = units[si * folds.size() + f];
                score[si * nc + ci] += unit.scores[ci];
                if (!unit.converged[ci]) {
                    eligible[si * nc + ci] = 0;
                    ++failed_cells;
                }
            }
    for (double& s : score) s = classification ? s / total : -s / total;

    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < score.size(); ++x)
        if (eligible[x]) best = std::max(best, score[x]);
    std::vector<std::size_t> tied;
    for (std::size_t x = 0; x < score.size(); ++x)
        if (eligible[x] && score[x] == best) tied.push_back(x);
    if (tied.empty()) throw ConvergenceError("tuning: the solver failed to converge for every grid configuration");
    Rng rng(derive_seed(seed, 2));
    const std::size_t pick = tied[static_cast<std::size_t>(rng.below(tied.size()))];
    return {cfg.c_grid[pick % nc], sigmas[pick / nc], best, tied.size(), failed_cells};
}

Matrix compute_base(const Dataset& data, const RunConfig& cfg, EstimateDiagnostics* diag) {
    if (data.size() < 2) throw DataError("need at least two sets");
    NeighborConfig nc{cfg.k, cfg.backend};
    const PairEstimator estimator(data.sets(), nc, cfg.jobs);
    return pairwise_base(estimator, cfg.kernel, cfg.jobs, diag);
}

// ---------------------------------------------------------------------------------------------
// Tasks

namespace {

json diagnostics_json(const EstimateDiagnostics& d) {
    return {{"clamped_distances", d.clamped_distances},
            {"floored_logs", d.floored_logs},
            {"clipped_distances", d.clipped_distances},
            {"inconsistent_terms", d.inconsistent_specs}};
}

struct BaseHolder {
    Matrix owned;
    const Matrix* ptr = nullptr;
    EstimateDiagnostics diag;
};

void ensure_base(BaseHolder& h, const Dataset& data, const RunConfig& cfg, const Matrix* given) {
    if (given) {
        if (given->rows() != data.size() || given->cols() != data.size())
            throw DataError("precomputed base matrix does not match dataset size");
        h.ptr = given;
        return;
    }
    h.owned = compute_base(data, cfg, &h.diag);
    h.ptr = &h.owned;
}

std::pair<double, double> mean_std(std::span<const double> v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

struct Evaluation {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

std::vector<Evaluation> evaluations_for(const Dataset& data, const RunConfig& cfg, bool stratify) {
    std::vector<Evaluation> out;
    if (data.has_partition()) {
        auto train = data.indices_of(Partition::train);
        auto test = data.indices_of(Partition::test);
        if (train.empty() || test.empty()) throw DataError("partition needs both train and test sets");
        out.push_back({std::move(train), std::move(test)});
        return out;
    }
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        const auto folds = stratify ? split_folds(all, data.class_labels(), cfg.folds, derive_seed(cfg.seed, 100 + r))
                                    : split_folds(all, {}, cfg.folds, derive_seed(cfg.seed, 100 + r));
        for (const auto& f : folds) out.push_back({f.train, f.test});
    }
    return out;
}

std::vector<double> class_targets(const Dataset& data) {
    const auto& c = data.class_labels();
    return {c.begin(), c.end()};
}

}  // namespace

json run_classify(const Dataset& data, const RunConfig& cfg, const Matrix* base) {
    cfg.validate();
    if (!data.has_class_labels()) throw DataError("classification needs class labels");
    if (data.num_classes() < 2) throw DataError("classification needs at least two classes");
    const auto evals = evaluations_for(data, cfg, true);
    BaseHolder h;
    ensure_base(h, data, cfg, base);
    const auto targets = class_targets(data);

    json report{{"task", "classify"}, {"config", cfg.to_json()}, {"n_sets", data.size()},
                {"num_classes", data.num_classes()}, {"estimation", diagnostics_json(h.diag)}};
    json modes = json::object();
    for (Mode mode : cfg.modes) {
        std::vector<double> accs;
        json folds = json::array();
        for (std::size_t e = 0; e < evals.size(); ++e) {
            const auto& ev = evals[e];
            const auto tuned = tune(*h.ptr, cfg.kernel, mode, ev.train, targets, true, cfg, derive_seed(cfg.seed, 1000 + e));
            const auto kernel = make_split_kernel(*h.ptr, cfg.kernel, tuned.sigma_factor, mode, ev.train, ev.test);
            Scored s;
            try {
                s = evaluate(kernel, ev.train, ev.test, targets, true, tuned.c, cfg);
            } catch (const ConvergenceError& err) {
                throw ConvergenceError("evaluation fold " + std::to_string(e) + ": " + err.what());
            }
            const double acc = s.value / static_cast<double>(ev.test.size());
            accs.push_back(acc);
            folds.push_back({{"fold", e},
                             {"n_train", ev.train.size()},
                             {"n_test", ev.test.size()},
                             {"C", tuned.c},
                             {"sigma_factor", tuned.sigma_factor},
                             {"sigma", kernel.sigma},
                             {"tied_configs", tuned.tied},
                             {"inner_accuracy", tuned.score},
                             {"nonconverged_cells", tuned.nonconverged_cells},
                             {"min_eigenvalue_before", kernel.min_eigenvalue_before},
                             {"max_kkt_gap", s.max_gap},
                             {"accuracy", acc}});
        }
        const auto [mean, sd] = mean_std(accs);
        modes[to_string(mode)] = {{"mode", to_string(mode)}, {"fold_accuracies", accs}, {"mean_accuracy", mean},
                                  {"std_accuracy", sd}, {"folds", folds}};
    }
    report["results"] = modes;
    return report;
}

json run_regress(const Dataset& data, const RunConfig& cfg, const Matrix* base) {
    cfg.validate();
    if (!data.has_real_targets()) throw DataError("regression needs real-valued targets");
    Evaluation ev;
    if (data.has_partition()) {
        ev = evaluations_for(data, cfg, false).front();
    } else {
        if (cfg.test_count == 0 || cfg.test_count >= data.size()) throw ConfigError("test_count must be in [1, T)");
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, 7));
        rng.shuffle(std::span<std::size_t>(order));
        ev.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.test_count));
        ev.train.assign(order.begin() + static_cast<std::ptrdiff_t>(cfg.test_count), order.end());
        std::sort(ev.test.begin(), ev.test.end());
        std::sort(ev.train.begin(), ev.train.end());
    }
    BaseHolder h;
    ensure_base(h, data, cfg, base);
    const auto& targets = data.real_targets();

    json report{{"task", "regress"}, {"config", cfg.to_json()}, {"n_sets", data.size()},
                {"n_train", ev.train.size()}, {"n_test", ev.test.size()}, {"estimation", diagnostics_json(h.diag)}};
    json modes = json::object();
    for (Mode mode : cfg.modes) {
        const auto tuned = tune(*h.ptr, cfg.kernel, mode, ev.train, targets, false, cfg, derive_seed(cfg.seed, 1000));
        const auto kernel = make_split_kernel(*h.ptr, cfg.kernel, tuned.sigma_factor, mode, ev.train, ev.test);
        TrainOptions opts;
        opts.solver.tolerance = cfg.tolerance;
        std::vector<double> y;
        for (std::size_t i : ev.train) y.push_back(targets[i]);
        const auto model = train_svr(kernel.train, y, tuned.c, cfg.epsilon, opts);
        json predictions = json::array();
        double sse = 0.0;
        for (std::size_t t = 0; t < ev.test.size(); ++t) {
            const std::size_t idx = ev.test[t];
            const double pred = predict_svr(model, kernel.test_rows.row(t));
            sse += (pred - targets[idx]) * (pred - targets[idx]);
            predictions.push_back({{"index", idx}, {"id", data[idx].id()}, {"target", targets[idx]}, {"prediction", pred}});
        }
        const double rmse = std::sqrt(sse / static_cast<double>(ev.test.size()));
        modes[to_string(mode)] = {{"mode", to_string(mode)},
                                  {"rmse", rmse},
                                  {"C", tuned.c},
                                  {"sigma_factor", tuned.sigma_factor},
                                  {"sigma", kernel.sigma},
                                  {"tied_configs", tuned.tied},
                                  {"inner_mse", -tuned.score},
                                  {"nonconverged_cells", tuned.nonconverged_cells},
                                  {"min_eigenvalue_before", kernel.min_eigenvalue_before},
                                  {"kkt_gap", model.kkt_gap},
                                  {"support_vectors", model.support_indices.size()},
                                  {"predictions", predictions}};
    }
    report["results"] = modes;
    return report;
}

json run_anomaly(const Dataset& data, const RunConfig& cfg, const Matrix* base) {
    cfg.validate();
    const std::size_t n = data.size();
    std::vector<std::size_t> train;
    std::vector<std::size_t> rest;
    if (data.has_partition()) {
        train = data.indices_of(Partition::train);
        for (std::size_t i = 0; i < n; ++i)
            if (data.partition()[i] != Partition::train) rest.push_back(i);
    } else {
        const std::size_t count = cfg.anomaly_train ? cfg.anomaly_train : n / 2;
        if (count < 2 || count > n) throw ConfigError("anomaly_train must lie in [2, T]");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, 8));
        rng.shuffle(std::span<std::size_t>(order));
        train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
        rest.assign(order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
        std::sort(train.begin(), train.end());
        std::sort(rest.begin(), rest.end());
    }
    if (train.size() < 2) throw DataError("one-class training needs at least two sets");
    BaseHolder h;
    ensure_base(h, data, cfg, base);

    json report{{"task", "anomaly"}, {"config", cfg.to_json()}, {"n_sets", n}, {"n_train", train.size()},
                {"estimation", diagnostics_json(h.diag)}};
    json modes = json::object();
    for (Mode mode : cfg.modes) {
        const auto kernel = make_split_kernel(*h.ptr, cfg.kernel, cfg.sigma_factor, mode, train, rest);
        TrainOptions opts;
        opts.solver.tolerance = cfg.tolerance;
        const auto model = train_one_class(kernel.train, cfg.nu, opts);
        std::vector<double> scores(n);
        for (std::size_t a = 0; a < train.size(); ++a) scores[train[a]] = score_one_class(model, kernel.train.row(a));
        for (std::size_t t = 0; t < rest.size(); ++t) scores[rest[t]] = score_one_class(model, kernel.test_rows.row(t));
        std::vector<std::size_t> ranking(n);
        std::iota(ranking.begin(), ranking.end(), std::size_t{0});
        std::stable_sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
        json ranked = json::array();
        for (std::size_t r = 0; r < n; ++r)
            ranked.push_back({{"rank", r}, {"index", ranking[r]}, {"id", data[ranking[r]].id()}, {"score", scores[ranking[r]]}});
        const auto [mean, sd] = mean_std(scores);
        json res{{"mode", to_string(mode)},
                 {"sigma", kernel.sigma},
                 {"offset", model.offset},
                 {"support_vectors", model.support_indices.size()},
                 {"kkt_gap", model.kkt_gap},
                 {"min_eigenvalue_before", kernel.min_eigenvalue_before},
                 {"scores", scores},
                 {"score_mean", mean},
                 {"score_std", sd},
                 {"score_spread", *std::max_element(scores.begin(), scores.end()) - *std::min_element(scores.begin(), scores.end())},
                 {"most_anomalous", ranking.front()},
                 {"ranking", ranked}};
        if (data.has_class_labels()) {
            json planted = json::array();
            for (std::size_t r = 0; r < n; ++r)
                if (data.class_labels()[ranking[r]] != 0) planted.push_back({{"index", ranking[r]}, {"rank", r}});
            res["flagged_label_ranks"] = planted;
        }
        modes[to_string(mode)] = res;
    }
    report["results"] = modes;
    return report;
}

double neighbor_preservation(const Matrix& coords, std::span<const double> targets, double period) {
    const std::size_t n = coords.rows();
    if (targets.size() != n) throw DataError("target count does not match embedding");
    if (n < 3) throw DataError("need at least three sets to measure neighbor preservation");
    auto tdist = [&](std::size_t a, std::size_t b) {
        double d = std::abs(targets[a] - targets[b]);
        if (period > 0.0) {
            d = std::fmod(d, period);
            d = std::min(d, period - d);
        }
        return d;
    };
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t nearest = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0.0;
            for (std::size_t c = 0; c < coords.cols(); ++c) d += (coords(i, c) - coords(j, c)) * (coords(i, c) - coords(j, c));
            if (d < best) {
                best = d;
                nearest = j;
            }
        }
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        std::partial_sort(others.begin(), others.begin() + 2, others.end(), [&](std::size_t a, std::size_t b) {
            const double da = tdist(i, a);
            const double db = tdist(i, b);
            return da < db || (da == db && a < b);
        });
        if (nearest == others[0] || nearest == others[1]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

json run_lle(const Dataset& data, const RunConfig& cfg, const Matrix* base) {
    cfg.validate();
    BaseHolder h;
    ensure_base(h, data, cfg, base);
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto kernel = make_split_kernel(*h.ptr, cfg.kernel, cfg.sigma_factor, Mode::transductive, all, {});
    const auto weights = reconstruction_weights(kernel.train, cfg.lle);
    const auto emb = embed(weights, cfg.lle.out_dim);

    json rows = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto r = emb.coords.row(i);
        rows.push_back({{"id", data[i].id()}, {"coords", std::vector<double>(r.begin(), r.end())}});
    }
    double max_row_sum_error = 0.0;
    for (const auto& w : weights.weights)
        max_row_sum_error = std::max(max_row_sum_error, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    json report{{"task", "lle"},
                {"config", cfg.to_json()},
                {"n_sets", data.size()},
                {"estimation", diagnostics_json(h.diag)},
                {"sigma", kernel.sigma},
                {"min_eigenvalue_before", kernel.min_eigenvalue_before},
                {"eigenvalues", emb.eigenvalues},
                {"max_row_sum_error", max_row_sum_error},
                {"embedding", rows}};
    if (data.has_real_targets())
        report["neighbor_preservation"] = neighbor_preservation(emb.coords, data.real_targets(), cfg.angle_period);
    return report;
}

void write_matrix_csv(const Matrix& m, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    char buf[32];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

namespace {

json run_gram_task(const Dataset& data, const RunConfig& cfg, const std::optional<fs::path>& out_dir) {
    cfg.validate();
    BaseHolder h;
    ensure_base(h, data, cfg, nullptr);
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    double sigma = 0.0;
    if (cfg.kernel.uses_distance())
        sigma = cfg.sigma_factor * (cfg.kernel.sigma.median_scaled ? median_positive_offdiagonal(*h.ptr) : cfg.kernel.sigma.value);
    GramMatrix g = symmetrize(GramMatrix{apply_kernel(*h.ptr, cfg.kernel, sigma)});
    const Mode mode = cfg.modes.front();
    // The whole collection is treated as training data; inductive mode projects it the same way.
    g = project_psd(g);
    json sidecar{{"kernel", kernel_to_json(cfg.kernel)},
                 {"kernel_name", cfg.kernel.name()},
                 {"k", cfg.k},
                 {"mode", to_string(mode)},
                 {"sigma", sigma},
                 {"min_eigenvalue_before", g.min_eigenvalue_before},
                 {"ids", [&] {
                      std::vector<std::string> ids;
                      for (const auto& s : data.sets()) ids.push_back(s.id());
                      return ids;
                  }()}};
    if (out_dir) {
        fs::create_directories(*out_dir);
        write_matrix_csv(g.values, *out_dir / "gram.csv");
        write_matrix_csv(*h.ptr, *out_dir / "base.csv");
        std::ofstream(*out_dir / "gram.json") << sidecar.dump(2) << '\n';
    }
    return {{"task", "gram"}, {"config", cfg.to_json()}, {"n_sets", data.size()}, {"gram", sidecar},
            {"estimation", diagnostics_json(h.diag)}};
}

void write_tables(const json& report, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string task = report.at("task");
    if (task == "regress") {
        for (const auto& [mode, res] : report.at("results").items()) {
            std::ofstream out(dir / ("predictions_" + mode + ".csv"));
            out << "index,id,target,prediction\n";
            for (const auto& p : res.at("predictions"))
                out << p["index"].get<std::size_t>() << ',' << p["id"].get<std::string>() << ','
                    << p["target"].dump() << ',' << p["prediction"].dump() << '\n';
        }
    } else if (task == "classify") {
        std::ofstream out(dir / "folds.csv");
        out << "mode,fold,C,sigma_factor,accuracy\n";
        for (const auto& [mode, res] : report.at("results").items())
            for (const auto& f : res.at("folds"))
                out << mode << ',' << f["fold"].dump() << ',' << f["C"].dump() << ',' << f["sigma_factor"].dump()
                    << ',' << f["accuracy"].dump() << '\n';
    } else if (task == "anomaly") {
        for (const auto& [mode, res] : report.at("results").items()) {
            std::ofstream out(dir / ("scores_" + mode + ".csv"));
            out << "rank,index,id,score\n";
            for (const auto& r : res.at("ranking"))
                out << r["rank"].dump() << ',' << r["index"].dump() << ',' << r["id"].get<std::string>() << ','
                    << r["score"].dump() << '\n';
        }
    } else if (task == "lle") {
        std::ofstream out(dir / "embedding.csv");
        for (const auto& row : report.at("embedding")) {
            out << row["id"].get<std::string>();
            for (const auto& v : row["coords"]) out << ',' << v.dump();
            out << '\n';
        }
    }
}

}  // namespace

json run_task(const Dataset& data, const RunConfig& cfg, const std::optional<fs::path>& out_dir) {
    json report;
    if (cfg.task == "gram") return run_gram_task(data, cfg, out_dir);
    if (cfg.task == "classify") report = run_classify(data, cfg);
    else if (cfg.task == "regress") report = run_regress(data, cfg);
    else if (cfg.task == "anomaly") report = run_anomaly(data, cfg);
    else if (cfg.task == "lle") report = run_lle(data, cfg);
    else throw ConfigError("unknown task '" + cfg.task + "'");
    if (out_dir) write_tables(report, *out_dir);
    return report;
}

std::vector<std::pair<std::string, RunConfig>> expand_preset(const json& preset) {
    if (!preset.is_object()) throw ConfigError("preset must be a JSON object");
    json shared = preset;
    shared.erase("variants");
    shared.erase("name");
    shared.erase("description");
    std::vector<std::pair<std::string, RunConfig>> out;
    if (!preset.contains("variants")) {
        out.emplace_back(shared.value("task", std::string("classify")), RunConfig::from_json(shared));
        return out;
    }
    for (const auto& v : preset["variants"]) {
        if (!v.is_object() || !v.contains("name")) throw ConfigError("each preset variant needs a name");
        json merged = shared;
        json patch = v;
        patch.erase("name");
        merged.merge_patch(patch);
        const std::string name = v["name"].get<std::string>();
        for (const auto& [other, cfg] : out)
            if (other == name) throw ConfigError("duplicate preset variant '" + name + "'");
        out.emplace_back(name, RunConfig::from_json(merged));
    }
    if (out.empty()) throw ConfigError("preset has an empty variant list");
    return out;
}

json run_preset(const json& preset, const std::function<void(RunConfig&)>& adjust,
                const std::optional<fs::path>& out_dir) {
    json runs = json::object();
    for (auto& [name, cfg] : expand_preset(preset)) {
        if (adjust) adjust(cfg);
        cfg.validate();
        const Dataset data = make_dataset(cfg.data, cfg.seed);
        std::optional<fs::path> dir;
        if (out_dir) dir = *out_dir / name;
        runs[name] = run_task(data, cfg, dir);
    }
    return {{"task", "experiment"}, {"preset", preset.value("name", std::string{})}, {"runs", runs}};
}

}  // namespace distkern
