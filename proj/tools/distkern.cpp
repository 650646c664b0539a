// Command-line front end: dataset generation, Gram matrices, the learning tasks and the
// checked-in experiment presets.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distkern/error.hpp"
#include "distkern/parallel.hpp"
#include "distkern/sampleset.hpp"
#include "distkern/tasks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace distkern;

namespace {

enum Exit { ok = 0, usage = 1, config_error = 2, data_error = 3, convergence_error = 4, other_error = 5 };

struct Flags {
    std::string config;
    std::string data;
    std::string kernel;
    double alpha = 0.9;
    std::string sigma;
    int k = 0;
    std::string mode;
    std::string c_grid;
    std::string sigma_grid;
    std::size_t folds = 0;
    std::int64_t seed = -1;
    int jobs = 0;
    std::string out;
    std::string backend;
    double epsilon = -1.0;
    double nu = -1.0;
    double sigma_factor = -1.0;
    std::size_t kappa = 0;
    std::size_t out_dim = 0;
};

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad grid value '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty grid '" + text + "'");
    return out;
}

/// --kernel accepts linear, poly:<c>:<degree>, or a distance name (l2, hellinger, kl, renyi,
/// renyi:<alpha>) for the gaussian kernel over that distance.
KernelSpec parse_kernel(const std::string& text, double alpha, const std::string& sigma) {
    if (text == "linear") return KernelSpec::linear();
    if (text.rfind("poly", 0) == 0) {
        double c = 0.0;
        int degree = 2;
        std::stringstream ss(text);
        std::string part;
        std::getline(ss, part, ':');
        if (std::getline(ss, part, ':')) c = std::stod(part);
        if (std::getline(ss, part, ':')) degree = std::stoi(part);
        return KernelSpec::polynomial(c, degree);
    }
    SigmaRule rule = SigmaRule::median(1.0);
    if (!sigma.empty() && sigma != "median-scaled") rule = SigmaRule::fixed(parse_grid(sigma).front());
    return KernelSpec::gaussian(DistanceKind::parse(text, alpha), rule);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Resolves relative manifest paths in a config against the config's directory.
void anchor_paths(json& cfg, const fs::path& base) {
    if (cfg.contains("data") && cfg["data"].contains("manifest")) {
        fs::path m = cfg["data"]["manifest"].get<std::string>();
        if (m.is_relative()) cfg["data"]["manifest"] = (base / m).string();
    }
}

void apply_flags(RunConfig& cfg, const Flags& f) {
    if (!f.data.empty()) cfg.data = {{"manifest", f.data}};
    if (!f.kernel.empty()) cfg.kernel = parse_kernel(f.kernel, f.alpha, f.sigma);
    if (f.k > 0) cfg.k = f.k;
    if (!f.mode.empty()) {
        cfg.modes = f.mode == "both" ? std::vector<Mode>{Mode::transductive, Mode::inductive}
                                     : std::vector<Mode>{parse_mode(f.mode)};
    }
    if (!f.c_grid.empty()) cfg.c_grid = parse_grid(f.c_grid);
    if (!f.sigma_grid.empty()) cfg.sigma_grid = parse_grid(f.sigma_grid);
    if (f.folds > 0) cfg.folds = f.folds;
    if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
    if (!f.backend.empty()) cfg.backend = RunConfig::from_json(json{{"backend", f.backend}}).backend;
    if (f.epsilon >= 0.0) cfg.epsilon = f.epsilon;
    if (f.nu >= 0.0) cfg.nu = f.nu;
    if (f.sigma_factor > 0.0) cfg.sigma_factor = f.sigma_factor;
    if (f.kappa > 0) cfg.lle.kappa = f.kappa;
    if (f.out_dim > 0) cfg.lle.out_dim = f.out_dim;
    cfg.jobs = resolve_jobs(f.jobs);
    cfg.validate();
}

RunConfig build_config(const std::string& task, const Flags& f) {
    json base = json::object();
    if (!f.config.empty()) {
        base = read_json(f.config);
        anchor_paths(base, fs::path(f.config).parent_path());
    }
    base["task"] = task;
    RunConfig cfg = RunConfig::from_json(base);
    apply_flags(cfg, f);
    return cfg;
}

void emit(const json& report, const std::string& out) {
    if (out.empty()) {
        std::cout << report.dump(2) << '\n';
        return;
    }
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "report.json") << report.dump(2) << '\n';
    std::cerr << "wrote " << (fs::path(out) / "report.json").string() << '\n';
}

/// One-line summary of the headline numbers on stderr.
void summarize(const json& report) {
    const std::string task = report.value("task", "");
    if (report.contains("neighbor_preservation"))
        std::cerr << "lle neighbor preservation " << report["neighbor_preservation"].get<double>() << '\n';
    if (!report.contains("results")) return;
    for (const auto& [mode, res] : report["results"].items()) {
        std::cerr << task << " [" << mode << "]";
        if (res.contains("mean_accuracy")) std::cerr << " accuracy " << res["mean_accuracy"].get<double>();
        if (res.contains("rmse")) std::cerr << " rmse " << res["rmse"].get<double>();
        if (res.contains("most_anomalous")) std::cerr << " most anomalous set " << res["most_anomalous"].get<std::size_t>();
        std::cerr << '\n';
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run(const std::string& task, const Flags& f) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = build_config(task, f);
    const Dataset data = make_dataset(cfg.data, cfg.seed);
    std::optional<fs::path> out_dir;
    if (!f.out.empty()) out_dir = fs::path(f.out);
    const json report = run_task(data, cfg, out_dir);
    emit(report, f.out);
    summarize(report);
    std::cerr << "elapsed " << seconds_since(start) << " s on " << cfg.jobs << " job(s)\n";
    return ok;
}

int run_experiment(const fs::path& preset_file, const Flags& f) {
    const auto start = std::chrono::steady_clock::now();
    json preset = read_json(preset_file);
    anchor_paths(preset, preset_file.parent_path());
    if (!preset.contains("name")) preset["name"] = preset_file.stem().string();
    std::optional<fs::path> out_dir;
    if (!f.out.empty()) out_dir = fs::path(f.out);
    const json report = run_preset(preset, [&](RunConfig& cfg) { apply_flags(cfg, f); }, out_dir);
    emit(report, f.out);
    for (const auto& [name, r] : report["runs"].items()) {
        std::cerr << name << ": ";
        summarize(r);
    }
    std::cerr << "elapsed " << seconds_since(start) << " s\n";
    return ok;
}

fs::path preset_path(const std::string& name, const std::string& dir) {
    std::vector<fs::path> roots;
    if (!dir.empty()) roots.emplace_back(dir);
    if (const char* env = std::getenv("DISTKERN_PRESETS")) roots.emplace_back(env);
#ifdef DISTKERN_PRESET_DIR
    roots.emplace_back(DISTKERN_PRESET_DIR);
#endif
    roots.emplace_back("presets");
    for (const auto& r : roots) {
        const fs::path p = r / (name + ".json");
        if (fs::exists(p)) return p;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration");
    cmd->add_option("--data", f.data, "dataset manifest (overrides the config's data source)");
    cmd->add_option("--kernel", f.kernel, "linear | poly:<c>:<s> | l2 | hellinger | kl | renyi[:alpha]");
    cmd->add_option("--alpha", f.alpha, "Renyi order for --kernel renyi");
    cmd->add_option("--sigma", f.sigma, "fixed gaussian width (default: median-scaled)");
    cmd->add_option("--k", f.k, "nearest-neighbor index");
    cmd->add_option("--mode", f.mode, "transductive | inductive | both");
    cmd->add_option("--c-grid", f.c_grid, "comma-separated C values");
    cmd->add_option("--sigma-grid", f.sigma_grid, "comma-separated width factors");
    cmd->add_option("--folds", f.folds, "outer cross-validation folds");
    cmd->add_option("--seed", f.seed, "base seed");
    cmd->add_option("--jobs", f.jobs, "worker threads (default: DISTKERN_JOBS or all cores)");
    cmd->add_option("--out", f.out, "output directory (report.json and CSV tables)");
    cmd->add_option("--backend", f.backend, "brute | kdtree | auto");
    cmd->add_option("--epsilon", f.epsilon, "SVR tube width");
    cmd->add_option("--nu", f.nu, "one-class nu");
    cmd->add_option("--sigma-factor", f.sigma_factor, "fixed width factor for anomaly and lle");
    cmd->add_option("--kappa", f.kappa, "LLE neighbors");
    cmd->add_option("--dim", f.out_dim, "LLE output dimension");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distkern: kernels and learning over sample sets"};
    app.require_subcommand(1);
    Flags f;

    std::string generator;
    std::vector<std::string> params;
    std::string synth_out;
    std::int64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "write a generated dataset as manifest + CSV files");
    synth->add_option("generator", generator,
                      "beta-skewness | gauss-entropy | rot-gauss-lle | mixture-classes | planted-outlier | two-gaussians")
        ->required();
    synth->add_option("--set", params, "generator parameter key=value (repeatable)");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    const std::vector<std::string> tasks{"gram", "classify", "regress", "anomaly", "lle"};
    std::vector<CLI::App*> task_cmds;
    for (const auto& t : tasks) {
        auto* cmd = app.add_subcommand(t, "run the " + t + " task");
        add_common(cmd, f);
        task_cmds.push_back(cmd);
    }

    std::string preset;
    std::string preset_dir;
    auto* experiment = app.add_subcommand("experiment", "run a checked-in experiment preset");
    experiment->add_option("preset", preset, "usps-like | beta-skewness | gauss-entropy | rot-gauss-lle | planted-outlier")
        ->required();
    experiment->add_option("--preset-dir", preset_dir, "directory holding preset files");
    add_common(experiment, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints help or the parse message
        return rc == 0 ? ok : usage;
    }

    try {
        if (*synth) {
            json data{{"generator", generator}};
            for (const auto& p : params) {
                const auto eq = p.find('=');
                if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + p + "'");
                const std::string key = p.substr(0, eq);
                const std::string value = p.substr(eq + 1);
                try {
                    data[key] = json::parse(value);
                } catch (const json::exception&) {
                    data[key] = value;
                }
            }
            const Dataset ds = make_dataset(data, static_cast<std::uint64_t>(synth_seed));
            const auto manifest = write_dataset(ds, synth_out);
            std::cerr << "wrote " << ds.size() << " sets to " << manifest.string() << '\n';
            return ok;
        }
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (*task_cmds[i]) return run(tasks[i], f);
        if (*experiment) {
            return run_experiment(preset_path(preset, preset_dir), f);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const ConvergenceError& e) {
        std::cerr << "solver did not converge: " << e.what() << '\n';
        return convergence_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other_error;
    }
    return usage;
}
