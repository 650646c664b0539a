#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "distkern/error.hpp"
#include "distkern/synth.hpp"
#include "distkern/tasks.hpp"

using namespace distkern;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(const std::string& task) {
    RunConfig cfg;
    cfg.task = task;
    cfg.kernel = KernelSpec::gaussian(DistanceKind::hellinger());
    cfg.c_grid = {0.5, 8, 128};
    cfg.sigma_grid = {0.25, 1, 4};
    cfg.seed = 3;
    cfg.backend = Backend::kdtree;
    return cfg;
}

Matrix pairwise(const json& embedding) {
    const std::size_t n = embedding.size();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t c = 0; c < embedding[i]["coords"].size(); ++c)
                s += std::pow(embedding[i]["coords"][c].get<double>() - embedding[j]["coords"][c].get<double>(), 2);
            d(i, j) = std::sqrt(s);
        }
    return d;
}

}  // namespace

TEST_CASE("run config round trips through json") {
    RunConfig cfg = small_config("regress");
    cfg.kernel = KernelSpec::gaussian(DistanceKind::renyi(0.7), SigmaRule::fixed(0.3));
    cfg.modes = {Mode::transductive, Mode::inductive};
    cfg.data = {{"generator", "beta-skewness"}, {"n_sets", 20}};
    cfg.lle.kappa = 3;
    const json j = cfg.to_json();
    CHECK(RunConfig::from_json(j).to_json() == j);
    for (const auto& k : {KernelSpec::linear(), KernelSpec::polynomial(1.5, 3),
                          KernelSpec::gaussian(DistanceKind::l2(), SigmaRule::median(2))})
        CHECK(kernel_to_json(kernel_from_json(kernel_to_json(k))) == kernel_to_json(k));

    CHECK(RunConfig::from_json({{"mode", "both"}}).modes.size() == 2);
    CHECK_THROWS_AS(RunConfig::from_json({{"task", "dance"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"c_grid", json::array()}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"mode", "sideways"}}), ConfigError);
    CHECK_THROWS_AS(kernel_from_json({{"type", "gaussian"}, {"distance", "cosine"}}), ConfigError);
    CHECK_THROWS_AS(make_dataset({{"generator", "nope"}}, 1), ConfigError);
}

TEST_CASE("default grids") {
    const auto c = default_c_grid();
    CHECK(c.front() == std::pow(2.0, -9));
    CHECK(c.back() == std::pow(2.0, 21));
    CHECK(c.size() == 11);
    const auto s = default_sigma_grid();
    CHECK(s.front() == std::pow(2.0, -4));
    CHECK(s.back() == std::pow(2.0, 10));
    CHECK(s.size() == 8);
}

TEST_CASE("two separated gaussian classes are classified in both modes") {
    RunConfig cfg = small_config("classify");
    cfg.modes = {Mode::transductive, Mode::inductive};
    const Dataset data = synth::two_gaussian_classes_dataset(50, 200, 2, 3.0, 6);
    const json r = run_classify(data, cfg);
    for (const char* mode : {"transductive", "inductive"}) {
        REQUIRE(r["results"].contains(mode));
        CHECK(r["results"][mode]["mode"] == mode);
        CHECK(r["results"][mode]["mean_accuracy"].get<double>() >= 0.98);
        for (const auto& f : r["results"][mode]["folds"]) CHECK(f["max_kkt_gap"].get<double>() < 1e-6);
    }
    CHECK(r["config"] == cfg.to_json());
}

TEST_CASE("three separated classes reach 95 percent") {
    std::vector<SampleSet> sets;
    ClassLabels labels;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 20; ++i) {
            const double mx = 4.0 * std::cos(2.1 * c), my = 4.0 * std::sin(2.1 * c);
            sets.push_back(synth::sample({synth::Gaussian{{mx, my}, Matrix::identity(2)}, 150,
                                          static_cast<std::uint64_t>(100 * c + i)}));
            labels.push_back(c);
        }
    const json r = run_classify(Dataset(std::move(sets), labels), small_config("classify"));
    CHECK(r["num_classes"] == 3);
    CHECK(r["results"]["transductive"]["mean_accuracy"].get<double>() >= 0.95);
}

TEST_CASE("single-class data fails before any estimation") {
    // Sets of three points would fail neighbor estimation; the class check must come first.
    std::vector<SampleSet> sets{SampleSet(Matrix(3, 1, 0.0), "a"), SampleSet(Matrix(3, 1, 1.0), "b")};
    const Dataset data(std::move(sets), ClassLabels{0, 0});
    try {
        run_classify(data, small_config("classify"));
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("two classes") != std::string::npos);
    }
}

TEST_CASE("constant targets regress exactly") {
    Dataset base = synth::beta_skewness_dataset(30, 8, 100, 2);
    std::vector<SampleSet> sets = base.sets();
    const Dataset data(std::move(sets), RealTargets(30, 3.0), base.partition());
    const json r = run_regress(data, small_config("regress"));
    CHECK(r["results"]["transductive"]["rmse"].get<double>() <= 1e-6);
    CHECK(r["n_test"] == 8);
}

TEST_CASE("anomaly scores separate a planted set") {
    RunConfig cfg = small_config("anomaly");
    cfg.sigma_factor = 64;
    // The bound 1/(nu T) must stay well below 1/2: with few training sets an isolated outlier
    // inside the training block can carry enough weight to look normal.
    const json planted = run_anomaly(synth::planted_outlier_dataset(99, 200, 2, 5.0, 50, 9), cfg);
    const json& res = planted["results"]["transductive"];
    REQUIRE(res["flagged_label_ranks"].size() == 1);
    CHECK(res["flagged_label_ranks"][0]["rank"] == 0);
    CHECK(res["kkt_gap"].get<double>() < 1e-6);

    const json same = run_anomaly(synth::planted_outlier_dataset(99, 200, 2, 0.0, 50, 9), cfg);
    const double ratio = res["score_spread"].get<double>() / same["results"]["transductive"]["score_spread"].get<double>();
    MESSAGE("spread ratio " << ratio);
    CHECK(ratio >= 5.0);

    cfg.nu = 1.0;
    const json all = run_anomaly(synth::planted_outlier_dataset(19, 100, 2, 5.0, 10, 9), cfg);
    CHECK(all["results"]["transductive"]["support_vectors"] == 10);
}

TEST_CASE("lle runs with a single neighbour and ignores set order") {
    RunConfig cfg = small_config("lle");
    cfg.kernel = KernelSpec::gaussian(DistanceKind::renyi(0.9));
    cfg.lle = {1, 2, 1e-3};
    const Dataset data = synth::rotated_lle_dataset(21, 300, 4);
    const json r = run_lle(data, cfg);
    CHECK(r["max_row_sum_error"] == 0.0);
    CHECK(r["embedding"].size() == 21);

    cfg.lle.kappa = 4;
    const json a = run_lle(data, cfg);
    std::vector<std::size_t> perm(21);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[3], perm[10]);
    std::vector<SampleSet> sets;
    RealTargets targets;
    for (std::size_t p : perm) {
        sets.push_back(data[p]);
        targets.push_back(data.real_targets()[p]);
    }
    const json b = run_lle(Dataset(std::move(sets), targets), cfg);
    const Matrix da = pairwise(a["embedding"]), db = pairwise(b["embedding"]);
    for (std::size_t i = 0; i < 21; ++i)
        for (std::size_t j = 0; j < 21; ++j) CHECK(std::abs(db(i, j) - da(perm[i], perm[j])) < 1e-6);
}

TEST_CASE("neighbour preservation with a periodic target") {
    Matrix coords(4, 1);
    for (std::size_t i = 0; i < 4; ++i) coords(i, 0) = static_cast<double>(i);
    const std::vector<double> t{0, 1, 2, 3};
    CHECK(neighbor_preservation(coords, t, 0) == 1.0);
    // With period 3.5 the angles 0 and 3 are adjacent.
    Matrix loop(4, 2);
    const double xy[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int i = 0; i < 4; ++i) {
        loop(i, 0) = xy[i][0];
        loop(i, 1) = xy[i][1];
    }
    CHECK(neighbor_preservation(loop, t, 4.0) == 1.0);
}

TEST_CASE("reports do not depend on the worker count") {
    RunConfig cfg = small_config("classify");
    cfg.modes = {Mode::transductive, Mode::inductive};
    const Dataset data = synth::two_gaussian_classes_dataset(20, 100, 2, 1.0, 7);
    const json one = run_classify(data, cfg);
    cfg.jobs = 3;
    const json three = run_classify(data, cfg);
    json a = one, b = three;
    a["config"].erase("jobs");
    b["config"].erase("jobs");
    CHECK(a.dump() == b.dump());
}

TEST_CASE("run_task writes tables and the gram sidecar") {
    const fs::path dir = fs::temp_directory_path() / "distkern_tasks_out";
    fs::remove_all(dir);
    fs::create_directories(dir);
    RunConfig cfg = small_config("gram");
    cfg.data = {{"generator", "two-gaussians"}, {"sets_per_class", 4}, {"n_points", 50}};
    const Dataset data = make_dataset(cfg.data, cfg.seed);
    const json r = run_task(data, cfg, dir);
    CHECK(fs::exists(dir / "gram.csv"));
    CHECK(fs::exists(dir / "gram.json"));
    std::ifstream side(dir / "gram.json");
    const json s = json::parse(side);
    CHECK(s.contains("kernel"));
    CHECK(s.contains("min_eigenvalue_before"));
    CHECK(r["task"] == "gram");
}

TEST_CASE("presets expand into named variants") {
    const json preset{{"name", "p"},
                      {"task", "classify"},
                      {"data", {{"generator", "two-gaussians"}}},
                      {"variants", {{{"name", "a"}, {"k", 3}}, {{"name", "b"}, {"k", 7}}}}};
    const auto runs = expand_preset(preset);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].first == "a");
    CHECK(runs[0].second.k == 3);
    CHECK(runs[1].second.k == 7);
    CHECK(expand_preset({{"task", "lle"}}).size() == 1);
    CHECK_THROWS_AS(expand_preset({{"variants", {{{"k", 3}}}}}), ConfigError);
}
