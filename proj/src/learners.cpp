#include "distkern/learners.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "distkern/error.hpp"
#include "distkern/gram.hpp"

namespace distkern {

using nlohmann::json;

namespace {

/// A warm start is only used when it has the right length and fits inside the new box.
std::span<const double> usable_start(std::span<const double> warm, std::size_t n, double C) {
    if (warm.size() != n) return {};
    for (double v : warm)
        if (!(std::abs(v) <= C)) return {};
    return warm;
}

void check_square(const Matrix& gram, std::size_t n, const char* what) {
    if (!gram.square() || gram.rows() != n)
        throw DataError(std::string(what) + ": Gram matrix is " + std::to_string(gram.rows()) + "x" +
                        std::to_string(gram.cols()) + ", expected " + std::to_string(n) + "x" +
                        std::to_string(n));
}

void check_psd(const Matrix& gram, const TrainOptions& options) {
    if (!options.strict_psd) return;
    const auto e = eigh(gram);
    const double top = e.values.empty() ? 0.0 : std::max(0.0, e.values.front());
    if (!e.values.empty() && e.values.back() < -1e-10 * top)
        throw DataError("Gram matrix is not PSD (min eigenvalue " + std::to_string(e.values.back()) + ")");
}

void check_row(std::span<const double> row, std::size_t n) {
    if (row.size() != n)
        throw DataError("kernel row has " + std::to_string(row.size()) + " entries, expected " +
                        std::to_string(n));
}

std::vector<std::size_t> supports(std::span<const double> coeffs) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        if (std::abs(coeffs[i]) > kSupportThreshold) out.push_back(i);
    return out;
}

}  // namespace

SvmModel train_binary_svm(const Matrix& gram, std::span<const int> labels, double C, const TrainOptions& options,
                          std::span<const double> warm_start) {
    const std::size_t n = labels.size();
    check_square(gram, n, "train_binary_svm");
    if (!(C > 0.0)) throw ConfigError("C must be positive");
    bool pos = false;
    bool neg = false;
    for (int l : labels) {
        if (l == 1) pos = true;
        else if (l == -1) neg = true;
        else throw DataError("binary labels must be +1 or -1");
    }
    if (!pos || !neg) throw DataError("binary SVM needs both classes present");
    check_psd(gram, options);

    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) q(i, j) = labels[i] * labels[j] * gram(i, j);
    const std::vector<double> p(n, -1.0);
    const std::vector<double> upper(n, C);
    const auto sol = solve_smo({&q, p, labels, upper, usable_start(warm_start, n, C)}, options.solver);

    SvmModel m;
    m.dual_coeffs = sol.alpha;
    m.labels.assign(labels.begin(), labels.end());
    m.C = C;
    m.support_indices = supports(sol.alpha);
    m.dual_objective = -sol.objective;
    m.kkt_gap = sol.kkt_gap;
    m.iterations = sol.iterations;
    // b = mean over alpha_j > 0 of y_j - sum_i y_i alpha_i G_ij
    double sum = 0.0;
    for (std::size_t j : m.support_indices) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) f += labels[i] * sol.alpha[i] * gram(i, j);
        sum += labels[j] - f;
    }
    m.bias = m.support_indices.empty() ? 0.0 : sum / static_cast<double>(m.support_indices.size());
    return m;
}

Prediction predict_binary(const SvmModel& model, std::span<const double> kernel_row) {
    check_row(kernel_row, model.dual_coeffs.size());
    double f = model.bias;
    for (std::size_t i : model.support_indices) f += model.dual_coeffs[i] * model.labels[i] * kernel_row[i];
    return {f >= 0.0 ? 1 : -1, f};
}

MulticlassSvm train_multiclass(const Matrix& gram, std::span<const int> class_labels, double C,
                               const TrainOptions& options, const MulticlassSvm* warm_start) {
    check_square(gram, class_labels.size(), "train_multiclass");
    if (class_labels.empty()) throw DataError("no training sets");
    const int r = *std::max_element(class_labels.begin(), class_labels.end()) + 1;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(r, 0)));
    for (std::size_t i = 0; i < class_labels.size(); ++i) {
        if (class_labels[i] < 0) throw DataError("class labels must be >= 0");
        members[static_cast<std::size_t>(class_labels[i])].push_back(i);
    }
    if (r < 2) throw DataError("multiclass SVM needs at least two classes");
    for (int c = 0; c < r; ++c)
        if (members[static_cast<std::size_t>(c)].empty())
            throw DataError("class " + std::to_string(c) + " has no training sets");

    MulticlassSvm out;
    out.num_classes = r;
    for (int a = 0; a < r; ++a)
        for (int b = a + 1; b < r; ++b) {
            PairwiseSvm pw{a, b, {}, {}};
            const auto& ma = members[static_cast<std::size_t>(a)];
            const auto& mb = members[static_cast<std::size_t>(b)];
            std::merge(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(pw.members));
            std::vector<int> y;
            for (std::size_t idx : pw.members) y.push_back(class_labels[idx] == a ? 1 : -1);
            std::span<const double> start;
            if (warm_start && warm_start->models.size() > out.models.size()) {
                const auto& prev = warm_start->models[out.models.size()];
                if (prev.first == a && prev.second == b && prev.members == pw.members) start = prev.model.dual_coeffs;
            }
            pw.model = train_binary_svm(gram.submatrix(pw.members), y, C, options, start);
            out.models.push_back(std::move(pw));
        }
    return out;
}

int predict_multiclass(const MulticlassSvm& model, std::span<const double> kernel_row) {
    std::vector<int> votes(static_cast<std::size_t>(model.num_classes), 0);
    std::vector<double> sub;
    for (const auto& pw : model.models) {
        sub.clear();
        for (std::size_t idx : pw.members) {
            if (idx >= kernel_row.size()) throw DataError("kernel row does not cover training index " + std::to_string(idx));
            sub.push_back(kernel_row[idx]);
        }
        const auto pred = predict_binary(pw.model, sub);
        ++votes[static_cast<std::size_t>(pred.label > 0 ? pw.first : pw.second)];
    }
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

OneClassModel train_one_class(const Matrix& gram, double nu, const TrainOptions& options) {
    const std::size_t n = gram.rows();
    check_square(gram, n, "train_one_class");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu must lie in (0, 1]");
    if (n < 2) throw DataError("one-class SVM needs at least two training sets");
    check_psd(gram, options);

    const double ub = 1.0 / (nu * static_cast<double>(n));
    std::vector<double> init(n, 0.0);
    double remaining = 1.0;
    for (std::size_t i = 0; i < n && remaining > 0.0; ++i) {
        init[i] = std::min(ub, remaining);
        remaining -= init[i];
    }
    const std::vector<double> p(n, 0.0);
    const std::vector<int> y(n, 1);
    const std::vector<double> upper(n, ub);
    const auto sol = solve_smo({&gram, p, y, upper, init}, options.solver);

    OneClassModel m;
    m.dual_coeffs = sol.alpha;
    m.nu = nu;
    m.support_indices = supports(sol.alpha);
    m.dual_objective = sol.objective;
    m.kkt_gap = sol.kkt_gap;
    m.iterations = sol.iterations;

    std::vector<double> f = sol.gradient;  // p = 0, so the gradient is G a
    std::sort(f.begin(), f.end());
    const auto rank = static_cast<std::size_t>(std::ceil(nu * static_cast<double>(n) - 1e-9));
    m.offset = f[std::clamp<std::size_t>(rank, 1, n) - 1];
    return m;
}

double score_one_class(const OneClassModel& model, std::span<const double> kernel_row, double /*self_kernel*/) {
    check_row(kernel_row, model.dual_coeffs.size());
    double f = -model.offset;
    for (std::size_t i : model.support_indices) f += model.dual_coeffs[i] * kernel_row[i];
    return f;
}

SvrModel train_svr(const Matrix& gram, std::span<const double> targets, double C, double epsilon,
                   const TrainOptions& options, std::span<const double> warm_start) {
    const std::size_t n = targets.size();
    check_square(gram, n, "train_svr");
    if (!(C > 0.0)) throw ConfigError("C must be positive");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    for (double t : targets)
        if (!std::isfinite(t)) throw DataError("non-finite regression target");
    check_psd(gram, options);

    const std::size_t n2 = 2 * n;
    Matrix q(n2, n2);
    std::vector<int> y(n2);
    std::vector<double> p(n2);
    for (std::size_t a = 0; a < n2; ++a) {
        y[a] = a < n ? 1 : -1;
        p[a] = a < n ? epsilon - targets[a] : epsilon + targets[a - n];
    }
    for (std::size_t a = 0; a < n2; ++a)
        for (std::size_t b = 0; b < n2; ++b) q(a, b) = y[a] * y[b] * gram(a % n, b % n);
    const std::vector<double> upper(n2, C);
    std::vector<double> start;
    if (!usable_start(warm_start, n, C).empty()) {
        start.assign(n2, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            start[i] = std::max(warm_start[i], 0.0);
            start[i + n] = std::max(-warm_start[i], 0.0);
        }
    }
    const auto sol = solve_smo({&q, p, y, upper, start}, options.solver);

    SvrModel m;
    m.epsilon = epsilon;
    m.C = C;
    m.dual_diff.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.dual_diff[i] = sol.alpha[i] - sol.alpha[i + n];
    m.support_indices = supports(m.dual_diff);
    m.dual_objective = sol.objective;
    m.kkt_gap = sol.kkt_gap;
    m.iterations = sol.iterations;

    // Offset from the free variables; without any, the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -ub;
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t a = 0; a < n2; ++a) {
        const double yg = y[a] * sol.gradient[a];
        if (sol.alpha[a] >= C) {
            if (y[a] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (sol.alpha[a] <= 0.0) {
            if (y[a] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            sum_free += yg;
            ++n_free;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
    m.bias = -rho;
    return m;
}

double predict_svr(const SvrModel& model, std::span<const double> kernel_row) {
    check_row(kernel_row, model.dual_diff.size());
    double f = model.bias;
    for (std::size_t i : model.support_indices) f += model.dual_diff[i] * kernel_row[i];
    return f;
}

json to_json(const SvmModel& m) {
    return {{"type", "svm"},
            {"dual_coeffs", m.dual_coeffs},
            {"labels", m.labels},
            {"bias", m.bias},
            {"support_indices", m.support_indices},
            {"C", m.C},
            {"dual_objective", m.dual_objective},
            {"kkt_gap", m.kkt_gap},
            {"iterations", m.iterations}};
}

json to_json(const MulticlassSvm& m) {
    json models = json::array();
    for (const auto& pw : m.models)
        models.push_back({{"first", pw.first}, {"second", pw.second}, {"members", pw.members}, {"model", to_json(pw.model)}});
    return {{"type", "multiclass_svm"}, {"num_classes", m.num_classes}, {"models", models}};
}

json to_json(const OneClassModel& m) {
    return {{"type", "one_class"},
            {"dual_coeffs", m.dual_coeffs},
            {"offset", m.offset},
            {"nu", m.nu},
            {"support_indices", m.support_indices},
            {"dual_objective", m.dual_objective},
            {"kkt_gap", m.kkt_gap},
            {"iterations", m.iterations}};
}

json to_json(const SvrModel& m) {
    return {{"type", "svr"},
            {"dual_diff", m.dual_diff},
            {"bias", m.bias},
            {"epsilon", m.epsilon},
            {"C", m.C},
            {"support_indices", m.support_indices},
            {"dual_objective", m.dual_objective},
            {"kkt_gap", m.kkt_gap},
            {"iterations", m.iterations}};
}

SvmModel svm_from_json(const json& j) {
    SvmModel m;
    j.at("dual_coeffs").get_to(m.dual_coeffs);
    j.at("labels").get_to(m.labels);
    j.at("bias").get_to(m.bias);
    j.at("support_indices").get_to(m.support_indices);
    j.at("C").get_to(m.C);
    m.dual_objective = j.value("dual_objective", 0.0);
    m.kkt_gap = j.value("kkt_gap", 0.0);
    m.iterations = j.value("iterations", std::size_t{0});
    return m;
}

MulticlassSvm multiclass_from_json(const json& j) {
    MulticlassSvm m;
    j.at("num_classes").get_to(m.num_classes);
    for (const auto& pw : j.at("models")) {
        PairwiseSvm p{pw.at("first").get<int>(), pw.at("second").get<int>(), {}, svm_from_json(pw.at("model"))};
        pw.at("members").get_to(p.members);
        m.models.push_back(std::move(p));
    }
    return m;
}

OneClassModel one_class_from_json(const json& j) {
    OneClassModel m;
    j.at("dual_coeffs").get_to(m.dual_coeffs);
    j.at("offset").get_to(m.offset);
    j.at("nu").get_to(m.nu);
    j.at("support_indices").get_to(m.support_indices);
    m.dual_objective = j.value("dual_objective", 0.0);
    m.kkt_gap = j.value("kkt_gap", 0.0);
    m.iterations = j.value("iterations", std::size_t{0});
    return m;
}

SvrModel svr_from_json(const json& j) {
    SvrModel m;
    j.at("dual_diff").get_to(m.dual_diff);
    j.at("bias").get_to(m.bias);
    j.at("epsilon").get_to(m.epsilon);
    j.at("C").get_to(m.C);
    j.at("support_indices").get_to(m.support_indices);
    m.dual_objective = j.value("dual_objective", 0.0);
    m.kkt_gap = j.value("kkt_gap", 0.0);
    m.iterations = j.value("iterations", std::size_t{0});
    return m;
}

}  // namespace distkern
