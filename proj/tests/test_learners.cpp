#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "distkern/error.hpp"
#include "distkern/learners.hpp"
#include "distkern/rng.hpp"
#include "qp_oracle.hpp"

using namespace distkern;

namespace {

Matrix gram_of_points(const std::vector<double>& xs, double width = 1.0) {
    Matrix g(xs.size(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j) g(i, j) = std::exp(-0.5 * std::pow(xs[i] - xs[j], 2) / width);
    return g;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
    std::vector<int> y(n);
    for (auto& v : y) v = rng.below(2) ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    return y;
}

SvmModel fixed_vote(double bias) {
    SvmModel m;
    m.dual_coeffs = {0.0};
    m.labels = {1};
    m.bias = bias;
    return m;
}

}  // namespace

TEST_CASE("two-point SVM on the identity gram") {
    const std::vector<int> y{1, -1};
    const SvmModel m = train_binary_svm(Matrix::identity(2), y, 10.0);
    CHECK(m.dual_coeffs[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.dual_coeffs[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(m.bias) < 1e-9);
    CHECK(m.kkt_gap < 1e-6);
    CHECK(m.support_indices.size() == 2);
}

TEST_CASE("separable points are classified perfectly") {
    const std::vector<double> xs{-3, -2.5, -2, -1.7, 1.5, 2, 2.2, 3};
    const std::vector<int> y{-1, -1, -1, -1, 1, 1, 1, 1};
    const Matrix g = gram_of_points(xs);
    const SvmModel m = train_binary_svm(g, y, 1000.0);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(predict_binary(m, g.row(i)).label == y[i]);
    double balance = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        balance += m.dual_coeffs[i] * y[i];
        CHECK(m.dual_coeffs[i] >= 0.0);
        CHECK(m.dual_coeffs[i] <= 1000.0);
    }
    CHECK(std::abs(balance) < 1e-8 * 1000 * 8);

    // A duplicated training point does not change any predicted sign.
    std::vector<double> xs2 = xs;
    xs2.push_back(xs[2]);
    std::vector<int> y2 = y;
    y2.push_back(y[2]);
    const Matrix g2 = gram_of_points(xs2);
    const SvmModel m2 = train_binary_svm(g2, y2, 1000.0);
    for (double t = -4; t <= 4; t += 0.25) {
        std::vector<double> row1, row2;
        for (double x : xs) row1.push_back(std::exp(-0.5 * (x - t) * (x - t)));
        for (double x : xs2) row2.push_back(std::exp(-0.5 * (x - t) * (x - t)));
        CHECK(predict_binary(m, row1).label == predict_binary(m2, row2).label);
    }
}

TEST_CASE("binary prediction rules") {
    const SvmModel m = fixed_vote(0.5);
    const std::vector<double> zero{0.0};
    const auto p = predict_binary(m, zero);
    CHECK(p.label == 1);
    CHECK(p.decision == 0.5);
    CHECK(predict_binary(fixed_vote(0.0), zero).label == 1);
    CHECK_THROWS_AS(predict_binary(m, std::vector<double>{1, 2}), DataError);

    // A margin support vector reproduces its training decision value.
    const std::vector<double> xs{-2, -1, 1, 2};
    const std::vector<int> y{-1, -1, 1, 1};
    const Matrix g = gram_of_points(xs);
    const SvmModel s = train_binary_svm(g, y, 10.0);
    for (std::size_t i : s.support_indices)
        if (s.dual_coeffs[i] < 10.0 - 1e-6) CHECK(predict_binary(s, g.row(i)).decision == doctest::Approx(y[i]).epsilon(1e-5));
}

TEST_CASE("SMO matches the brute-force oracle") {
    Rng rng(11);
    for (int t = 0; t < 15; ++t) {
        const std::size_t n = 3 + rng.below(6);
        const Matrix g = oracle::random_psd(rng, n, 1 + rng.below(n));
        const auto y = random_labels(rng, n);
        const double C = std::pow(2.0, static_cast<double>(rng.below(7)) - 3);
        const SvmModel m = train_binary_svm(g, y, C);
        CHECK(std::abs(m.dual_objective - oracle::svm_dual(g, y, C)) < 1e-4);
        CHECK(m.kkt_gap < 1e-6);

        const double nu = 0.2 + 0.8 * rng.uniform();
        const OneClassModel o = train_one_class(g, nu);
        CHECK(std::abs(o.dual_objective - oracle::one_class_dual(g, nu)) < 1e-4);
        CHECK(std::accumulate(o.dual_coeffs.begin(), o.dual_coeffs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-8));

        const std::size_t ns = 2 + rng.below(3);
        const Matrix gs = oracle::random_psd(rng, ns, ns);
        std::vector<double> z(ns);
        for (auto& v : z) v = rng.normal();
        const SvrModel r = train_svr(gs, z, C, 0.1);
        CHECK(std::abs(r.dual_objective - oracle::svr_dual(gs, z, C, 0.1)) < 1e-4);
        CHECK(std::abs(std::accumulate(r.dual_diff.begin(), r.dual_diff.end(), 0.0)) < 1e-8 * C * ns);
    }
}

TEST_CASE("multiclass models and voting") {
    Rng rng(2);
    std::vector<double> xs;
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 5; ++i) {
            xs.push_back(10.0 * c + rng.normal());
            labels.push_back(c);
        }
    const Matrix g = gram_of_points(xs, 4.0);
    const MulticlassSvm m = train_multiclass(g, labels, 10.0);
    CHECK(m.num_classes == 4);
    CHECK(m.models.size() == 6);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(predict_multiclass(m, g.row(i)) == labels[i]);

    // r = 2 reduces to the binary machine.
    std::vector<std::size_t> idx;
    std::vector<int> two, pm;
    for (std::size_t i = 0; i < 10; ++i) {
        idx.push_back(i);
        two.push_back(labels[i]);
        pm.push_back(labels[i] == 0 ? 1 : -1);
    }
    const Matrix g2 = g.submatrix(idx);
    const MulticlassSvm m2 = train_multiclass(g2, two, 1.0);
    REQUIRE(m2.models.size() == 1);
    const SvmModel b = train_binary_svm(g2, pm, 1.0);
    CHECK(m2.models[0].model.dual_coeffs == b.dual_coeffs);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(predict_multiclass(m2, g2.row(i)) == (predict_binary(b, g2.row(i)).label > 0 ? 0 : 1));

    CHECK_THROWS_AS(train_multiclass(g2, std::vector<int>(10, 0), 1.0), DataError);
    std::vector<int> gap = two;
    for (auto& v : gap) v = v == 1 ? 2 : 0;
    CHECK_THROWS_AS(train_multiclass(g2, gap, 1.0), DataError);
}

TEST_CASE("voting tie goes to the smallest class") {
    MulticlassSvm m;
    m.num_classes = 3;
    m.models = {{0, 1, {0}, fixed_vote(1)}, {0, 2, {0}, fixed_vote(-1)}, {1, 2, {0}, fixed_vote(1)}};
    const std::vector<double> row{0.0};
    CHECK(predict_multiclass(m, row) == 0);
    m.models = {{0, 1, {0}, fixed_vote(-1)}, {0, 2, {0}, fixed_vote(-1)}, {1, 2, {0}, fixed_vote(-1)}};
    CHECK(predict_multiclass(m, row) == 2);
}

TEST_CASE("one-class edge cases") {
    const OneClassModel m = train_one_class(Matrix::identity(2), 1.0);
    CHECK(m.dual_coeffs[0] == doctest::Approx(0.5));
    CHECK(m.dual_coeffs[1] == doctest::Approx(0.5));

    Rng rng(5);
    const Matrix g = oracle::random_psd(rng, 7, 7);
    const OneClassModel all = train_one_class(g, 1.0);
    CHECK(all.support_indices.size() == 7);
    for (double a : all.dual_coeffs) CHECK(a == doctest::Approx(1.0 / 7));

    // Tight cluster plus one far point: the cluster scores above the outlier.
    const std::vector<double> xs{0, 0.1, -0.1, 0.05, -0.05, 0.02, 6};
    const Matrix go = gram_of_points(xs);
    const OneClassModel c = train_one_class(go, 0.3);
    for (std::size_t i = 0; i < 6; ++i) CHECK(score_one_class(c, go.row(i)) > score_one_class(c, go.row(6)));
    CHECK(score_one_class(c, go.row(0)) == score_one_class(c, go.row(0), 42.0));

    // Identical rows score identically.
    Matrix dup(3, 3, 1.0);
    const OneClassModel d = train_one_class(dup, 0.5);
    CHECK(score_one_class(d, dup.row(0)) == score_one_class(d, dup.row(2)));

    CHECK_THROWS_AS(train_one_class(g, 0.0), ConfigError);
    CHECK_THROWS_AS(train_one_class(g, 1.5), ConfigError);
}

TEST_CASE("SVR fits constants and interpolates") {
    Rng rng(6);
    const Matrix g = oracle::random_psd(rng, 6, 3);
    const std::vector<double> z(6, 3.0);
    for (double eps : {0.0, 0.01, 0.5}) {
        const SvrModel m = train_svr(g, z, 4.0, eps);
        CHECK(m.bias == doctest::Approx(3.0));
        for (double d : m.dual_diff) CHECK(d == 0.0);
        for (std::size_t i = 0; i < 6; ++i) CHECK(predict_svr(m, g.row(i)) == doctest::Approx(3.0));
    }

    const std::vector<double> xs{0, 0.5, 1.1, 1.8, 2.4, 3.0};
    std::vector<double> t;
    for (double x : xs) t.push_back(std::sin(x));
    const Matrix gk = gram_of_points(xs, 0.5);
    const SvrModel m = train_svr(gk, t, 1e4, 1e-3);
    for (std::size_t i : m.support_indices)
        CHECK(std::abs(predict_svr(m, gk.row(i)) - t[i]) <= 1e-3 + 1e-6);
    CHECK_THROWS_AS(train_svr(gk, std::vector<double>{1, 2}, 1, 0.1), DataError);
}

TEST_CASE("warm starts reach the same optimum") {
    Rng rng(7);
    const Matrix g = oracle::random_psd(rng, 30, 5);
    const auto y = random_labels(rng, 30);
    const SvmModel small = train_binary_svm(g, y, 1.0);
    const SvmModel cold = train_binary_svm(g, y, 8.0);
    const SvmModel warm = train_binary_svm(g, y, 8.0, {}, small.dual_coeffs);
    CHECK(warm.dual_objective == doctest::Approx(cold.dual_objective).epsilon(1e-6));

    std::vector<double> z(30);
    for (auto& v : z) v = rng.normal();
    const SvrModel rs = train_svr(g, z, 1.0, 0.01);
    const SvrModel rc = train_svr(g, z, 8.0, 0.01);
    const SvrModel rw = train_svr(g, z, 8.0, 0.01, {}, rs.dual_diff);
    CHECK(rw.dual_objective == doctest::Approx(rc.dual_objective).epsilon(1e-6));

    // Starts outside the new box are ignored.
    const SvmModel big = train_binary_svm(g, y, 8.0);
    const SvmModel back = train_binary_svm(g, y, 1.0, {}, big.dual_coeffs);
    CHECK(back.dual_objective == doctest::Approx(small.dual_objective).epsilon(1e-6));
}

TEST_CASE("solver cap raises a convergence error") {
    Rng rng(8);
    const Matrix g = oracle::random_psd(rng, 20, 3);
    const auto y = random_labels(rng, 20);
    TrainOptions opt;
    opt.solver.max_iterations = 2;
    CHECK_THROWS_AS(train_binary_svm(g, y, 100.0, opt), ConvergenceError);
}

TEST_CASE("strict mode rejects indefinite grams") {
    Matrix g = Matrix::identity(3);
    g(0, 1) = g(1, 0) = 2.0;
    TrainOptions opt;
    opt.strict_psd = true;
    CHECK_THROWS_AS(train_binary_svm(g, std::vector<int>{1, -1, 1}, 1.0, opt), DataError);
    CHECK_NOTHROW(train_binary_svm(g, std::vector<int>{1, -1, 1}, 1.0));
    CHECK_THROWS_AS(train_binary_svm(g, std::vector<int>{1, 1, 1}, 1.0), DataError);
}

TEST_CASE("models survive a json round trip") {
    Rng rng(9);
    const Matrix g = oracle::random_psd(rng, 8, 4);
    std::vector<int> cls{0, 1, 2, 0, 1, 2, 0, 1};
    const auto mc = train_multiclass(g, cls, 2.0);
    const auto back = multiclass_from_json(to_json(mc));
    for (std::size_t i = 0; i < 8; ++i) CHECK(predict_multiclass(back, g.row(i)) == predict_multiclass(mc, g.row(i)));
    CHECK(to_json(back) == to_json(mc));

    const auto svm = train_binary_svm(g, random_labels(rng, 8), 1.0);
    CHECK(to_json(svm_from_json(to_json(svm))) == to_json(svm));
    const auto oc = train_one_class(g, 0.4);
    CHECK(to_json(one_class_from_json(to_json(oc))) == to_json(oc));
    std::vector<double> z(8, 0.0);
    for (std::size_t i = 0; i < 8; ++i) z[i] = static_cast<double>(i);
    const auto svr = train_svr(g, z, 1.0, 0.1);
    CHECK(to_json(svr_from_json(to_json(svr))) == to_json(svr));
}
