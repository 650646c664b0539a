#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "distkern/error.hpp"
#include "distkern/neighbors.hpp"
#include "distkern/rng.hpp"

using namespace distkern;

namespace {

SampleSet line(std::vector<double> xs, const std::string& id = "line") {
    Matrix m(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
    return SampleSet(std::move(m), id);
}

SampleSet random_set(std::uint64_t seed, std::size_t n, std::size_t d) {
    Rng rng(seed);
    Matrix m(n, d);
    for (double& v : m.data()) v = rng.normal();
    return SampleSet(std::move(m), "r");
}

// Oracle: sort all distances and pick the k-th.
std::vector<double> brute_oracle(const SampleSet& q, const SampleSet& t, int k, bool skip_self) {
    std::vector<double> out;
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (skip_self && i == j) continue;
            double s = 0;
            for (std::size_t c = 0; c < q.dim(); ++c) s += std::pow(q.point(i)[c] - t.point(j)[c], 2);
            d.push_back(std::sqrt(s));
        }
        std::sort(d.begin(), d.end());
        out.push_back(d[static_cast<std::size_t>(k - 1)]);
    }
    return out;
}

}  // namespace

TEST_CASE("within-set distances on a line") {
    const SampleSet s = line({0, 1, 3});
    for (Backend b : {Backend::brute, Backend::kdtree}) {
        CHECK(knn_within(s, 1, b) == std::vector<double>{1, 1, 2});
        CHECK(knn_within(s, 2, b) == std::vector<double>{3, 2, 3});
    }
}

TEST_CASE("cross-set distances include self matches") {
    for (Backend b : {Backend::brute, Backend::kdtree}) {
        CHECK(knn_cross(line({0}), line({1, 2, 4}), 2, b) == std::vector<double>{2});
        const SampleSet r = random_set(5, 40, 3);
        for (double v : knn_cross(r, r, 1, b)) CHECK(v == 0.0);
    }
}

TEST_CASE("tree and brute force agree with the sorting oracle") {
    const SampleSet x = random_set(1, 200, 3);
    const SampleSet y = random_set(2, 150, 3);
    for (int k : {1, 5, 9}) {
        const auto oracle_w = brute_oracle(x, x, k, true);
        const auto oracle_c = brute_oracle(x, y, k, false);
        const auto bw = knn_within(x, k, Backend::brute);
        const auto tw = knn_within(x, k, Backend::kdtree);
        const auto bc = knn_cross(x, y, k, Backend::brute);
        const auto tc = knn_cross(x, y, k, Backend::kdtree);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(bw[i] == doctest::Approx(oracle_w[i]).epsilon(1e-12));
            CHECK(tw[i] == bw[i]);
            CHECK(bc[i] == doctest::Approx(oracle_c[i]).epsilon(1e-12));
            CHECK(tc[i] == bc[i]);
        }
    }
}

TEST_CASE("tree handles duplicates and high dimension") {
    Matrix m(30, 2, 0.5);
    for (std::size_t i = 20; i < 30; ++i) m(i, 0) = static_cast<double>(i);
    const SampleSet dup(m, "dup");
    CHECK(knn_within(dup, 3, Backend::kdtree) == knn_within(dup, 3, Backend::brute));
    const SampleSet hi = random_set(9, 60, 25);
    CHECK(knn_within(hi, 4, Backend::kdtree) == knn_within(hi, 4, Backend::brute));
}

TEST_CASE("distances are non-decreasing in k") {
    const SampleSet x = random_set(3, 100, 2);
    const SampleSet y = random_set(4, 100, 2);
    auto prev_w = knn_within(x, 1);
    auto prev_c = knn_cross(x, y, 1);
    for (int k = 2; k <= 10; ++k) {
        const auto w = knn_within(x, k);
        const auto c = knn_cross(x, y, k);
        for (std::size_t i = 0; i < w.size(); ++i) {
            CHECK(w[i] >= prev_w[i]);
            CHECK(c[i] >= prev_c[i]);
        }
        prev_w = w;
        prev_c = c;
    }
}

TEST_CASE("permuting the query permutes the output") {
    const SampleSet x = random_set(6, 80, 2);
    const SampleSet y = random_set(7, 90, 2);
    std::vector<std::size_t> perm(x.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(8);
    rng.shuffle(std::span<std::size_t>(perm));
    Matrix pm(x.size(), 2);
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t c = 0; c < 2; ++c) pm(i, c) = x.point(perm[i])[c];
    const SampleSet px(pm, "p");
    for (Backend b : {Backend::brute, Backend::kdtree}) {
        const auto w = knn_within(x, 5, b), pw = knn_within(px, 5, b);
        const auto c = knn_cross(x, y, 5, b), pc = knn_cross(px, y, 5, b);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            CHECK(pw[i] == w[perm[i]]);
            CHECK(pc[i] == c[perm[i]]);
        }
    }
}

TEST_CASE("neighbor errors") {
    CHECK_THROWS_AS(knn_within(line({0, 1, 3}), 3), DataError);
    CHECK_THROWS_AS(knn_cross(line({0}), line({1, 2}), 3), DataError);
    CHECK_THROWS_AS(knn_cross(line({0}), random_set(1, 10, 2), 1), DataError);
    CHECK_THROWS(knn_within(line({0, 1, 3}), 0));
}

TEST_CASE("automatic backend follows the work threshold") {
    CHECK(resolve_backend(Backend::automatic, 2, 100, 100) == Backend::brute);
    CHECK(resolve_backend(Backend::automatic, 2, 2000, 2000) == Backend::kdtree);
    CHECK(resolve_backend(Backend::automatic, 21, 2000, 2000) == Backend::brute);
    CHECK(resolve_backend(Backend::kdtree, 2, 10, 10) == Backend::kdtree);
}
