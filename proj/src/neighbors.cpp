#include "distkern/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "distkern/error.hpp"

namespace distkern {

namespace {

constexpr std::uint32_t kLeafSize = 8;

/// The k smallest squared distances seen so far, ascending. k is small.
class TopK {
public:
    explicit TopK(int k) : k_(static_cast<std::size_t>(k)), d_(k_, std::numeric_limits<double>::infinity()) {}

    double worst() const noexcept { return d_[k_ - 1]; }

    void offer(double d2) noexcept {
        if (d2 >= d_[k_ - 1]) return;
        std::size_t pos = k_ - 1;
        while (pos > 0 && d_[pos - 1] > d2) {
            d_[pos] = d_[pos - 1];
            --pos;
        }
        d_[pos] = d2;
    }

private:
    std::size_t k_;
    std::vector<double> d_;
};

inline double squared_distance(const double* a, const double* b, std::size_t dim) noexcept {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
        const double t = a[c] - b[c];
        s += t * t;
    }
    return s;
}

void check_k(int k) {
    if (k < 1) throw ConfigError("neighbor index k must be >= 1, got " + std::to_string(k));
}

}  // namespace

Backend resolve_backend(Backend requested, std::size_t dim, std::size_t n_query, std::size_t n_target) {
    if (requested != Backend::automatic) return requested;
    const double work = static_cast<double>(n_query) * static_cast<double>(n_target);
    return (dim <= kTreeMaxDim && work > kTreeWorkThreshold) ? Backend::kdtree : Backend::brute;
}

KdTree::KdTree(const Matrix& points) : points_(&points), dim_(points.cols()) {
    order_.resize(points.rows());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points.rows() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points.rows()));
    packed_.resize(points.rows() * dim_);
    for (std::size_t i = 0; i < order_.size(); ++i) {
        auto row = points.row(order_[i]);
        std::copy(row.begin(), row.end(), packed_.begin() + i * dim_);
    }
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t c = 0; c < dim_; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::uint32_t i = begin; i < end; ++i) {
            const double v = (*points_)(order_[i], c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best_dim = c;
        }
    }
    if (best_spread <= 0.0) return id;  // all points identical: keep as a leaf

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double va = (*points_)(a, best_dim);
                         const double vb = (*points_)(b, best_dim);
                         return va < vb || (va == vb && a < b);
                     });
    const double split = (*points_)(order_[mid], best_dim);
    nodes_[id].split_dim = static_cast<std::uint32_t>(best_dim);
    nodes_[id].split_value = split;
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].left = static_cast<std::int32_t>(left);
    nodes_[id].right = static_cast<std::int32_t>(right);
    return id;
}

double KdTree::kth_squared(std::span<const double> query, int k, std::size_t skip) const {
    TopK best(k);
    // Explicit stack of (node, squared lower bound on distance to the node's region).
    struct Item {
        std::uint32_t node;
        double bound;
    };
    std::vector<Item> stack;
    stack.reserve(64);
    stack.push_back({0, 0.0});
    const double* q = query.data();
    while (!stack.empty()) {
        const Item item = stack.back();
        stack.pop_back();
        if (item.bound > best.worst()) continue;
        const Node& node = nodes_[item.node];
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                if (order_[i] == skip) continue;
                best.offer(squared_distance(q, packed_.data() + std::size_t{i} * dim_, dim_));
            }
            continue;
        }
        const double diff = q[node.split_dim] - node.split_value;
        const double plane = diff * diff;
        const auto near = static_cast<std::uint32_t>(diff < 0.0 ? node.left : node.right);
        const auto far = static_cast<std::uint32_t>(diff < 0.0 ? node.right : node.left);
        // Push far first so the near child is searched first.
        stack.push_back({far, std::max(item.bound, plane)});
        stack.push_back({near, item.bound});
    }
    return best.worst();
}

NeighborIndex::NeighborIndex(const SampleSet& set, Backend backend) : set_(&set), backend_(backend) {
    if (backend_ != Backend::brute && (backend_ == Backend::kdtree || set.dim() <= kTreeMaxDim))
        tree_.emplace(set.points());
}

Backend NeighborIndex::effective(std::size_t n_query) const {
    const Backend b = resolve_backend(backend_, set_->dim(), n_query, set_->size());
    return (b == Backend::kdtree && tree_) ? Backend::kdtree : Backend::brute;
}

std::vector<double> NeighborIndex::within(int k) const {
    check_k(k);
    const std::size_t n = set_->size();
    if (n < static_cast<std::size_t>(k) + 1)
        throw DataError("set '" + set_->id() + "' has " + std::to_string(n) +
                        " points; within-set k-NN with k=" + std::to_string(k) +
                        " needs at least k+1");
    const std::size_t dim = set_->dim();
    std::vector<double> out(n);
    if (effective(n) == Backend::kdtree) {
        for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(tree_->kth_squared(set_->point(i), k, i));
        return out;
    }
    const double* base = set_->points().data().data();
    for (std::size_t i = 0; i < n; ++i) {
        TopK best(k);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) best.offer(squared_distance(base + i * dim, base + j * dim, dim));
        out[i] = std::sqrt(best.worst());
    }
    return out;
}

std::vector<double> NeighborIndex::cross(const SampleSet& query, int k) const {
    check_k(k);
    if (query.dim() != set_->dim())
        throw DataError("dimension mismatch: query set '" + query.id() + "' has d=" +
                        std::to_string(query.dim()) + ", target '" + set_->id() + "' has d=" +
                        std::to_string(set_->dim()));
    const std::size_t m = set_->size();
    if (m < static_cast<std::size_t>(k))
        throw DataError("target set '" + set_->id() + "' has " + std::to_string(m) +
                        " points; cross k-NN with k=" + std::to_string(k) + " needs at least k");
    const std::size_t n = query.size();
    const std::size_t dim = set_->dim();
    std::vector<double> out(n);
    if (effective(n) == Backend::kdtree) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = std::sqrt(tree_->kth_squared(query.point(i), k, KdTree::npos));
        return out;
    }
    const double* qbase = query.points().data().data();
    const double* tbase = set_->points().data().data();
    for (std::size_t i = 0; i < n; ++i) {
        TopK best(k);
        for (std::size_t j = 0; j < m; ++j) best.offer(squared_distance(qbase + i * dim, tbase + j * dim, dim));
        out[i] = std::sqrt(best.worst());
    }
    return out;
}

std::vector<double> knn_within(const SampleSet& set, int k, Backend backend) {
    return NeighborIndex(set, backend).within(k);
}

std::vector<double> knn_cross(const SampleSet& query, const SampleSet& target, int k, Backend backend) {
    return NeighborIndex(target, backend).cross(query, k);
}

}  // namespace distkern
