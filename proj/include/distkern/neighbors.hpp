#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "distkern/sampleset.hpp"

namespace distkern {

enum class Backend { brute, kdtree, automatic };

struct NeighborConfig {
    int k = 5;
    Backend backend = Backend::automatic;
};

/// `automatic` resolves to the tree when d <= 20 and the number of distance evaluations
/// n*m exceeds this.
inline constexpr double kTreeWorkThreshold = 1e6;
inline constexpr std::size_t kTreeMaxDim = 20;

Backend resolve_backend(Backend requested, std::size_t dim, std::size_t n_query, std::size_t n_target);

/// Exact k-d tree over the points of one set. Leaves hold up to 8 points; splits are at the
/// median of the widest coordinate.
class KdTree {
public:
    explicit KdTree(const Matrix& points);

    /// Squared distance from `query` to its k-th nearest stored point, skipping the stored
    /// point with index `skip` (pass npos to skip nothing).
    double kth_squared(std::span<const double> query, int k, std::size_t skip) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    struct Node {
        std::uint32_t begin, end;  // range into order_
        std::int32_t left = -1, right = -1;
        std::uint32_t split_dim = 0;
        double split_value = 0.0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end);

    const Matrix* points_;
    std::size_t dim_;
    std::vector<std::uint32_t> order_;
    std::vector<double> packed_;  // points in tree order, row-major
    std::vector<Node> nodes_;
};

/// Pre-processed target set for repeated k-th neighbor queries. Holds a reference to the
/// set, which must outlive the index. Read-only after construction, safe to share.
class NeighborIndex {
public:
    NeighborIndex(const SampleSet& set, Backend backend);

    const SampleSet& set() const noexcept { return *set_; }

    /// Within-set: distance from each point of the indexed set to its k-th nearest other point.
    std::vector<double> within(int k) const;

    /// Cross-set: distance from each query point to its k-th nearest indexed point. A query
    /// point equal to an indexed point counts as a neighbor at distance 0.
    std::vector<double> cross(const SampleSet& query, int k) const;

private:
    Backend effective(std::size_t n_query) const;

    const SampleSet* set_;
    Backend backend_;
    std::optional<KdTree> tree_;
};

/// Distances to the k-th nearest neighbor of each point among the other points of `set`.
/// Throws DataError unless the set has at least k+1 points.
std::vector<double> knn_within(const SampleSet& set, int k, Backend backend = Backend::automatic);

/// Distances from each query point to its k-th nearest neighbor in `target`.
/// Throws DataError if target has fewer than k points or dimensions differ.
std::vector<double> knn_cross(const SampleSet& query, const SampleSet& target, int k,
                              Backend backend = Backend::automatic);

}  // namespace distkern
