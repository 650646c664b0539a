#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "distkern/matrix.hpp"

namespace distkern {

/// One group of d-dimensional points, treated as an i.i.d. sample of an unknown density.
/// Immutable after construction.
class SampleSet {
public:
    /// Throws DataError on an empty matrix or non-finite coordinates.
    SampleSet(Matrix points, std::string id = {});

    std::size_t size() const noexcept { return points_.rows(); }
    std::size_t dim() const noexcept { return points_.cols(); }
    const Matrix& points() const noexcept { return points_; }
    std::span<const double> point(std::size_t i) const noexcept { return points_.row(i); }
    const std::string& id() const noexcept { return id_; }

private:
    Matrix points_;
    std::string id_;
};

enum class Partition { unspecified, train, test };

/// Labels attached to a dataset: none, integer classes 0..r-1, or real targets.
struct NoLabels {};
using ClassLabels = std::vector<int>;
using RealTargets = std::vector<double>;
using Labels = std::variant<NoLabels, ClassLabels, RealTargets>;

class Dataset {
public:
    Dataset() = default;
    /// Validates the invariants: common dimension, label length, contiguous class ids.
    Dataset(std::vector<SampleSet> sets, Labels labels = NoLabels{},
            std::vector<Partition> partition = {});

    std::size_t size() const noexcept { return sets_.size(); }
    std::size_t dim() const noexcept { return sets_.empty() ? 0 : sets_.front().dim(); }
    const std::vector<SampleSet>& sets() const noexcept { return sets_; }
    const SampleSet& operator[](std::size_t i) const { return sets_.at(i); }
    const Labels& labels() const noexcept { return labels_; }
    const std::vector<Partition>& partition() const noexcept { return partition_; }

    bool has_class_labels() const noexcept { return std::holds_alternative<ClassLabels>(labels_); }
    bool has_real_targets() const noexcept { return std::holds_alternative<RealTargets>(labels_); }
    const ClassLabels& class_labels() const;
    const RealTargets& real_targets() const;
    /// Number of classes r (0 when there are no class labels).
    int num_classes() const;

    std::vector<std::size_t> indices_of(Partition p) const;
    bool has_partition() const;

private:
    std::vector<SampleSet> sets_;
    Labels labels_;
    std::vector<Partition> partition_;
};

/// Reads a JSON manifest `{ "groups": [ { "file", "label", "partition" } ] }` with one
/// headerless CSV per group. Relative file paths resolve against the manifest directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `dataset` as a manifest plus one CSV per group into `dir`. Values are printed with
/// 17 significant digits so that reloading reproduces every coordinate bit-for-bit.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                                    const std::string& manifest_name = "manifest.json");

/// Parses headerless comma-separated floats (LF or CRLF). `what` labels error messages.
Matrix read_csv_matrix(const std::filesystem::path& path, const std::string& what);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded, class-stratified (when class labels exist) partition into `n_folds` folds.
/// Fold f uses the f-th block as its test set.
std::vector<Fold> split_folds(const Dataset& dataset, std::size_t n_folds, std::uint64_t seed);

/// Same, over an explicit subset of indices with optional per-index class labels
/// (empty = unstratified). Folds hold values taken from `items`.
std::vector<Fold> split_folds(std::span<const std::size_t> items, std::span<const int> classes,
                              std::size_t n_folds, std::uint64_t seed);

}  // namespace distkern
