#include "distkern/sampleset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "distkern/error.hpp"
#include "distkern/rng.hpp"

namespace distkern {

namespace fs = std::filesystem;
using nlohmann::json;

SampleSet::SampleSet(Matrix points, std::string id) : points_(std::move(points)), id_(std::move(id)) {
    if (points_.rows() == 0 || points_.cols() == 0)
        throw DataError("sample set '" + id_ + "' is empty");
    for (std::size_t r = 0; r < points_.rows(); ++r)
        for (double v : points_.row(r))
            if (!std::isfinite(v))
                throw DataError("sample set '" + id_ + "' has a non-finite value in row " +
                                std::to_string(r));
}

Dataset::Dataset(std::vector<SampleSet> sets, Labels labels, std::vector<Partition> partition)
    : sets_(std::move(sets)), labels_(std::move(labels)), partition_(std::move(partition)) {
    for (const auto& s : sets_)
        if (s.dim() != sets_.front().dim())
            throw DataError("dimension mismatch: set '" + s.id() + "' has d=" +
                            std::to_string(s.dim()) + ", expected d=" +
                            std::to_string(sets_.front().dim()));
    if (partition_.empty()) partition_.assign(sets_.size(), Partition::unspecified);
    if (partition_.size() != sets_.size())
        throw DataError("partition length does not match number of sets");

    if (const auto* c = std::get_if<ClassLabels>(&labels_)) {
        if (c->size() != sets_.size()) throw DataError("label count does not match number of sets");
        std::set<int> distinct(c->begin(), c->end());
        if (!distinct.empty() &&
            (*distinct.begin() != 0 || *distinct.rbegin() != static_cast<int>(distinct.size()) - 1))
            throw DataError("class labels must form the contiguous range 0..r-1");
    } else if (const auto* t = std::get_if<RealTargets>(&labels_)) {
        if (t->size() != sets_.size()) throw DataError("label count does not match number of sets");
        for (double v : *t)
            if (!std::isfinite(v)) throw DataError("non-finite regression target");
    }
}

const ClassLabels& Dataset::class_labels() const {
    if (const auto* c = std::get_if<ClassLabels>(&labels_)) return *c;
    throw DataError("dataset has no class labels");
}

const RealTargets& Dataset::real_targets() const {
    if (const auto* t = std::get_if<RealTargets>(&labels_)) return *t;
    throw DataError("dataset has no real-valued targets");
}

int Dataset::num_classes() const {
    const auto* c = std::get_if<ClassLabels>(&labels_);
    if (!c || c->empty()) return 0;
    return *std::max_element(c->begin(), c->end()) + 1;
}

std::vector<std::size_t> Dataset::indices_of(Partition p) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < partition_.size(); ++i)
        if (partition_[i] == p) out.push_back(i);
    return out;
}

bool Dataset::has_partition() const {
    return std::any_of(partition_.begin(), partition_.end(),
                       [](Partition p) { return p != Partition::unspecified; });
}

Matrix read_csv_matrix(const fs::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for '" + what + "': " + path.string());
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t count = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (;;) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p < end && *p == '+') ++p;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc()) {
                // from_chars rejects "inf"/"nan" spellings on some platforms; report as non-finite.
                throw DataError("'" + what + "' row " + std::to_string(rows + 1) +
                                ": cannot parse value or non-finite value");
            }
            if (!std::isfinite(v))
                throw DataError("'" + what + "' row " + std::to_string(rows + 1) + ": non-finite value");
            values.push_back(v);
            ++count;
            p = next;
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) break;
            if (*p != ',')
                throw DataError("'" + what + "' row " + std::to_string(rows + 1) + ": expected ','");
            ++p;
        }
        if (rows == 0) cols = count;
        else if (count != cols)
            throw DataError("'" + what + "' row " + std::to_string(rows + 1) + " has " +
                            std::to_string(count) + " columns, expected " + std::to_string(cols));
        ++rows;
    }
    if (rows == 0) throw DataError("'" + what + "' has no rows: " + path.string());
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data().begin());
    return m;
}

namespace {

Partition parse_partition(const json& j) {
    if (j.is_null()) return Partition::unspecified;
    if (!j.is_string()) throw DataError("partition must be \"train\", \"test\" or null");
    const auto s = j.get<std::string>();
    if (s == "train") return Partition::train;
    if (s == "test") return Partition::test;
    throw DataError("unknown partition '" + s + "'");
}

Labels parse_labels(const std::vector<json>& raw, const std::string& label_type) {
    const auto nulls = std::count_if(raw.begin(), raw.end(), [](const json& j) { return j.is_null(); });
    if (nulls == static_cast<std::ptrdiff_t>(raw.size())) return NoLabels{};
    if (nulls != 0) throw DataError("labels must be given for every group or for none");

    const bool all_strings = std::all_of(raw.begin(), raw.end(), [](const json& j) { return j.is_string(); });
    const bool all_numbers = std::all_of(raw.begin(), raw.end(), [](const json& j) { return j.is_number(); });
    if (!all_strings && !all_numbers) throw DataError("labels mix strings and numbers");

    if (all_strings) {
        if (label_type == "real") throw DataError("string labels cannot be real targets");
        std::map<std::string, int> ids;
        for (const auto& j : raw) ids.emplace(j.get<std::string>(), 0);
        int next = 0;
        for (auto& [name, id] : ids) id = next++;
        ClassLabels out;
        for (const auto& j : raw) out.push_back(ids.at(j.get<std::string>()));
        return out;
    }

    const bool integral = std::all_of(raw.begin(), raw.end(), [](const json& j) {
        const double v = j.get<double>();
        return std::isfinite(v) && v == std::floor(v);
    });
    if (label_type == "class" || (label_type.empty() && integral)) {
        if (!integral) throw DataError("class labels must be integers");
        ClassLabels out;
        for (const auto& j : raw) out.push_back(static_cast<int>(j.get<double>()));
        return out;
    }
    RealTargets out;
    for (const auto& j : raw) out.push_back(j.get<double>());
    return out;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("manifest " + manifest_path.string() + " does not parse: " + e.what());
    }
    if (!manifest.contains("groups") || !manifest["groups"].is_array())
        throw DataError("manifest needs a \"groups\" array");
    const std::string label_type = manifest.value("label_type", std::string{});
    if (!label_type.empty() && label_type != "class" && label_type != "real")
        throw DataError("label_type must be \"class\" or \"real\"");

    const fs::path base = manifest_path.parent_path();
    std::vector<SampleSet> sets;
    std::vector<json> raw_labels;
    std::vector<Partition> partition;
    std::set<std::string> seen;
    for (const auto& g : manifest["groups"]) {
        if (!g.contains("file") || !g["file"].is_string())
            throw DataError("every group needs a \"file\" string");
        fs::path file = g["file"].get<std::string>();
        if (file.is_relative()) file = base / file;
        const std::string id = file.stem().string();
        if (!seen.insert(id).second) throw DataError("duplicate group id '" + id + "'");
        sets.emplace_back(read_csv_matrix(file, id), id);
        raw_labels.push_back(g.value("label", json(nullptr)));
        partition.push_back(parse_partition(g.value("partition", json(nullptr))));
    }
    if (sets.empty()) throw DataError("manifest lists no groups");
    return Dataset(std::move(sets), parse_labels(raw_labels, label_type), std::move(partition));
}

fs::path write_dataset(const Dataset& dataset, const fs::path& dir, const std::string& manifest_name) {
    fs::create_directories(dir);
    json groups = json::array();
    std::set<std::string> seen;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset[i];
        std::string id = s.id().empty() ? "set" + std::to_string(i) : s.id();
        if (!seen.insert(id).second) throw DataError("duplicate group id '" + id + "'");
        const std::string file = id + ".csv";
        std::ofstream out(dir / file, std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / file).string());
        char buf[32];
        for (std::size_t r = 0; r < s.size(); ++r) {
            auto row = s.point(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out << ',';
                auto res = std::to_chars(buf, buf + sizeof buf, row[c]);
                out.write(buf, res.ptr - buf);
            }
            out << '\n';
        }
        json g{{"file", file}};
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, NoLabels>) g["label"] = nullptr;
                else g["label"] = l[i];
            },
            dataset.labels());
        switch (dataset.partition()[i]) {
            case Partition::train: g["partition"] = "train"; break;
            case Partition::test: g["partition"] = "test"; break;
            default: g["partition"] = nullptr; break;
        }
        groups.push_back(std::move(g));
    }
    json manifest{{"groups", groups}};
    if (dataset.has_class_labels()) manifest["label_type"] = "class";
    if (dataset.has_real_targets()) manifest["label_type"] = "real";
    const fs::path path = dir / manifest_name;
    std::ofstream out(path);
    out << manifest.dump(2) << '\n';
    return path;
}

std::vector<Fold> split_folds(std::span<const std::size_t> items, std::span<const int> classes,
                              std::size_t n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw ConfigError("n_folds must be at least 2");
    if (n_folds > items.size())
        throw DataError("cannot split " + std::to_string(items.size()) + " sets into " +
                        std::to_string(n_folds) + " folds");
    if (!classes.empty() && classes.size() != items.size())
        throw DataError("class list length does not match item count");

    // Group by class (a single group when unstratified), shuffle each group, then deal
    // members round-robin; the dealing offset carries over between classes so fold sizes
    // stay within one of each other.
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < items.size(); ++i)
        groups[classes.empty() ? 0 : classes[i]].push_back(items[i]);
    if (!classes.empty())
        for (const auto& [cls, members] : groups)
            if (members.size() < n_folds)
                throw DataError("class " + std::to_string(cls) + " has " +
                                std::to_string(members.size()) + " sets, fewer than " +
                                std::to_string(n_folds) + " folds");

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> blocks(n_folds);
    std::size_t offset = 0;
    for (auto& [cls, members] : groups) {
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t j = 0; j < members.size(); ++j)
            blocks[(offset + j) % n_folds].push_back(members[j]);
        offset = (offset + members.size()) % n_folds;
    }

    std::vector<Fold> folds(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        folds[f].test = blocks[f];
        for (std::size_t g = 0; g < n_folds; ++g)
            if (g != f) folds[f].train.insert(folds[f].train.end(), blocks[g].begin(), blocks[g].end());
        std::sort(folds[f].test.begin(), folds[f].test.end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
    }
    return folds;
}

std::vector<Fold> split_folds(const Dataset& dataset, std::size_t n_folds, std::uint64_t seed) {
    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (dataset.has_class_labels()) return split_folds(all, dataset.class_labels(), n_folds, seed);
    return split_folds(all, {}, n_folds, seed);
}

}  // namespace distkern
