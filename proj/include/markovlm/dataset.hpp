#ifndef MARKOVLM_DATASET_HPP
#define MARKOVLM_DATASET_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "markovlm/dag.hpp"
#include "markovlm/error.hpp"

namespace markovlm {

struct Record {
    Path path;
    double response = 0.0;

    bool operator==(const Record&) const = default;
};

// Observed (path, response) pairs on a fixed DAG. Every record is checked
// on insertion, so a PathDataset is always valid for its spec.
class PathDataset {
public:
    PathDataset() = default;
    explicit PathDataset(DagSpec spec) : spec_(std::move(spec)) { require_valid(spec_); }

    PathDataset(DagSpec spec, std::vector<Record> records) : PathDataset(std::move(spec)) {
        records_.reserve(records.size());
        for (auto& r : records) add(std::move(r.path), r.response);
    }

    void add(Path path, double response) {
        if (!path_valid(path, spec_)) {
            throw ValidationError("record " + std::to_string(records_.size() + 1) +
                                  ": path out of range: " + to_string(path));
        }
        if (!std::isfinite(response)) {
            throw ValidationError("record " + std::to_string(records_.size() + 1) +
                                  ": response is not finite");
        }
        records_.push_back(Record{std::move(path), response});
    }

    void reserve(std::size_t n) { records_.reserve(n); }

    const DagSpec& spec() const noexcept { return spec_; }
    const std::vector<Record>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    bool operator==(const PathDataset& other) const {
        return spec_.levels == other.spec_.levels && records_ == other.records_;
    }

private:
    DagSpec spec_;
    std::vector<Record> records_;
};

}  // namespace markovlm

#endif  // MARKOVLM_DATASET_HPP
