#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "postratio/dataset.hpp"

namespace postratio {

struct NeighborList {
    /// Row indices into the dataset the index was built from.
    std::vector<std::size_t> indices;
    std::vector<double> distances;
    /// True when fewer than the requested k points exist.
    bool truncated = false;

    std::size_t size() const { return indices.size(); }
};

/// Exact Euclidean k-nearest-neighbor search over the inputs of a dataset.
///
/// Results are ordered by (squared distance, original row index), so ties are
/// resolved towards the lower index and every query is reproducible. The
/// index is immutable after construction and safe to query concurrently.
class KnnIndex {
public:
    explicit KnnIndex(const LabeledDataset& data);
    /// Index over the given rows only; reported indices still refer to `data`.
    KnnIndex(const LabeledDataset& data, std::span<const std::size_t> rows);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }

    /// The min(k, size()) nearest points. Throws DimensionMismatch or
    /// ConfigError (k == 0).
    NeighborList query(Point x, std::size_t k) const;

    /// Mean of z over the k nearest neighbors of x; z is indexed by the rows
    /// of the original dataset.
    double conditional_mean(Point x, std::size_t k, std::span<const double> z) const;

private:
    std::size_t dim_;
    std::vector<std::size_t> ids_;
    std::vector<double> points_;
};

}  // namespace postratio
