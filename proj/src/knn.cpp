#include "postratio/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "postratio/error.hpp"

namespace postratio {

namespace {

struct Candidate {
    double d2;
    std::size_t id;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
};

double squared_distance(const double* a, Point b) {
    double s = 0.0;
    for (std::size_t c = 0; c < b.size(); ++c) {
        const double diff = a[c] - b[c];
        s += diff * diff;
    }
    return s;
}

}  // namespace

KnnIndex::KnnIndex(const LabeledDataset& data) : dim_(data.dim()) {
    require_non_empty(data, "k-NN source");
    ids_.resize(data.size());
    std::iota(ids_.begin(), ids_.end(), std::size_t{0});
    points_ = data.features();
}

KnnIndex::KnnIndex(const LabeledDataset& data, std::span<const std::size_t> rows)
    : dim_(data.dim()), ids_(rows.begin(), rows.end()) {
    if (ids_.empty()) throw ConfigError("k-NN index over an empty row set");
    // Rows are stored in ascending id order so scan order matches the tie rule.
    std::sort(ids_.begin(), ids_.end());
    points_.reserve(ids_.size() * dim_);
    for (std::size_t id : ids_) {
        auto row = data.x(id);
        points_.insert(points_.end(), row.begin(), row.end());
    }
}

NeighborList KnnIndex::query(Point x, std::size_t k) const {
    check_dim(dim_, x);
    if (k == 0) throw ConfigError("k must be >= 1");
    NeighborList out;
    out.truncated = k > ids_.size();
    const std::size_t m = std::min(k, ids_.size());

    std::vector<Candidate> candidates(ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r)
        candidates[r] = {squared_distance(points_.data() + r * dim_, x), ids_[r]};
    if (m < candidates.size()) {
        std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(m),
                         candidates.end());
    }
    std::sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(m));

    out.indices.reserve(m);
    out.distances.reserve(m);
    for (std::size_t r = 0; r < m; ++r) {
        out.indices.push_back(candidates[r].id);
        out.distances.push_back(std::sqrt(candidates[r].d2));
    }
    return out;
}

double KnnIndex::conditional_mean(Point x, std::size_t k, std::span<const double> z) const {
    const auto nb = query(x, k);
    double sum = 0.0;
    for (std::size_t id : nb.indices) {
        if (id >= z.size()) throw DimensionMismatch(id + 1, z.size());
        sum += z[id];
    }
    return sum / static_cast<double>(nb.size());
}

}  // namespace postratio
