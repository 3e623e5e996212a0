#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace postratio {

using Vector = Eigen::VectorXd;
using Point = std::span<const double>;

enum class Label : std::int8_t { Negative = -1, Positive = 1 };

inline constexpr double sign(Label y) { return y == Label::Positive ? 1.0 : -1.0; }
inline constexpr Label flip(Label y) { return y == Label::Positive ? Label::Negative : Label::Positive; }

/// Converts an integer label, throwing DataError unless it is exactly -1 or +1.
Label label_from_int(long long value);

/// Rows of (y, x) with a fixed input dimension. Features are stored row-major.
class LabeledDataset {
public:
    LabeledDataset() = default;
    explicit LabeledDataset(std::size_t dim) : dim_(dim) {}

    /// Appends a sample. Throws DimensionMismatch or DataError on non-finite values.
    void add(Label y, Point x);

    std::size_t size() const { return labels_.size(); }
    std::size_t dim() const { return dim_; }
    bool empty() const { return labels_.empty(); }

    Label label(std::size_t i) const { return labels_[i]; }
    Point x(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }

    const std::vector<Label>& labels() const { return labels_; }
    const std::vector<double>& features() const { return features_; }

    /// Copy of the rows at `rows`, in that order.
    LabeledDataset subset(std::span<const std::size_t> rows) const;
    /// Copy with every label negated.
    LabeledDataset with_flipped_labels() const;

    bool operator==(const LabeledDataset&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<Label> labels_;
    std::vector<double> features_;
};

/// Throws ConfigError naming `what` when the dataset is empty.
void require_non_empty(const LabeledDataset& data, const char* what);

nlohmann::json to_json(const LabeledDataset& data);
LabeledDataset dataset_from_json(const nlohmann::json& j);

/// Sufficient statistics f(y, x) = y * h(x) for the posterior-ratio model.
///
/// Every kind is antisymmetric in y by construction: only the basis h is
/// configurable, the label always enters as a global sign.
class FeatureMap {
public:
    enum class Kind { LinearWithBias, Linear, Custom };
    using Basis = std::function<void(Point x, std::span<double> out)>;

    /// h(x) = [x, 1]. The default used throughout.
    static FeatureMap linear_with_bias(std::size_t input_dim);
    /// h(x) = x.
    static FeatureMap linear(std::size_t input_dim);
    /// User-supplied basis writing `output_dim` values. Not serializable.
    static FeatureMap custom(std::size_t input_dim, std::size_t output_dim, Basis basis,
                             std::string name = "custom");

    Kind kind() const { return kind_; }
    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    const std::string& name() const { return name_; }

    void basis(Point x, std::span<double> out) const;
    Vector basis(Point x) const;
    /// f(y, x). Throws DimensionMismatch when x has the wrong length.
    Vector operator()(Label y, Point x) const;
    /// theta^T f(y, x) without allocating.
    double score(const Vector& theta, Label y, Point x) const;

private:
    FeatureMap(Kind kind, std::size_t in, std::size_t out, Basis basis, std::string name)
        : kind_(kind), input_dim_(in), output_dim_(out), basis_(std::move(basis)),
          name_(std::move(name)) {}

    Kind kind_;
    std::size_t input_dim_;
    std::size_t output_dim_;
    Basis basis_;
    std::string name_;
};

nlohmann::json to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const nlohmann::json& j);

/// Checks that `x` has `expected` entries.
void check_dim(std::size_t expected, Point x);

}  // namespace postratio
