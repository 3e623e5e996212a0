#include "postratio/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "postratio/error.hpp"

namespace postratio {

namespace {
constexpr int kDatasetVersion = 1;
constexpr int kFeatureMapVersion = 1;
}  // namespace

Label label_from_int(long long value) {
    if (value == 1) return Label::Positive;
    if (value == -1) return Label::Negative;
    throw DataError("invalid label " + std::to_string(value) + " (expected -1 or +1)");
}

void check_dim(std::size_t expected, Point x) {
    if (x.size() != expected) throw DimensionMismatch(expected, x.size());
}

void LabeledDataset::add(Label y, Point x) {
    check_dim(dim_, x);
    for (double v : x) {
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
    labels_.push_back(y);
    features_.insert(features_.end(), x.begin(), x.end());
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
    LabeledDataset out(dim_);
    out.labels_.reserve(rows.size());
    out.features_.reserve(rows.size() * dim_);
    for (std::size_t r : rows) {
        out.labels_.push_back(labels_.at(r));
        auto row = x(r);
        out.features_.insert(out.features_.end(), row.begin(), row.end());
    }
    return out;
}

LabeledDataset LabeledDataset::with_flipped_labels() const {
    LabeledDataset out = *this;
    for (auto& y : out.labels_) y = flip(y);
    return out;
}

void require_non_empty(const LabeledDataset& data, const char* what) {
    if (data.empty()) throw ConfigError(std::string(what) + " dataset is empty");
}

nlohmann::json to_json(const LabeledDataset& data) {
    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        labels.push_back(static_cast<int>(data.label(i)));
        auto row = data.x(i);
        features.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"format", "postratio.dataset"},
            {"version", kDatasetVersion},
            {"dim", data.dim()},
            {"labels", std::move(labels)},
            {"features", std::move(features)}};
}

LabeledDataset dataset_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "postratio.dataset")
        throw DataError("not a dataset envelope");
    if (j.value("version", 0) != kDatasetVersion)
        throw DataError("unsupported dataset envelope version");
    LabeledDataset out(j.at("dim").get<std::size_t>());
    const auto& labels = j.at("labels");
    const auto& features = j.at("features");
    if (labels.size() != features.size()) throw DataError("labels/features length mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto row = features[i].get<std::vector<double>>();
        out.add(label_from_int(labels[i].get<long long>()), row);
    }
    return out;
}

FeatureMap FeatureMap::linear_with_bias(std::size_t input_dim) {
    return FeatureMap(Kind::LinearWithBias, input_dim, input_dim + 1, {}, "linear_with_bias");
}

FeatureMap FeatureMap::linear(std::size_t input_dim) {
    return FeatureMap(Kind::Linear, input_dim, input_dim, {}, "linear");
}

FeatureMap FeatureMap::custom(std::size_t input_dim, std::size_t output_dim, Basis basis,
                              std::string name) {
    if (!basis) throw ConfigError("custom feature map needs a basis function");
    return FeatureMap(Kind::Custom, input_dim, output_dim, std::move(basis), std::move(name));
}

void FeatureMap::basis(Point x, std::span<double> out) const {
    check_dim(input_dim_, x);
    switch (kind_) {
        case Kind::LinearWithBias:
            std::copy(x.begin(), x.end(), out.begin());
            out[input_dim_] = 1.0;
            break;
        case Kind::Linear:
            std::copy(x.begin(), x.end(), out.begin());
            break;
        case Kind::Custom:
            basis_(x, out);
            break;
    }
}

Vector FeatureMap::basis(Point x) const {
    Vector h(static_cast<Eigen::Index>(output_dim_));
    basis(x, {h.data(), output_dim_});
    return h;
}

Vector FeatureMap::operator()(Label y, Point x) const {
    return sign(y) * basis(x);
}

double FeatureMap::score(const Vector& theta, Label y, Point x) const {
    if (static_cast<std::size_t>(theta.size()) != output_dim_)
        throw DimensionMismatch(output_dim_, static_cast<std::size_t>(theta.size()));
    check_dim(input_dim_, x);
    double s = 0.0;
    switch (kind_) {
        case Kind::LinearWithBias:
            for (std::size_t i = 0; i < input_dim_; ++i) s += theta[i] * x[i];
            s += theta[input_dim_];
            break;
        case Kind::Linear:
            for (std::size_t i = 0; i < input_dim_; ++i) s += theta[i] * x[i];
            break;
        case Kind::Custom:
            s = theta.dot(basis(x));
            break;
    }
    return sign(y) * s;
}

nlohmann::json to_json(const FeatureMap& map) {
    if (map.kind() == FeatureMap::Kind::Custom)
        throw ConfigError("custom feature map '" + map.name() + "' cannot be serialized");
    return {{"kind", map.name()},
            {"version", kFeatureMapVersion},
            {"input_dim", map.input_dim()}};
}

FeatureMap feature_map_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    const auto dim = j.at("input_dim").get<std::size_t>();
    if (kind == "linear_with_bias") return FeatureMap::linear_with_bias(dim);
    if (kind == "linear") return FeatureMap::linear(dim);
    throw DataError("unknown feature map kind '" + kind + "'");
}

}  // namespace postratio
