#include "enfo/dataset.hpp"

#include "enfo/error.hpp"

#include <cmath>

namespace enfo {

std::vector<std::string> default_feature_names(Index d) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

Dataset make_dataset(Matrix features, Vector target) {
    Dataset data;
    data.feature_names = default_feature_names(features.cols());
    data.features = std::move(features);
    data.target = std::move(target);
    validate(data);
    return data;
}

void validate(const Dataset& data) {
    require(data.rows() >= 1, "dataset must have at least one row");
    require(data.dim() >= 1, "dataset must have at least one feature");
    require(data.target.size() == data.rows(),
            "target length " + std::to_string(data.target.size()) + " does not match " +
                std::to_string(data.rows()) + " feature rows");
    require(static_cast<Index>(data.feature_names.size()) == data.dim(),
            "feature name count does not match feature width");
    require(data.features.allFinite(), "features contain NaN or Inf");
    require(data.target.allFinite(), "target contains NaN or Inf");
    if (data.standardization) {
        const auto& s = *data.standardization;
        require(s.feature_mean.size() == data.dim() && s.feature_std.size() == data.dim(),
                "standardization width does not match features");
        require((s.feature_std.array() > 0.0).all() && s.target_std > 0.0,
                "standardization std must be positive");
    }
}

Standardization fit_standardization(const Dataset& data) {
    validate(data);
    const double n = static_cast<double>(data.rows());
    Standardization s;
    s.feature_mean = data.features.colwise().mean().transpose();
    s.feature_std.resize(data.dim());
    for (Index j = 0; j < data.dim(); ++j) {
        const double var =
            (data.features.col(j).array() - s.feature_mean(j)).square().sum() / n;
        s.feature_std(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    s.target_mean = data.target.mean();
    const double tvar = (data.target.array() - s.target_mean).square().sum() / n;
    s.target_std = tvar > 0.0 ? std::sqrt(tvar) : 1.0;
    return s;
}

Dataset standardize(const Dataset& data, const Standardization& s) {
    require(!data.standardization, "dataset is already standardized");
    require(s.feature_mean.size() == data.dim(), "standardization width mismatch");
    Dataset out = data;
    out.features = ((data.features.rowwise() - s.feature_mean.transpose()).array().rowwise() /
                    s.feature_std.transpose().array())
                       .matrix();
    out.target = ((data.target.array() - s.target_mean) / s.target_std).matrix();
    out.standardization = s;
    return out;
}

Dataset destandardize(const Dataset& data) {
    require(data.standardization.has_value(), "dataset carries no standardization");
    const auto& s = *data.standardization;
    Dataset out = data;
    out.features = ((data.features.array().rowwise() * s.feature_std.transpose().array())
                        .rowwise() +
                    s.feature_mean.transpose().array())
                       .matrix();
    out.target = (data.target.array() * s.target_std + s.target_mean).matrix();
    out.standardization.reset();
    return out;
}

Dataset select_rows(const Dataset& data, const std::vector<Index>& rows) {
    Dataset out;
    out.feature_names = data.feature_names;
    out.standardization = data.standardization;
    out.features.resize(static_cast<Index>(rows.size()), data.dim());
    out.target.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < data.rows(), "row index out of range");
        out.features.row(static_cast<Index>(i)) = data.features.row(rows[i]);
        out.target(static_cast<Index>(i)) = data.target(rows[i]);
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    require(a.dim() == b.dim(), "cannot concatenate datasets of different width");
    require(a.standardization.has_value() == b.standardization.has_value(),
            "cannot concatenate standardized with raw data");
    Dataset out;
    out.feature_names = a.feature_names;
    out.standardization = a.standardization;
    out.features.resize(a.rows() + b.rows(), a.dim());
    out.features << a.features, b.features;
    out.target.resize(a.rows() + b.rows());
    out.target << a.target, b.target;
    return out;
}

Matrix joint_rows(const Dataset& data) {
    Matrix out(data.rows(), data.dim() + 1);
    out << data.features, data.target;
    return out;
}

}  // namespace enfo
