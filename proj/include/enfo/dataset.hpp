#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace enfo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Per-column z-score transform. Features and target are scaled
/// independently; every std is strictly positive.
struct Standardization {
    Vector feature_mean;
    Vector feature_std;
    double target_mean = 0.0;
    double target_std = 1.0;
};

/// N×d features with an N-vector target. When `standardization` is set the
/// values are in standardized units and the recorded transform maps them back.
struct Dataset {
    Matrix features;
    Vector target;
    std::vector<std::string> feature_names;
    std::optional<Standardization> standardization;

    Index rows() const { return features.rows(); }
    Index dim() const { return features.cols(); }
};

/// Builds a dataset with default names x0..x{d-1}. Validates.
Dataset make_dataset(Matrix features, Vector target);

/// Throws InputError unless every invariant holds (N, d >= 1, matching
/// lengths, finite values, positive recorded stds, d names).
void validate(const Dataset& data);

std::vector<std::string> default_feature_names(Index d);

/// Column statistics of `data`. Zero-variance columns get std 1 so the
/// transform stays invertible.
Standardization fit_standardization(const Dataset& data);

Dataset standardize(const Dataset& data, const Standardization& s);

/// Inverse of `standardize`; requires a recorded transform and clears it.
Dataset destandardize(const Dataset& data);

Dataset select_rows(const Dataset& data, const std::vector<Index>& rows);

/// Row-wise concatenation. Both sides must share width and transform state.
Dataset concat(const Dataset& a, const Dataset& b);

/// N×(d+1) matrix of [features | target].
Matrix joint_rows(const Dataset& data);

}  // namespace enfo
