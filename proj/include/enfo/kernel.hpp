#pragma once

#include "enfo/dataset.hpp"

#include <cstdint>
#include <string>

namespace enfo {

enum class KernelFamily { gaussian };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Mercer kernel definition. Bandwidth is in standardized feature units.
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double bandwidth = 1.0;
};

void validate(const KernelSpec& spec);

/// exp(-|a-b|^2 / (2 h^2)).
double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& a,
                   const Eigen::Ref<const Vector>& b);

/// Entry (i, j) is kernel_eval(rows.row(i), cols.row(j)), evaluated with the
/// same summation order so results are bit-identical.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& rows, const Matrix& cols);

/// Symmetric Gram matrix of `points` with unit diagonal.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& points);

/// Median pairwise Euclidean distance over at most `max_points` rows (a
/// seeded subsample when there are more). Returns 1 for degenerate inputs.
double median_bandwidth(const Matrix& points, std::uint64_t seed = 0,
                        Index max_points = 2000);

}  // namespace enfo
