#pragma once

#include "enfo/dataset.hpp"

namespace enfo {

/// Minimum-norm least-squares solution of X w = y. Singular values below
/// 1e-10 * sigma_max are truncated, so rank-deficient designs still yield the
/// pseudo-inverse solution.
Vector solve_normal_equations(const Matrix& X, const Vector& y);

}  // namespace enfo
