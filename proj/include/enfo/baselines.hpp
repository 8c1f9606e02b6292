#pragma once

#include "enfo/dataset.hpp"
#include "enfo/kernel.hpp"
#include "enfo/linear.hpp"
#include "enfo/nu_method.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace enfo {

struct KrrModel {
    Matrix support_points;
    Vector alpha;
    double ridge = 1e-3;
    KernelSpec kernel;
};

/// Solves (K + ridge * n * I) alpha = y.
KrrModel krr_fit(const Dataset& data, const KernelSpec& kernel, double ridge);

Vector predict(const KrrModel& model, const Matrix& points);

/// Half-decade grid 1e-4, 3.16e-4, ..., 1.
std::vector<double> default_ridge_grid();

/// Ridge from `grid` with the lowest mean k-fold validation MSE (ties go to
/// the larger ridge).
double select_ridge(const Dataset& data, const KernelSpec& kernel,
                    const std::vector<double>& grid, int folds, std::uint64_t seed);

struct SvrModel {
    Matrix support_points;
    Vector alpha;
    double bias = 0.0;
    double epsilon_tube = 0.1;
    double c_penalty = 1.0;
    KernelSpec kernel;
};

struct SvrSettings {
    double epsilon_tube = 0.1;
    double c_penalty = 1.0;
    int iters = 5000;
    std::uint64_t seed = 0;
    /// Rows per stochastic subgradient; 0 uses every row each iteration.
    Index batch_size = 256;
};

/// Averaged stochastic subgradient descent on
/// 0.5 ||f||_K^2 + C sum_i max(0, |f(x_i) + b - y_i| - eps)
/// with step eta0 / sqrt(t) taken in the kernel metric.
SvrModel svr_fit(const Dataset& data, const KernelSpec& kernel, const SvrSettings& settings,
                 std::vector<double>* objective_trace = nullptr);

/// Objective value of `model` on `data`.
double svr_objective(const SvrModel& model, const Dataset& data);

Vector predict(const SvrModel& model, const Matrix& points);

using AnyModel = std::variant<NuMethodModel, LinearModel, KrrModel, SvrModel>;

Vector predict(const AnyModel& model, const Matrix& points);

/// RMSE of `model` on `test` (both in the same units).
double model_rmse(const AnyModel& model, const Dataset& test);

}  // namespace enfo
