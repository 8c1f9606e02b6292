#pragma once

#include "enfo/dataset.hpp"
#include "enfo/kernel.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace enfo {

inline constexpr double kDefaultNu = 5.0;

/// Momentum u and step size omega of the nu-method at iteration t.
struct NuCoefficients {
    double momentum = 0.0;
    double step = 0.0;
};

NuCoefficients nu_coefficients(double nu, int t);

/// Kernel expansion f(x) = sum_j alpha_j K(x, support_j) produced by the
/// nu-method after `iterations` steps.
struct NuMethodModel {
    Matrix support_points;
    Vector alpha;
    double nu = kDefaultNu;
    int iterations = 1;
    KernelSpec kernel;
    std::optional<Standardization> standardization;
};

void validate(const NuMethodModel& model);

/// Three-term nu-method recursion on a fixed Gram matrix, starting from
/// alpha^0 = alpha^-1 = 0. Holds only the last two iterates.
class NuRecursion {
public:
    NuRecursion(const Matrix& gram, const Vector& target, double nu);

    /// Advances from t to t+1.
    void step();

    int iteration() const { return t_; }
    const Vector& alpha() const { return current_; }

private:
    const Matrix& gram_;
    const Vector& target_;
    double nu_;
    double inv_n_;
    int t_ = 0;
    Vector current_;
    Vector previous_;
    Vector scratch_;
};

/// alpha^T for the given Gram matrix and target.
Vector nu_method_alpha(const Matrix& gram, const Vector& target, double nu, int iterations);

NuMethodModel nu_method_fit(const Dataset& data, const KernelSpec& kernel, double nu,
                            int iterations);

/// Kernel rows between `points` and the support set, times alpha.
Vector predict(const NuMethodModel& model, const Matrix& points);

/// Cross-validation plan for the iteration count. When `holdout_fraction` is
/// set a single seeded holdout split replaces k-fold.
struct CvPlan {
    int folds = 5;
    std::optional<double> holdout_fraction;
    int t_max = 500;
    std::uint64_t seed = 0;
};

void validate(const CvPlan& plan);

struct IterationSelection {
    int best = 1;
    /// validation_loss[T-1] is the mean validation MSE after T iterations.
    std::vector<double> validation_loss;
};

/// Relative tolerance under which two validation losses count as tied; ties
/// resolve toward the smaller iteration count.
inline constexpr double kIterationTieTolerance = 1e-9;

/// Index (1-based) of the smallest loss, preferring the earliest entry within
/// the tie tolerance.
int argmin_with_ties(const std::vector<double>& losses);

/// Scores every T in [1, t_max] with one recursion sweep per fold.
IterationSelection select_iterations_detailed(const Dataset& data, const KernelSpec& kernel,
                                              double nu, const CvPlan& plan);

int select_iterations(const Dataset& data, const KernelSpec& kernel, double nu,
                      const CvPlan& plan);

/// Validation/training row split used by `select_iterations`, exposed so
/// independent checks can reproduce the exact folds.
struct FoldSplit {
    std::vector<Index> train;
    std::vector<Index> validation;
};

std::vector<FoldSplit> make_folds(Index n, const CvPlan& plan);

}  // namespace enfo
