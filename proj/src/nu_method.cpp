#include "enfo/nu_method.hpp"

#include "enfo/error.hpp"
#include "enfo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enfo {

NuCoefficients nu_coefficients(double nu, int t) {
    require(nu > 0.0 && std::isfinite(nu), "nu must be positive");
    require(t >= 1, "iteration index must be >= 1");
    const double tt = static_cast<double>(t);
    NuCoefficients c;
    // The (t-1) factor kills u at t=1; skip the division since nu=1/2 makes
    // the last denominator factor vanish there too.
    c.momentum = t == 1 ? 0.0 : (tt - 1.0) * (2.0 * tt - 3.0) * (2.0 * tt + 2.0 * nu - 1.0) /
                 ((tt + 2.0 * nu - 1.0) * (2.0 * tt + 4.0 * nu - 1.0) *
                  (2.0 * tt + 2.0 * nu - 3.0));
    c.step = 4.0 * (2.0 * tt + 2.0 * nu - 1.0) * (tt + nu - 1.0) /
             ((tt + 2.0 * nu - 1.0) * (2.0 * tt + 4.0 * nu - 1.0));
    return c;
}

void validate(const NuMethodModel& model) {
    validate(model.kernel);
    require(model.alpha.size() == model.support_points.rows(),
            "alpha length does not match support point count");
    require(model.nu > 0.0, "nu must be positive");
    require(model.iterations >= 1, "iterations must be >= 1");
}

NuRecursion::NuRecursion(const Matrix& gram, const Vector& target, double nu)
    : gram_(gram),
      target_(target),
      nu_(nu),
      inv_n_(1.0 / static_cast<double>(target.size())),
      current_(Vector::Zero(target.size())),
      previous_(Vector::Zero(target.size())),
      scratch_(target.size()) {
    require(gram.rows() == gram.cols() && gram.rows() == target.size(),
            "Gram matrix and target sizes differ");
    require(nu > 0.0, "nu must be positive");
}

void NuRecursion::step() {
    ++t_;
    const NuCoefficients c = nu_coefficients(nu_, t_);
    scratch_.noalias() = gram_ * current_;
    // next = cur + u (cur - prev) + (omega / n) (y - K cur), written into previous_.
    previous_ = current_ + c.momentum * (current_ - previous_) +
                (c.step * inv_n_) * (target_ - scratch_);
    current_.swap(previous_);
}

Vector nu_method_alpha(const Matrix& gram, const Vector& target, double nu, int iterations) {
    require(iterations >= 1, "iterations must be >= 1");
    NuRecursion rec(gram, target, nu);
    for (int t = 0; t < iterations; ++t) rec.step();
    return rec.alpha();
}

NuMethodModel nu_method_fit(const Dataset& data, const KernelSpec& kernel, double nu,
                            int iterations) {
    validate(data);
    validate(kernel);
    NuMethodModel model;
    model.support_points = data.features;
    model.nu = nu;
    model.iterations = iterations;
    model.kernel = kernel;
    model.standardization = data.standardization;
    const Matrix gram = kernel_matrix(kernel, data.features);
    model.alpha = nu_method_alpha(gram, data.target, nu, iterations);
    return model;
}

Vector predict(const NuMethodModel& model, const Matrix& points) {
    require(points.cols() == model.support_points.cols(),
            "predict: query width " + std::to_string(points.cols()) +
                " does not match support width " +
                std::to_string(model.support_points.cols()));
    return kernel_matrix(model.kernel, points, model.support_points) * model.alpha;
}

void validate(const CvPlan& plan) {
    require(plan.t_max >= 1, "t_max must be >= 1");
    if (plan.holdout_fraction) {
        require(*plan.holdout_fraction > 0.0 && *plan.holdout_fraction < 1.0,
                "holdout fraction must lie in (0, 1)");
    } else {
        require(plan.folds >= 2, "cross-validation needs at least 2 folds");
    }
}

std::vector<FoldSplit> make_folds(Index n, const CvPlan& plan) {
    validate(plan);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto rng = make_rng(plan.seed, 0x666f6c6473ULL);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<FoldSplit> folds;
    if (plan.holdout_fraction) {
        require(n >= 2, "holdout validation needs at least 2 rows");
        Index n_val = static_cast<Index>(std::llround(*plan.holdout_fraction * n));
        n_val = std::clamp<Index>(n_val, 1, n - 1);
        FoldSplit split;
        split.validation.assign(perm.begin(), perm.begin() + n_val);
        split.train.assign(perm.begin() + n_val, perm.end());
        folds.push_back(std::move(split));
        return folds;
    }
    require(n >= 2 * plan.folds, "cross-validation with " + std::to_string(plan.folds) +
                                     " folds needs at least " +
                                     std::to_string(2 * plan.folds) + " rows, got " +
                                     std::to_string(n));
    folds.resize(static_cast<std::size_t>(plan.folds));
    for (Index p = 0; p < n; ++p) {
        const auto f = static_cast<std::size_t>(p % plan.folds);
        for (std::size_t g = 0; g < folds.size(); ++g) {
            (g == f ? folds[g].validation : folds[g].train).push_back(perm[p]);
        }
    }
    return folds;
}

int argmin_with_ties(const std::vector<double>& losses) {
    require(!losses.empty(), "no losses to minimize");
    const double best = *std::min_element(losses.begin(), losses.end());
    const double cutoff = best + kIterationTieTolerance * std::abs(best);
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (losses[i] <= cutoff) return static_cast<int>(i) + 1;
    }
    return 1;
}

IterationSelection select_iterations_detailed(const Dataset& data, const KernelSpec& kernel,
                                              double nu, const CvPlan& plan) {
    validate(data);
    validate(kernel);
    const auto folds = make_folds(data.rows(), plan);

    IterationSelection sel;
    sel.validation_loss.assign(static_cast<std::size_t>(plan.t_max), 0.0);
    for (const auto& fold : folds) {
        const Dataset train = select_rows(data, fold.train);
        const Dataset val = select_rows(data, fold.validation);
        const Matrix gram = kernel_matrix(kernel, train.features);
        const Matrix cross = kernel_matrix(kernel, val.features, train.features);
        NuRecursion rec(gram, train.target, nu);
        Vector pred(val.rows());
        for (int t = 1; t <= plan.t_max; ++t) {
            rec.step();
            pred.noalias() = cross * rec.alpha();
            sel.validation_loss[static_cast<std::size_t>(t - 1)] +=
                (pred - val.target).squaredNorm() / static_cast<double>(val.rows());
        }
    }
    for (double& l : sel.validation_loss) l /= static_cast<double>(folds.size());
    for (double l : sel.validation_loss) {
        if (!std::isfinite(l)) throw NumericalError("non-finite validation loss during CV");
    }
    sel.best = argmin_with_ties(sel.validation_loss);
    return sel;
}

int select_iterations(const Dataset& data, const KernelSpec& kernel, double nu,
                      const CvPlan& plan) {
    return select_iterations_detailed(data, kernel, nu, plan).best;
}

}  // namespace enfo
