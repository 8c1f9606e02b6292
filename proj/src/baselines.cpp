#include "enfo/baselines.hpp"

#include "enfo/error.hpp"
#include "enfo/metrics.hpp"
#include "enfo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enfo {

namespace {

void check_width(const Matrix& support, const Matrix& points) {
    require(points.cols() == support.cols(),
            "predict: query width " + std::to_string(points.cols()) +
                " does not match support width " + std::to_string(support.cols()));
}

}  // namespace

KrrModel krr_fit(const Dataset& data, const KernelSpec& kernel, double ridge) {
    validate(data);
    validate(kernel);
    require(ridge > 0.0 && std::isfinite(ridge), "ridge must be positive");
    const double n = static_cast<double>(data.rows());
    Matrix system = kernel_matrix(kernel, data.features);
    system.diagonal().array() += ridge * n;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) throw NumericalError("KRR system is not positive definite");
    KrrModel model;
    model.support_points = data.features;
    model.alpha = llt.solve(data.target);
    model.ridge = ridge;
    model.kernel = kernel;
    return model;
}

Vector predict(const KrrModel& model, const Matrix& points) {
    check_width(model.support_points, points);
    return kernel_matrix(model.kernel, points, model.support_points) * model.alpha;
}

std::vector<double> default_ridge_grid() {
    std::vector<double> grid;
    for (int k = -8; k <= 0; ++k) grid.push_back(std::pow(10.0, 0.5 * k));
    return grid;
}

double select_ridge(const Dataset& data, const KernelSpec& kernel, const std::vector<double>& grid,
                    int folds, std::uint64_t seed) {
    require(!grid.empty(), "ridge grid is empty");
    CvPlan plan;
    plan.folds = folds;
    plan.seed = seed;
    const auto splits = make_folds(data.rows(), plan);
    std::vector<double> loss(grid.size(), 0.0);
    for (const auto& split : splits) {
        const Dataset train = select_rows(data, split.train);
        const Dataset val = select_rows(data, split.validation);
        const Matrix gram = kernel_matrix(kernel, train.features);
        const Matrix cross = kernel_matrix(kernel, val.features, train.features);
        const double n = static_cast<double>(train.rows());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            Matrix system = gram;
            system.diagonal().array() += grid[g] * n;
            const Vector alpha = system.llt().solve(train.target);
            loss[g] += (cross * alpha - val.target).squaredNorm() / static_cast<double>(val.rows());
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        if (loss[g] <= loss[best]) best = g;
    }
    return grid[best];
}

namespace {

double median_of(const Vector& v) {
    std::vector<double> values(v.data(), v.data() + v.size());
    return percentile(std::move(values), 50.0);
}

double tube_loss_sum(const Vector& fitted, const Vector& target, double eps) {
    return ((fitted - target).array().abs() - eps).max(0.0).sum();
}

double objective_of(const Matrix& gram, const Vector& target, const Vector& alpha, double bias,
                    double eps, double c) {
    const Vector f = gram * alpha;
    return 0.5 * alpha.dot(f) + c * tube_loss_sum(f.array() + bias, target, eps);
}

}  // namespace

SvrModel svr_fit(const Dataset& data, const KernelSpec& kernel, const SvrSettings& s,
                 std::vector<double>* objective_trace) {
    validate(data);
    validate(kernel);
    require(s.epsilon_tube >= 0.0, "epsilon_tube must be >= 0");
    require(s.c_penalty > 0.0, "c_penalty must be positive");
    require(s.iters >= 1, "SVR iterations must be >= 1");
    require(s.batch_size >= 0, "SVR batch size must be >= 0");

    const Index n = data.rows();
    const Matrix gram = kernel_matrix(kernel, data.features);
    const Vector& y = data.target;
    const double y_mean = y.mean();
    const double y_scale = std::max(std::sqrt((y.array() - y_mean).square().mean()), 1e-12);
    const Index batch = (s.batch_size == 0 || s.batch_size >= n) ? n : s.batch_size;
    const double eta0 = 1.0 / (1.0 + s.c_penalty);

    Vector alpha = Vector::Zero(n);
    double bias = median_of(y);
    Vector alpha_avg = Vector::Zero(n);
    double bias_avg = 0.0;

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    auto rng = make_rng(s.seed, 0x737672ULL);
    std::size_t cursor = order.size();
    std::vector<Index> rows(static_cast<std::size_t>(batch));
    int next_checkpoint = 1;

    for (int t = 1; t <= s.iters; ++t) {
        if (batch == n) {
            std::iota(rows.begin(), rows.end(), Index{0});
        } else {
            for (auto& r : rows) {
                if (cursor == order.size()) {
                    std::shuffle(order.begin(), order.end(), rng);
                    cursor = 0;
                }
                r = order[cursor++];
            }
        }
        // Subgradient of the tube loss; the RKHS gradient of 0.5||f||^2 is
        // alpha itself in these coordinates.
        const double eta = eta0 / std::sqrt(static_cast<double>(t));
        const double scale = static_cast<double>(n) / static_cast<double>(batch);
        Vector sign_step = Vector::Zero(n);
        double sign_sum = 0.0;
        for (Index r : rows) {
            const double residual = gram.row(r).dot(alpha) + bias - y(r);
            if (std::abs(residual) > s.epsilon_tube) {
                const double g = residual > 0.0 ? 1.0 : -1.0;
                sign_step(r) += g;
                sign_sum += g;
            }
        }
        alpha = (1.0 - eta) * alpha - eta * s.c_penalty * scale * sign_step;
        bias -= eta * y_scale * sign_sum / static_cast<double>(batch);

        const double w = 1.0 / static_cast<double>(t);
        alpha_avg += w * (alpha - alpha_avg);
        bias_avg += w * (bias - bias_avg);

        if (objective_trace && (t == next_checkpoint || t == s.iters)) {
            objective_trace->push_back(
                objective_of(gram, y, alpha_avg, bias_avg, s.epsilon_tube, s.c_penalty));
            next_checkpoint *= 2;
        }
    }

    SvrModel model;
    model.support_points = data.features;
    model.alpha = alpha_avg;
    model.bias = bias_avg;
    model.epsilon_tube = s.epsilon_tube;
    model.c_penalty = s.c_penalty;
    model.kernel = kernel;
    if (!model.alpha.allFinite() || !std::isfinite(model.bias)) {
        throw NumericalError("SVR iterates diverged");
    }
    return model;
}

double svr_objective(const SvrModel& model, const Dataset& data) {
    const Matrix gram = kernel_matrix(model.kernel, data.features, model.support_points);
    const Vector f = gram * model.alpha;
    const Matrix self = kernel_matrix(model.kernel, model.support_points);
    return 0.5 * model.alpha.dot(self * model.alpha) +
           model.c_penalty * tube_loss_sum(f.array() + model.bias, data.target, model.epsilon_tube);
}

Vector predict(const SvrModel& model, const Matrix& points) {
    check_width(model.support_points, points);
    Vector out = kernel_matrix(model.kernel, points, model.support_points) * model.alpha;
    out.array() += model.bias;
    return out;
}

Vector predict(const AnyModel& model, const Matrix& points) {
    return std::visit([&](const auto& m) -> Vector { return predict(m, points); }, model);
}

double model_rmse(const AnyModel& model, const Dataset& test) {
    validate(test);
    return rmse(predict(model, test.features), test.target);
}

}  // namespace enfo
