#include "enfo/datagen.hpp"

#include "enfo/error.hpp"
#include "enfo/metrics.hpp"
#include "enfo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace enfo {

void validate(const FriedmanConfig& c) {
    require(c.n >= 1, "n must be >= 1");
    require(c.noise_std >= 0.0 && std::isfinite(c.noise_std), "noise_std must be >= 0");
}

double friedman3_response(double x1, double x2, double x3, double x4) {
    return std::atan((x2 * x3 - 1.0 / (x2 * x4)) / x1);
}

Dataset gen_friedman3(const FriedmanConfig& c) {
    validate(c);
    constexpr double pi = std::numbers::pi;
    auto rng = make_rng(c.seed, 0x6672646dULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix x(c.n, 4);
    Vector y(c.n);
    for (Index i = 0; i < c.n; ++i) {
        // U[0,100] with the measure-zero endpoint nudged away from 0.
        const double x1 = std::max(100.0 * unit(rng), 1e-12);
        const double x2 = 40.0 * pi + 520.0 * pi * unit(rng);
        const double x3 = unit(rng);
        const double x4 = 1.0 + 10.0 * unit(rng);
        x.row(i) << x1, x2, x3, x4;
        y(i) = friedman3_response(x1, x2, x3, x4);
        if (c.noise_std > 0.0) y(i) += c.noise_std * noise(rng);
    }
    return make_dataset(std::move(x), std::move(y));
}

void validate(const ClvConfig& c) {
    require(c.n >= 1, "n must be >= 1");
    require(c.d_covariates >= 1, "d_covariates must be >= 1");
    require(c.calib_weeks >= 1 && c.holdout_weeks >= 1, "weeks must be >= 1");
    require(c.heterogeneity >= 0.0, "heterogeneity must be >= 0");
    if (c.rate_coefficients) {
        require(c.rate_coefficients->size() == c.d_covariates,
                "rate_coefficients length must equal d_covariates");
    }
    if (c.dropout_coefficients) {
        require(c.dropout_coefficients->size() == c.d_covariates,
                "dropout_coefficients length must equal d_covariates");
    }
}

namespace {

Vector unit_norm_draw(int d, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(d);
    for (int k = 0; k < d; ++k) v(k) = normal(rng);
    const double norm = v.norm();
    return norm > 0.0 ? Vector(v / norm) : Vector(Vector::Unit(d, 0));
}

}  // namespace

Dataset gen_clv(const ClvConfig& c) {
    validate(c);
    auto coef_rng = make_rng(c.seed, 0x636f6566ULL);
    const Vector c_rate = c.rate_coefficients ? *c.rate_coefficients : unit_norm_draw(c.d_covariates, coef_rng);
    const Vector c_drop =
        c.dropout_coefficients ? *c.dropout_coefficients : unit_norm_draw(c.d_covariates, coef_rng);

    auto rng = make_rng(c.seed, 0x636c76ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double calib = c.calib_weeks;
    const double horizon = calib + c.holdout_weeks;
    Matrix x(c.n, c.d_covariates + 1);
    Vector y(c.n);
    for (Index i = 0; i < c.n; ++i) {
        Vector z(c.d_covariates);
        for (int k = 0; k < c.d_covariates; ++k) z(k) = normal(rng);
        const double rate = std::exp(c.rate_intercept + c_rate.dot(z) + c.heterogeneity * normal(rng));
        const double dropout =
            std::exp(c.dropout_intercept + c_drop.dot(z) + c.heterogeneity * normal(rng));
        const double lifetime = std::exponential_distribution<double>(dropout)(rng);
        const double calib_exposure = std::min(lifetime, calib);
        const double holdout_exposure = std::max(0.0, std::min(lifetime, horizon) - calib);
        const double calib_count =
            static_cast<double>(std::poisson_distribution<long long>(rate * calib_exposure)(rng));
        // Poisson(0) is not a valid distribution parameter in every stdlib.
        const double holdout_count =
            holdout_exposure > 0.0
                ? static_cast<double>(std::poisson_distribution<long long>(rate * holdout_exposure)(rng))
                : 0.0;
        x.row(i).head(c.d_covariates) = z.transpose();
        x(i, c.d_covariates) = calib_count;
        y(i) = holdout_count;
    }
    Dataset out = make_dataset(std::move(x), std::move(y));
    for (int k = 0; k < c.d_covariates; ++k) out.feature_names[k] = "z" + std::to_string(k);
    out.feature_names[c.d_covariates] = "calib_count";
    return out;
}

double round_significant2(double value) {
    if (value == 0.0 || !std::isfinite(value)) return value;
    const double magnitude = std::floor(std::log10(std::abs(value)));
    const double scale = std::pow(10.0, magnitude - 1.0);
    return std::round(value / scale) * scale;
}

Dataset perturb_baseline(const Dataset& data, const Perturbation& p, std::uint64_t seed) {
    validate(data);
    Dataset out = data;
    switch (p.kind) {
        case PerturbKind::round2:
            out.features = out.features.unaryExpr([](double v) { return round_significant2(v); });
            break;
        case PerturbKind::topcode95:
            for (Index j = 0; j < out.dim(); ++j) {
                const Vector col = out.features.col(j);
                const double cap = percentile(std::vector<double>(col.data(), col.data() + col.size()), 95.0);
                out.features.col(j) = col.cwiseMin(cap);
            }
            break;
        case PerturbKind::swap: {
            require(p.swap_fraction > 0.0 && p.swap_fraction <= 1.0, "swap fraction must be in (0, 1]");
            std::vector<Index> order(static_cast<std::size_t>(data.rows()));
            std::iota(order.begin(), order.end(), Index{0});
            auto rng = make_rng(seed, 0x73776170ULL);
            std::shuffle(order.begin(), order.end(), rng);
            auto chosen = static_cast<std::size_t>(std::llround(p.swap_fraction * static_cast<double>(data.rows())));
            chosen -= chosen % 2;
            for (std::size_t k = 0; k + 1 < chosen; k += 2) {
                out.features.row(order[k]) = data.features.row(order[k + 1]);
                out.features.row(order[k + 1]) = data.features.row(order[k]);
            }
            break;
        }
    }
    return out;
}

}  // namespace enfo
