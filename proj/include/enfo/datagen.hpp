#pragma once

#include "enfo/dataset.hpp"

#include <cstdint>
#include <optional>

namespace enfo {

struct FriedmanConfig {
    Index n = 1000;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

void validate(const FriedmanConfig& config);

/// Friedman #3: x1~U[0,100], x2~U[40pi,560pi], x3~U[0,1], x4~U[1,11],
/// y = atan((x2 x3 - 1/(x2 x4)) / x1) + N(0, noise_std^2).
Dataset gen_friedman3(const FriedmanConfig& config);

/// Noise-free Friedman #3 response.
double friedman3_response(double x1, double x2, double x3, double x4);

/// Simplified hierarchical purchase/dropout simulation with covariates.
struct ClvConfig {
    Index n = 15000;
    int d_covariates = 10;
    int calib_weeks = 32;
    int holdout_weeks = 32;
    std::uint64_t seed = 0;
    std::optional<Vector> rate_coefficients;
    std::optional<Vector> dropout_coefficients;
    /// Log weekly purchase rate of an average customer.
    double rate_intercept = -0.7;
    /// Log weekly dropout rate of an average customer (about one per year).
    double dropout_intercept = -3.95;
    double heterogeneity = 0.3;
};

void validate(const ClvConfig& config);

/// Features: covariates then the calibration purchase count; target: holdout
/// purchase count.
Dataset gen_clv(const ClvConfig& config);

enum class PerturbKind { round2, topcode95, swap };

struct Perturbation {
    PerturbKind kind = PerturbKind::round2;
    /// Fraction of rows taking part in swapping.
    double swap_fraction = 1.0;
};

/// Rounds to two significant digits.
double round_significant2(double value);

/// round2 and topcode95 act on every feature column; swap pairs up a seeded
/// selection of rows and exchanges their feature vectors, targets staying in
/// place.
Dataset perturb_baseline(const Dataset& data, const Perturbation& perturbation,
                         std::uint64_t seed);

}  // namespace enfo
