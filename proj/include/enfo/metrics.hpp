#pragma once

#include "enfo/dataset.hpp"

#include <cstdint>
#include <vector>

namespace enfo {

double rmse(const Vector& predictions, const Vector& truth);

/// Column-averaged distribution distances (features and target).
struct DivergenceReport {
    double kl = 0.0;
    double jsd = 0.0;
    double wasserstein = 0.0;
    int bins = 50;
};

inline constexpr int kDefaultBins = 50;
inline constexpr double kHistogramSmoothing = 1e-10;

/// For every column: histograms over shared equal-width edges spanning the
/// combined range, additive smoothing, KL(a||b) and JSD in nats, and the
/// exact 1-D W1 distance between the empirical samples. Returns the means.
DivergenceReport divergences(const Dataset& a, const Dataset& b, int bins = kDefaultBins);

/// Exact W1 between two empirical distributions on the line.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

enum class AttackDistance { euclidean };

struct AttackConfig {
    double epsilon_percentile = 1.0;
    AttackDistance distance = AttackDistance::euclidean;
    std::uint64_t seed = 0;
};

/// Monte Carlo membership attack accuracy. Candidates are members followed by
/// nonmembers; rows are compared as joint (features, target) vectors. Each
/// candidate scores the fraction of synthetic rows within epsilon, where
/// epsilon is the given percentile of all candidate-to-synthetic distances.
/// The top half by score (ties: closer nearest synthetic neighbour, then
/// lower candidate index) is predicted "member".
double mcaa(const Dataset& synthetic, const Dataset& members, const Dataset& nonmembers,
            const AttackConfig& config = {});

/// Population standard deviation (divisor K) of K >= 2 RMSE values.
double stability_std(const std::vector<double>& rmses);

/// Linear-interpolation percentile (p in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double p);

}  // namespace enfo
