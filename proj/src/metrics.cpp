#include "enfo/metrics.hpp"

#include "enfo/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enfo {

double rmse(const Vector& predictions, const Vector& truth) {
    require(predictions.size() == truth.size(),
            "rmse: length mismatch (" + std::to_string(predictions.size()) + " vs " +
                std::to_string(truth.size()) + ")");
    require(truth.size() >= 1, "rmse needs at least one value");
    return std::sqrt((predictions - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "wasserstein_1d: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    // Integrate |Qa(q) - Qb(q)| over the merged quantile breakpoints i/na, j/nb.
    std::size_t i = 0;
    std::size_t j = 0;
    double q = 0.0;
    double total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double next_a = static_cast<double>(i + 1) / na;
        const double next_b = static_cast<double>(j + 1) / nb;
        const double next = std::min(next_a, next_b);
        total += (next - q) * std::abs(a[i] - b[j]);
        q = next;
        if (next_a <= next) ++i;
        if (next_b <= next) ++j;
    }
    return total;
}

namespace {

struct ColumnDivergence {
    double kl = 0.0;
    double jsd = 0.0;
};

double kl_of(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * std::log(p[k] / q[k]);
    return s;
}

std::vector<double> histogram(const Eigen::Ref<const Vector>& col, double lo, double width,
                              int bins) {
    std::vector<double> h(static_cast<std::size_t>(bins), kHistogramSmoothing);
    for (Index i = 0; i < col.size(); ++i) {
        int k = width > 0.0 ? static_cast<int>((col(i) - lo) / width) : 0;
        k = std::clamp(k, 0, bins - 1);
        h[static_cast<std::size_t>(k)] += 1.0;
    }
    const double total = std::accumulate(h.begin(), h.end(), 0.0);
    for (double& v : h) v /= total;
    return h;
}

ColumnDivergence column_divergence(const Eigen::Ref<const Vector>& a,
                                   const Eigen::Ref<const Vector>& b, int bins) {
    const double lo = std::min(a.minCoeff(), b.minCoeff());
    const double hi = std::max(a.maxCoeff(), b.maxCoeff());
    const double width = (hi - lo) / static_cast<double>(bins);
    const auto p = histogram(a, lo, width, bins);
    const auto q = histogram(b, lo, width, bins);
    std::vector<double> mid(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) mid[k] = 0.5 * (p[k] + q[k]);
    ColumnDivergence out;
    out.kl = std::max(0.0, kl_of(p, q));
    out.jsd = std::max(0.0, 0.5 * kl_of(p, mid) + 0.5 * kl_of(q, mid));
    return out;
}

}  // namespace

DivergenceReport divergences(const Dataset& a, const Dataset& b, int bins) {
    require(bins >= 1, "divergences need at least one bin");
    require(a.rows() >= 1 && b.rows() >= 1, "divergences need non-empty datasets");
    require(a.dim() == b.dim(), "divergences: dimensionality mismatch (" +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) +
                                    ")");
    const Matrix ja = joint_rows(a);
    const Matrix jb = joint_rows(b);
    DivergenceReport out;
    out.bins = bins;
    for (Index c = 0; c < ja.cols(); ++c) {
        const ColumnDivergence cd = column_divergence(ja.col(c), jb.col(c), bins);
        out.kl += cd.kl;
        out.jsd += cd.jsd;
        out.wasserstein +=
            wasserstein_1d(std::vector<double>(ja.col(c).data(), ja.col(c).data() + ja.rows()),
                           std::vector<double>(jb.col(c).data(), jb.col(c).data() + jb.rows()));
    }
    const double cols = static_cast<double>(ja.cols());
    out.kl /= cols;
    out.jsd /= cols;
    out.wasserstein /= cols;
    return out;
}

double percentile(std::vector<double> values, double p) {
    require(!values.empty(), "percentile of an empty sample");
    require(p >= 0.0 && p <= 100.0, "percentile must lie in [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double mcaa(const Dataset& synthetic, const Dataset& members, const Dataset& nonmembers,
            const AttackConfig& config) {
    require(members.rows() >= 1 && members.rows() == nonmembers.rows(),
            "mcaa needs equally sized, non-empty member and nonmember sets");
    require(members.dim() == synthetic.dim() && nonmembers.dim() == synthetic.dim(),
            "mcaa: dimensionality mismatch");
    require(synthetic.rows() >= 1, "mcaa needs a non-empty synthetic set");
    require(config.epsilon_percentile > 0.0 && config.epsilon_percentile < 100.0,
            "epsilon percentile must lie in (0, 100)");

    const Matrix syn = joint_rows(synthetic);
    const Matrix cand = joint_rows(concat(members, nonmembers));
    const Index nc = cand.rows();
    const Index ns = syn.rows();

    Matrix dist(ns, nc);
    for (Index c = 0; c < nc; ++c) {
        for (Index s = 0; s < ns; ++s) dist(s, c) = (cand.row(c) - syn.row(s)).norm();
    }
    const double eps = percentile(std::vector<double>(dist.data(), dist.data() + dist.size()),
                                  config.epsilon_percentile);

    struct Candidate {
        double score;
        double nearest;
        Index index;
    };
    std::vector<Candidate> ranked;
    ranked.reserve(static_cast<std::size_t>(nc));
    for (Index c = 0; c < nc; ++c) {
        const auto col = dist.col(c);
        const double within = static_cast<double>((col.array() <= eps).count());
        ranked.push_back({within / static_cast<double>(ns), col.minCoeff(), c});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Candidate& x, const Candidate& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.nearest != y.nearest) return x.nearest < y.nearest;
        return x.index < y.index;
    });

    const Index n_members = members.rows();
    Index correct = 0;
    for (Index r = 0; r < nc; ++r) {
        const bool predicted_member = r < n_members;
        const bool is_member = ranked[static_cast<std::size_t>(r)].index < n_members;
        if (predicted_member == is_member) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(nc);
}

double stability_std(const std::vector<double>& rmses) {
    require(rmses.size() >= 2, "stability_std needs at least two values");
    const double k = static_cast<double>(rmses.size());
    const double mean = std::accumulate(rmses.begin(), rmses.end(), 0.0) / k;
    double ss = 0.0;
    for (double r : rmses) ss += (r - mean) * (r - mean);
    return std::sqrt(ss / k);
}

}  // namespace enfo
