#include "test_util.hpp"

#include "enfo/error.hpp"
#include "enfo/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace enfo;
using enfo::test::random_dataset;
using enfo::test::random_matrix;
using enfo::test::random_vector;

namespace {

// W1 as the integral of |F_a - F_b| over the merged support.
double cdf_w1(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pts(a);
    pts.insert(pts.end(), b.begin(), b.end());
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double x = pts[k];
        const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) /
                          static_cast<double>(a.size());
        const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) /
                          static_cast<double>(b.size());
        total += std::abs(fa - fb) * (pts[k + 1] - x);
    }
    return total;
}

std::vector<double> col(const Dataset& d, Index c) {
    const Matrix j = joint_rows(d);
    return {j.col(c).data(), j.col(c).data() + j.rows()};
}

Dataset one_column(std::initializer_list<double> values) {
    Matrix x(static_cast<Index>(values.size()), 1);
    Index i = 0;
    for (double v : values) x(i++, 0) = v;
    return make_dataset(x, x.col(0));
}

Dataset shifted(const Dataset& d, double shift) {
    Dataset out = d;
    out.features.array() += shift;
    out.target.array() += shift;
    return out;
}

}  // namespace

TEST_CASE("rmse examples") {
    const Vector v = random_vector(9, 1);
    CHECK(rmse(v, v) == 0.0);
    Vector p(2), t(2);
    p << 1.0, 3.0;
    t << 0.0, 0.0;
    CHECK(rmse(p, t) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK(rmse(v.array() - 2.5, v) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK_THROWS_AS(rmse(Vector::Zero(2), Vector::Zero(3)), InputError);
    CHECK_THROWS_AS(rmse(Vector::Zero(0), Vector::Zero(0)), InputError);
}

TEST_CASE("divergences of identical data are zero") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset a = random_dataset(80, 3, seed);
        const DivergenceReport r = divergences(a, a);
        CHECK(std::abs(r.kl) <= 1e-12);
        CHECK(std::abs(r.jsd) <= 1e-12);
        CHECK(std::abs(r.wasserstein) <= 1e-12);
        CHECK(r.bins == kDefaultBins);
    }
}

TEST_CASE("wasserstein of unit point masses") {
    CHECK(divergences(one_column({0.0}), one_column({1.0})).wasserstein == 1.0);
    CHECK(wasserstein_1d({0.0}, {1.0}) == 1.0);
}

TEST_CASE("wasserstein_1d matches the CDF integral") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto na = static_cast<Index>(3 + seed % 7);
        const auto nb = static_cast<Index>(2 + (seed * 5) % 11);
        const Vector a = random_vector(na, seed);
        const Vector b = random_vector(nb, 100 + seed, 2.0);
        std::vector<double> va(a.data(), a.data() + na), vb(b.data(), b.data() + nb);
        CHECK(wasserstein_1d(va, vb) == doctest::Approx(cdf_w1(va, vb)).epsilon(1e-12));
    }
}

TEST_CASE("histogram KL and JSD on a two-bin example") {
    const Dataset a = one_column({0.0, 0.0, 1.0});
    const Dataset b = one_column({0.0, 1.0, 1.0});
    const DivergenceReport r = divergences(a, b, 2);
    // p = (2/3, 1/3), q = (1/3, 2/3), mixture (1/2, 1/2)
    const double kl = std::log(2.0) / 3.0;
    const double jsd = 2.0 / 3.0 * std::log(4.0 / 3.0) + 1.0 / 3.0 * std::log(2.0 / 3.0);
    CHECK(r.kl == doctest::Approx(kl).epsilon(1e-8));
    CHECK(r.jsd == doctest::Approx(jsd).epsilon(1e-8));
    CHECK(r.bins == 2);
}

TEST_CASE("JSD reaches ln 2 on disjoint supports") {
    const Dataset a = random_dataset(40, 2, 3);
    const Dataset b = shifted(a, 100.0);
    const DivergenceReport r = divergences(a, b);
    CHECK(r.jsd <= std::log(2.0));
    CHECK(r.jsd == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(r.kl > 1.0);
}

TEST_CASE("divergence properties on random instances") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset a = random_dataset(50, 2, seed);
        const Dataset b = shifted(random_dataset(60, 2, 50 + seed), 0.3);
        const Dataset c = shifted(random_dataset(40, 2, 90 + seed), -0.5);
        const DivergenceReport ab = divergences(a, b);
        const DivergenceReport ba = divergences(b, a);
        CHECK(ab.kl >= 0.0);
        CHECK(ab.jsd >= 0.0);
        CHECK(ab.jsd <= std::log(2.0));
        CHECK(ab.wasserstein >= 0.0);
        CHECK(std::abs(ab.jsd - ba.jsd) <= 1e-12);
        CHECK(std::abs(ab.wasserstein - ba.wasserstein) <= 1e-12);
        for (Index k = 0; k < 3; ++k) {
            const double wab = wasserstein_1d(col(a, k), col(b, k));
            const double wbc = wasserstein_1d(col(b, k), col(c, k));
            const double wac = wasserstein_1d(col(a, k), col(c, k));
            CHECK(wac <= wab + wbc + 1e-9);
        }
    }
    CHECK_THROWS_AS(divergences(random_dataset(5, 2, 1), random_dataset(5, 3, 2)), InputError);
    CHECK_THROWS_AS(divergences(random_dataset(5, 2, 1), random_dataset(5, 2, 2), 0), InputError);
}

TEST_CASE("mcaa null attack sits near one half") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset synth = random_dataset(100, 3, 1000 + seed);
        const Dataset members = random_dataset(100, 3, 2000 + seed);
        const Dataset nonmembers = random_dataset(100, 3, 3000 + seed);
        AttackConfig cfg;
        cfg.seed = seed;
        const double acc = mcaa(synth, members, nonmembers, cfg);
        CHECK(acc >= 0.4);
        CHECK(acc <= 0.6);
    }
}

TEST_CASE("mcaa perfect leakage, label symmetry and invariances") {
    const Dataset members = random_dataset(50, 3, 7);
    const Dataset far = shifted(random_dataset(50, 3, 8), 50.0);
    CHECK(mcaa(members, members, far) == 1.0);
    CHECK(mcaa(members, far, members) == 0.0);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset m = random_dataset(30, 2, 10 + seed);
        const Dataset n = random_dataset(30, 2, 20 + seed);
        Dataset synth = concat(select_rows(m, {0, 1, 2, 3, 4, 5, 6, 7}), random_dataset(12, 2, 30 + seed));
        AttackConfig cfg;
        cfg.epsilon_percentile = 5.0;
        cfg.seed = seed;
        const double a = mcaa(synth, m, n, cfg);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        CHECK(mcaa(synth, n, m, cfg) == doctest::Approx(1.0 - a).epsilon(1e-15));
        CHECK(mcaa(synth, m, n, cfg) == a);
        std::vector<Index> rev(static_cast<std::size_t>(synth.rows()));
        std::iota(rev.rbegin(), rev.rend(), Index{0});
        CHECK(mcaa(select_rows(synth, rev), m, n, cfg) == a);
    }
    CHECK_THROWS_AS(mcaa(members, members, random_dataset(49, 3, 1)), InputError);
    CHECK_THROWS_AS(mcaa(members, members, random_dataset(50, 2, 1)), InputError);
    AttackConfig bad;
    bad.epsilon_percentile = 100.0;
    CHECK_THROWS_AS(mcaa(members, members, far, bad), InputError);
}

TEST_CASE("stability_std examples") {
    CHECK(stability_std({0.3, 0.3, 0.3}) == 0.0);
    CHECK(stability_std({1.0, 3.0}) == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> v{0.2, 0.5, 0.1, 0.9, 0.4};
    std::vector<double> w{0.9, 0.1, 0.4, 0.2, 0.5};
    CHECK(stability_std(v) == doctest::Approx(stability_std(w)).epsilon(1e-15));
    CHECK_THROWS_AS(stability_std({1.0}), InputError);
}

TEST_CASE("percentile interpolates linearly") {
    CHECK(percentile({3.0, 1.0, 2.0}, 50.0) == 2.0);
    CHECK(percentile({0.0, 10.0}, 25.0) == 2.5);
    CHECK(percentile({4.0}, 99.0) == 4.0);
    CHECK_THROWS_AS(percentile({}, 50.0), InputError);
}
