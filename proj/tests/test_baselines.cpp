#include "test_util.hpp"

#include "enfo/baselines.hpp"
#include "enfo/datagen.hpp"
#include "enfo/error.hpp"
#include "enfo/linear.hpp"
#include "enfo/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace enfo;
using enfo::test::random_dataset;
using enfo::test::random_matrix;

namespace {

Dataset noise_free(Index n, std::uint64_t seed) {
    const Dataset d = gen_friedman3({n, 0.0, seed});
    return standardize(d, fit_standardization(d));
}

}  // namespace

TEST_CASE("krr examples") {
    KernelSpec k;
    Matrix x0(1, 2);
    x0 << 0.3, -1.2;
    const Dataset one = make_dataset(x0, Vector::Constant(1, 4.0));
    for (double r : {1e-3, 0.5, 2.0, 100.0}) {
        CHECK(predict(krr_fit(one, k, r), x0)(0) == doctest::Approx(4.0 / (1.0 + r)).epsilon(1e-14));
    }

    const Dataset d = random_dataset(30, 3, 5);
    const Vector far = predict(krr_fit(d, k, 1e12), random_matrix(10, 3, 6));
    CHECK(far.cwiseAbs().maxCoeff() <= 1e-10);

    const Dataset clean = noise_free(40, 2);
    const auto m = krr_fit(clean, k, 1e-8);
    CHECK(rmse(predict(m, clean.features), clean.target) <= 1e-3);

    // Same system through an independent factorization.
    const Matrix g = kernel_matrix(k, d.features);
    const Vector alpha = (g + 0.1 * 30.0 * Matrix::Identity(30, 30)).fullPivLu().solve(d.target);
    CHECK((krr_fit(d, k, 0.1).alpha - alpha).norm() <= 1e-10 * alpha.norm());

    CHECK_THROWS_AS(krr_fit(d, k, 0.0), InputError);
    CHECK_THROWS_AS(krr_fit(d, k, -1.0), InputError);
}

TEST_CASE("nu-method at large T agrees with near-zero-ridge KRR") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = noise_free(20, 70 + seed);
        KernelSpec k;
        k.bandwidth = median_bandwidth(d.features);
        const Matrix query = random_matrix(50, 4, 80 + seed);
        const Vector nu = predict(nu_method_fit(d, k, 5.0, 20000), query);
        const Vector krr = predict(krr_fit(d, k, 1e-12), query);
        CHECK((nu - krr).cwiseAbs().maxCoeff() <= 1e-2);
    }
}

TEST_CASE("select_ridge matches a brute-force fold loop") {
    KernelSpec k;
    const std::vector<double> grid = default_ridge_grid();
    REQUIRE(grid.size() == 9);
    CHECK(grid.front() == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(grid.back() == 1.0);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Dataset d = gen_friedman3({60, 0.3, 100 + seed});
        d = standardize(d, fit_standardization(d));
        CvPlan plan;
        plan.folds = 5;
        plan.seed = seed;
        std::vector<double> loss(grid.size(), 0.0);
        for (const auto& f : make_folds(d.rows(), plan)) {
            const Dataset tr = select_rows(d, f.train);
            const Dataset va = select_rows(d, f.validation);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const double r = rmse(predict(krr_fit(tr, k, grid[g]), va.features), va.target);
                loss[g] += r * r;
            }
        }
        std::size_t best = 0;
        for (std::size_t g = 1; g < grid.size(); ++g) {
            if (loss[g] <= loss[best] * (1.0 + 1e-12)) best = g;
        }
        CHECK(select_ridge(d, k, grid, 5, seed) == grid[best]);
    }
    CHECK_THROWS_AS(select_ridge(random_dataset(20, 2, 1), k, {}, 5, 0), InputError);
}

TEST_CASE("svr stays inside the tube on a constant target") {
    const Matrix x = random_matrix(40, 2, 3);
    const Dataset d = make_dataset(x, Vector::Constant(40, 2.5));
    SvrSettings s;
    s.epsilon_tube = 0.1;
    s.iters = 2000;
    const auto m = svr_fit(d, KernelSpec{}, s);
    const Vector p = predict(m, x);
    CHECK((p.array() - 2.5).abs().maxCoeff() <= 0.1);
}

TEST_CASE("svr with vanishing penalty predicts the bias") {
    const Dataset d = random_dataset(40, 2, 4);
    SvrSettings s;
    s.c_penalty = 1e-9;
    s.iters = 500;
    const auto m = svr_fit(d, KernelSpec{}, s);
    CHECK(m.alpha.cwiseAbs().maxCoeff() <= 1e-6);
    const Vector p = predict(m, random_matrix(5, 2, 9));
    CHECK((p.array() - m.bias).abs().maxCoeff() <= 1e-6);
}

TEST_CASE("svr averaged objective is non-increasing and fits are deterministic") {
    Dataset d = gen_friedman3({200, 0.1, 12});
    d = standardize(d, fit_standardization(d));
    SvrSettings s;
    s.batch_size = 0;
    s.iters = 4096;
    s.seed = 3;
    std::vector<double> trace;
    const auto m = svr_fit(d, KernelSpec{}, s, &trace);
    REQUIRE(trace.size() >= 10);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
    CHECK(svr_objective(m, d) == doctest::Approx(trace.back()).epsilon(1e-10));

    s.batch_size = 32;
    const auto a = svr_fit(d, KernelSpec{}, s);
    const auto b = svr_fit(d, KernelSpec{}, s);
    CHECK(a.alpha == b.alpha);
    CHECK(a.bias == b.bias);
    // The stochastic fit still beats predicting the mean.
    CHECK(rmse(predict(a, d.features), d.target) < 0.8);

    SvrSettings bad;
    bad.c_penalty = 0.0;
    CHECK_THROWS_AS(svr_fit(d, KernelSpec{}, bad), InputError);
    bad = SvrSettings{};
    bad.epsilon_tube = -0.1;
    CHECK_THROWS_AS(svr_fit(d, KernelSpec{}, bad), InputError);
}

TEST_CASE("model_rmse dispatches over every model type") {
    const Dataset train = random_dataset(30, 2, 21);
    const Dataset test = random_dataset(10, 2, 22);
    KernelSpec k;
    const std::vector<AnyModel> models{nu_method_fit(train, k, 5.0, 10), linreg_fit(train),
                                       krr_fit(train, k, 0.01), svr_fit(train, k, SvrSettings{})};
    for (const auto& m : models) {
        CHECK(model_rmse(m, test) == rmse(predict(m, test.features), test.target));
        CHECK_THROWS_AS(model_rmse(m, random_dataset(10, 3, 1)), InputError);
    }
    // Constant residual: RMSE equals the shift.
    const auto lin = linreg_fit(train);
    Dataset shifted = test;
    shifted.target = predict(lin, test.features).array() + 0.75;
    CHECK(model_rmse(lin, shifted) == doctest::Approx(0.75).epsilon(1e-12));
}
