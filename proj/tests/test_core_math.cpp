#include "test_util.hpp"

#include "enfo/dataset.hpp"
#include "enfo/error.hpp"
#include "enfo/kernel.hpp"
#include "enfo/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace enfo;
using enfo::test::random_matrix;
using enfo::test::random_vector;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("kernel_eval examples") {
    KernelSpec k;
    k.bandwidth = 1.0;
    CHECK(kernel_eval(k, vec({0.3, -2.0}), vec({0.3, -2.0})) == 1.0);
    const double e = 0.60653065971263342;  // exp(-1/2)
    CHECK(kernel_eval(k, vec({0.0}), vec({1.0})) == doctest::Approx(e).epsilon(1e-15));
    k.bandwidth = 2.0;
    CHECK(kernel_eval(k, vec({0.0, 0.0}), vec({2.0, 0.0})) == doctest::Approx(e).epsilon(1e-15));
    CHECK_THROWS_AS(kernel_eval(k, vec({0.0}), vec({1.0, 2.0})), InputError);
}

TEST_CASE("kernel spec validation") {
    KernelSpec k;
    k.bandwidth = 0.0;
    CHECK_THROWS_AS(validate(k), InputError);
    k.bandwidth = -1.0;
    CHECK_THROWS_AS(validate(k), InputError);
    k.bandwidth = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate(k), InputError);
    CHECK(kernel_family_from_string(to_string(KernelFamily::gaussian)) == KernelFamily::gaussian);
    CHECK_THROWS_AS(kernel_family_from_string("laplace"), InputError);
}

TEST_CASE("kernel_matrix examples") {
    KernelSpec k;
    Matrix one(1, 3);
    one << 0.4, -1.0, 7.0;
    CHECK(kernel_matrix(k, one, one)(0, 0) == 1.0);

    Matrix pts(2, 1);
    pts << 0.0, 1.0;
    const Matrix g = kernel_matrix(k, pts, pts);
    const double e = std::exp(-0.5);
    CHECK(g(0, 0) == 1.0);
    CHECK(g(1, 1) == 1.0);
    CHECK(g(0, 1) == doctest::Approx(e).epsilon(1e-15));
    CHECK(g(1, 0) == doctest::Approx(e).epsilon(1e-15));

    CHECK_THROWS_AS(kernel_matrix(k, Matrix::Zero(2, 2), Matrix::Zero(2, 3)), InputError);
}

TEST_CASE("kernel_matrix agrees entrywise with kernel_eval and is symmetric") {
    KernelSpec k;
    k.bandwidth = 1.3;
    const Matrix a = random_matrix(7, 3, 1);
    const Matrix b = random_matrix(5, 3, 2);
    const Matrix ab = kernel_matrix(k, a, b);
    const Matrix ba = kernel_matrix(k, b, a);
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < b.rows(); ++j) {
            CHECK(ab(i, j) == kernel_eval(k, a.row(i).transpose(), b.row(j).transpose()));
            CHECK(ab(i, j) == ba(j, i));
        }
    }
    const Matrix aa = kernel_matrix(k, a);
    CHECK((aa - kernel_matrix(k, a, a)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((aa - aa.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(aa.diagonal().isOnes());
}

TEST_CASE("gaussian Gram matrices are PSD with spectrum of K/N at most 1") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        KernelSpec k;
        k.bandwidth = 0.3 + 0.4 * static_cast<double>(seed);
        const Matrix pts = random_matrix(20, 3, 100 + seed);
        const Matrix g = kernel_matrix(k, pts);
        CHECK(g.minCoeff() > 0.0);
        CHECK(g.maxCoeff() <= 1.0);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(g / 20.0);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
        CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
    }
}

TEST_CASE("median_bandwidth") {
    Matrix pts(3, 1);
    pts << 0.0, 1.0, 3.0;  // distances 1, 2, 3
    CHECK(median_bandwidth(pts) == doctest::Approx(2.0));
    CHECK(median_bandwidth(Matrix::Zero(4, 2)) == 1.0);
    CHECK(median_bandwidth(Matrix::Zero(1, 2)) == 1.0);
    const Matrix big = random_matrix(3000, 2, 5);
    const double h1 = median_bandwidth(big, 9);
    CHECK(h1 == median_bandwidth(big, 9));
    CHECK(h1 > 0.5);
    CHECK(h1 < 3.0);
}

TEST_CASE("solve_normal_equations examples") {
    Matrix eye = Matrix::Identity(2, 2);
    const Vector w1 = solve_normal_equations(eye, vec({3.0, -1.0}));
    CHECK(w1(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(w1(1) == doctest::Approx(-1.0).epsilon(1e-14));

    Matrix x(3, 1);
    x << 1.0, 2.0, 3.0;
    CHECK(solve_normal_equations(x, vec({2.0, 4.0, 6.0}))(0) == doctest::Approx(2.0).epsilon(1e-14));

    Matrix ones = Matrix::Ones(2, 2);
    const Vector w3 = solve_normal_equations(ones, vec({2.0, 2.0}));
    CHECK(w3(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w3(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solve_normal_equations residual is orthogonal to the column space") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix x = random_matrix(30, 5, 200 + seed);
        const Vector y = random_vector(30, 300 + seed);
        const Vector w = solve_normal_equations(x, y);
        CHECK((x.transpose() * (x * w - y)).norm() <= 1e-8 * (x.transpose() * y).norm());
        // Independent factorization of the full-rank normal equations.
        const Vector ref = (x.transpose() * x).ldlt().solve(x.transpose() * y);
        CHECK((w - ref).norm() <= 1e-10 * ref.norm());
    }
}

TEST_CASE("rank-deficient designs give the minimum-norm solution") {
    const Matrix base = random_matrix(12, 3, 7);
    Matrix x(12, 4);
    x << base, base.col(0) + base.col(1);  // rank 3
    const Vector y = random_vector(12, 8);
    const Vector w = solve_normal_equations(x, y);
    const Vector ref = x.completeOrthogonalDecomposition().solve(y);
    CHECK((w - ref).norm() <= 1e-9 * ref.norm());
    // Any null-space shift keeps the fit but grows the norm.
    Vector null(4);
    null << 1.0, 1.0, 0.0, -1.0;
    CHECK((x * null).norm() < 1e-12);
    CHECK(w.dot(null) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("dataset invariants") {
    CHECK_THROWS_AS(make_dataset(Matrix::Zero(3, 2), Vector::Zero(2)), InputError);
    CHECK_THROWS_AS(make_dataset(Matrix::Zero(0, 2), Vector::Zero(0)), InputError);
    CHECK_THROWS_AS(make_dataset(Matrix::Zero(2, 0), Vector::Zero(2)), InputError);
    Matrix bad = Matrix::Zero(2, 2);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_dataset(bad, Vector::Zero(2)), InputError);
    Vector inf_target = Vector::Zero(2);
    inf_target(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(make_dataset(Matrix::Zero(2, 2), inf_target), InputError);

    Dataset d = make_dataset(random_matrix(4, 2, 1), random_vector(4, 2));
    CHECK(d.feature_names == std::vector<std::string>{"x0", "x1"});
    Standardization s = fit_standardization(d);
    s.feature_std(0) = 0.0;
    Dataset recorded = d;
    recorded.standardization = s;
    CHECK_THROWS_AS(validate(recorded), InputError);
}

TEST_CASE("standardization round trip and zero-variance columns") {
    Matrix x = random_matrix(50, 3, 11, 4.0);
    x.col(2).setConstant(7.0);
    const Dataset d = make_dataset(x, random_vector(50, 12, 3.0));
    const Standardization s = fit_standardization(d);
    CHECK(s.feature_std(2) == 1.0);
    const Dataset z = standardize(d, s);
    REQUIRE(z.standardization.has_value());
    for (Index j = 0; j < 2; ++j) {
        CHECK(z.features.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
        const double var = z.features.col(j).squaredNorm() / 50.0;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    }
    const Dataset back = destandardize(z);
    CHECK(!back.standardization.has_value());
    CHECK((back.features - d.features).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.target - d.target).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(destandardize(d), InputError);
}

TEST_CASE("row selection, concatenation and joint rows") {
    const Dataset a = make_dataset(random_matrix(5, 2, 1), random_vector(5, 2));
    const Dataset b = make_dataset(random_matrix(3, 2, 3), random_vector(3, 4));
    const Dataset ab = concat(a, b);
    CHECK(ab.rows() == 8);
    CHECK(ab.features.row(6) == b.features.row(1));
    const Dataset picked = select_rows(ab, {7, 0});
    CHECK(picked.target(0) == b.target(2));
    CHECK(picked.target(1) == a.target(0));
    CHECK_THROWS_AS(select_rows(ab, {8}), InputError);
    CHECK_THROWS_AS(concat(a, make_dataset(random_matrix(2, 3, 5), random_vector(2, 6))), InputError);
    const Matrix j = joint_rows(a);
    CHECK(j.cols() == 3);
    CHECK(j.col(2) == a.target);
}
