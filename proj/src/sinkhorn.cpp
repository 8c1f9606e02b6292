#include "enfo/sinkhorn.hpp"

#include "enfo/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace enfo {

namespace {

// Column j holds the squared distances from cols.row(j) to every row of
// `rows`, so each softmin reduction reads contiguous memory.
Matrix cost_by_column(const Matrix& rows, const Matrix& cols) {
    Matrix c(rows.rows(), cols.rows());
    for (Index j = 0; j < cols.rows(); ++j) {
        for (Index i = 0; i < rows.rows(); ++i) {
            c(i, j) = (rows.row(i) - cols.row(j)).squaredNorm();
        }
    }
    return c;
}

// out_j = -eps * log( sum_i w * exp((h_i - cost(i, j)) / eps) ), uniform w.
Vector softmin(double eps, const Matrix& cost, const Vector& h) {
    const double log_w = -std::log(static_cast<double>(cost.rows()));
    const double inv_eps = 1.0 / eps;
    Vector out(cost.cols());
    Eigen::ArrayXd z(cost.rows());
    for (Index j = 0; j < cost.cols(); ++j) {
        z = (h - cost.col(j)).array() * inv_eps;
        const double zmax = z.maxCoeff();
        out(j) = -eps * (log_w + zmax + std::log((z - zmax).exp().sum()));
    }
    return out;
}

// Transport plan rows for the points indexing the columns of `cost`:
// plan(i, j) = w_j * softmax_i((h_i - cost(i, j)) / eps), so column j sums to w_j.
Matrix plan_columns(double eps, const Matrix& cost, const Vector& h) {
    const double w = 1.0 / static_cast<double>(cost.cols());
    Matrix plan(cost.rows(), cost.cols());
    for (Index j = 0; j < cost.cols(); ++j) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (Index i = 0; i < cost.rows(); ++i) {
            plan(i, j) = (h(i) - cost(i, j)) / eps;
            zmax = std::max(zmax, plan(i, j));
        }
        double s = 0.0;
        for (Index i = 0; i < cost.rows(); ++i) {
            plan(i, j) = std::exp(plan(i, j) - zmax);
            s += plan(i, j);
        }
        plan.col(j) *= w / s;
    }
    return plan;
}

// Blur halves every iteration from the cloud diameter down to the target;
// the remaining iterations run at the target scale.
std::vector<double> epsilon_schedule(const Matrix& a, const Matrix& b, double blur, int iters) {
    const double eps_final = blur * blur;
    const Eigen::RowVectorXd lo = a.colwise().minCoeff().cwiseMin(b.colwise().minCoeff());
    const Eigen::RowVectorXd hi = a.colwise().maxCoeff().cwiseMax(b.colwise().maxCoeff());
    double eps = std::max((hi - lo).squaredNorm(), eps_final);
    std::vector<double> schedule;
    schedule.reserve(static_cast<std::size_t>(iters));
    for (int k = 0; k < iters; ++k) {
        schedule.push_back(eps);
        eps = std::max(0.25 * eps, eps_final);
    }
    return schedule;
}

constexpr double kPotentialTolerance = 1e-9;

// Dual potentials of entropic OT between uniform clouds x and y: f lives on
// x, g on y. Both are the final extrapolated updates at the target scale.
struct Potentials {
    Vector f;
    Vector g;
};

// c_yx column i holds the costs from x_i to every y; c_xy the transpose.
Potentials solve_potentials(const Matrix& c_xy, const Matrix& c_yx,
                            const std::vector<double>& schedule, double eps_final) {
    Vector f = Vector::Zero(c_xy.rows());
    Vector g = Vector::Zero(c_xy.cols());
    for (double e : schedule) {
        Vector f_next = softmin(e, c_yx, g);
        Vector g_next = softmin(e, c_xy, f_next);
        const double change = std::max((f_next - f).cwiseAbs().maxCoeff(),
                                       (g_next - g).cwiseAbs().maxCoeff());
        f.swap(f_next);
        g.swap(g_next);
        if (e == eps_final && change <= kPotentialTolerance * eps_final) break;
    }
    Potentials p;
    p.f = softmin(eps_final, c_yx, g);
    p.g = softmin(eps_final, c_xy, f);
    return p;
}

double ot_value(const Potentials& p) { return p.f.mean() + p.g.mean(); }

// Strict weak order on point clouds so that (a, b) and (b, a) run the exact
// same arithmetic.
bool canonical_first(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) return a.rows() < b.rows();
    return !std::lexicographical_compare(b.data(), b.data() + b.size(), a.data(),
                                         a.data() + a.size());
}

}  // namespace

SinkhornResult sinkhorn_divergence(const Matrix& a, const Matrix& b, double blur, int iters) {
    require(a.rows() >= 1 && b.rows() >= 1, "sinkhorn_divergence: empty point set");
    require(a.cols() == b.cols(), "sinkhorn_divergence: dimension mismatch");
    require(blur > 0.0 && std::isfinite(blur), "sinkhorn blur must be positive");
    require(iters >= 1, "sinkhorn needs at least one iteration");

    const double eps_final = blur * blur;
    const Matrix c_ab = cost_by_column(a, b);  // column j: b_j against all a
    const Matrix c_ba = c_ab.transpose();      // column i: a_i against all b
    const Matrix c_aa = cost_by_column(a, a);
    const Matrix c_bb = cost_by_column(b, b);

    const auto cross_schedule = epsilon_schedule(a, b, blur, iters);
    Potentials ab;
    if (canonical_first(a, b)) {
        ab = solve_potentials(c_ab, c_ba, cross_schedule, eps_final);
    } else {
        Potentials ba = solve_potentials(c_ba, c_ab, cross_schedule, eps_final);
        ab.f = std::move(ba.g);
        ab.g = std::move(ba.f);
    }
    const Potentials aa = solve_potentials(c_aa, c_aa, epsilon_schedule(a, a, blur, iters), eps_final);
    const Potentials bb = solve_potentials(c_bb, c_bb, epsilon_schedule(b, b, blur, iters), eps_final);

    SinkhornResult out;
    out.value = ot_value(ab) - 0.5 * ot_value(aa) - 0.5 * ot_value(bb);

    // Plans with exact marginals on a: column i of c_ba / c_aa belongs to a_i.
    const Matrix p_ab = plan_columns(eps_final, c_ba, ab.g);  // (m x n), col i sums to 1/n
    const Matrix p_aa = plan_columns(eps_final, c_aa, aa.g);  // (n x n)
    out.gradient.resize(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        const double mass_ab = p_ab.col(i).sum();
        const double mass_aa = p_aa.col(i).sum();
        const Eigen::RowVectorXd pull_b = p_ab.col(i).transpose() * b;
        const Eigen::RowVectorXd pull_a = p_aa.col(i).transpose() * a;
        out.gradient.row(i) = 2.0 * ((mass_ab - mass_aa) * a.row(i) - pull_b + pull_a);
    }
    return out;
}

}  // namespace enfo
