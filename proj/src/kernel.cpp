#include "enfo/kernel.hpp"

#include "enfo/error.hpp"
#include "enfo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enfo {

namespace {

// Shared by every kernel entry point so that matrix entries and single
// evaluations agree to the last bit.
inline double gaussian_entry(const double* a, const double* b, Index d, double inv_two_h2) {
    double s = 0.0;
    for (Index k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return std::exp(-s * inv_two_h2);
}

inline double inv_two_h2(const KernelSpec& spec) {
    return 1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
}

}  // namespace

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::gaussian:
            return "gaussian";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "gaussian") return KernelFamily::gaussian;
    throw InputError("unknown kernel family '" + name + "'");
}

void validate(const KernelSpec& spec) {
    require(std::isfinite(spec.bandwidth) && spec.bandwidth > 0.0,
            "kernel bandwidth must be positive and finite");
}

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& a,
                   const Eigen::Ref<const Vector>& b) {
    validate(spec);
    require(a.size() == b.size(), "kernel_eval: dimension mismatch (" +
                                      std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()) + ")");
    const Vector ac = a;
    const Vector bc = b;
    return gaussian_entry(ac.data(), bc.data(), ac.size(), inv_two_h2(spec));
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& rows, const Matrix& cols) {
    validate(spec);
    require(rows.cols() == cols.cols(), "kernel_matrix: dimension mismatch (" +
                                            std::to_string(rows.cols()) + " vs " +
                                            std::to_string(cols.cols()) + ")");
    const Index d = rows.cols();
    // Column-major transposes give each point a contiguous slice.
    const Matrix rt = rows.transpose();
    const Matrix ct = cols.transpose();
    const double c = inv_two_h2(spec);
    Matrix out(rows.rows(), cols.rows());
    for (Index j = 0; j < cols.rows(); ++j) {
        const double* b = ct.data() + j * d;
        for (Index i = 0; i < rows.rows(); ++i) {
            out(i, j) = gaussian_entry(rt.data() + i * d, b, d, c);
        }
    }
    return out;
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& points) {
    validate(spec);
    const Index n = points.rows();
    const Index d = points.cols();
    const Matrix pt = points.transpose();
    const double c = inv_two_h2(spec);
    Matrix out(n, n);
    for (Index j = 0; j < n; ++j) {
        const double* b = pt.data() + j * d;
        out(j, j) = gaussian_entry(b, b, d, c);
        for (Index i = j + 1; i < n; ++i) {
            const double v = gaussian_entry(pt.data() + i * d, b, d, c);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

double median_bandwidth(const Matrix& points, std::uint64_t seed, Index max_points) {
    require(max_points >= 2, "median_bandwidth needs max_points >= 2");
    const Index n = points.rows();
    if (n < 2) return 1.0;
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    if (n > max_points) {
        auto rng = make_rng(seed, 0x6d656469616eULL);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(max_points));
    }
    const Index m = static_cast<Index>(idx.size());
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Index i = 0; i < m; ++i) {
        for (Index j = i + 1; j < m; ++j) {
            dists.push_back((points.row(idx[i]) - points.row(idx[j])).norm());
        }
    }
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    double med = *mid;
    if (dists.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(dists.begin(), mid));
    }
    return med > 0.0 && std::isfinite(med) ? med : 1.0;
}

}  // namespace enfo
