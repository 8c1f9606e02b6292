#include "enfo/linalg.hpp"

#include "enfo/error.hpp"

namespace enfo {

Vector solve_normal_equations(const Matrix& X, const Vector& y) {
    require(X.rows() >= 1 && X.cols() >= 1, "design matrix must be non-empty");
    require(X.rows() == y.size(), "design rows and target length differ");
    Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    return svd.solve(y);
}

}  // namespace enfo
