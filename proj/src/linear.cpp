#include "enfo/linear.hpp"

#include "enfo/error.hpp"
#include "enfo/linalg.hpp"

namespace enfo {

LinearModel linreg_fit(const Dataset& data) {
    validate(data);
    return LinearModel{solve_normal_equations(data.features, data.target)};
}

Vector predict(const LinearModel& model, const Matrix& points) {
    require(points.cols() == model.weights.size(), "predict: width mismatch");
    return points * model.weights;
}

}  // namespace enfo
