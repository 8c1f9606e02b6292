#pragma once

#include "enfo/dataset.hpp"

namespace enfo {

/// Closed-form least-squares key model f(x) = w^T x.
struct LinearModel {
    Vector weights;
};

LinearModel linreg_fit(const Dataset& data);

Vector predict(const LinearModel& model, const Matrix& points);

}  // namespace enfo
