#pragma once

#include "enfo/dataset.hpp"

namespace enfo {

struct SinkhornResult {
    double value = 0.0;
    /// d value / d a, same shape as `a`.
    Matrix gradient;
};

/// Debiased entropic divergence S(a, b) = OT(a, b) - OT(a, a)/2 - OT(b, b)/2
/// between uniformly weighted point clouds under squared Euclidean cost.
/// The entropic scale is blur^2. Blur starts at the cloud diameter and halves
/// each iteration until it reaches `blur`; at most `iters` iterations run in
/// total, stopping early once the potentials stop changing. The gradient
/// uses the final dual potentials (envelope theorem).
SinkhornResult sinkhorn_divergence(const Matrix& a, const Matrix& b, double blur, int iters);

}  // namespace enfo
