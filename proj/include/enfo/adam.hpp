#pragma once

#include "enfo/dataset.hpp"

#include <cstdint>

namespace enfo {

struct AdamSettings {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void validate(const AdamSettings& s);

/// Moment estimates over the flattened synthetic parameters.
struct AdamState {
    Vector first_moment;
    Vector second_moment;
    std::int64_t step_count = 0;

    static AdamState zeros(Index size);
};

struct AdamUpdate {
    Vector params;
    AdamState state;
    bool accepted = true;
};

/// Bias-corrected Adam update. A gradient with any non-finite entry is
/// rejected: params and state come back unchanged and a warning is logged.
AdamUpdate adam_step(const AdamState& state, const Vector& params, const Vector& grad,
                     const AdamSettings& settings);

}  // namespace enfo
