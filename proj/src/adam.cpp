#include "enfo/adam.hpp"

#include "enfo/error.hpp"

#include <cmath>
#include <iostream>

namespace enfo {

void validate(const AdamSettings& s) {
    require(s.learning_rate >= 0.0 && std::isfinite(s.learning_rate),
            "learning rate must be finite and non-negative");
    require(s.beta1 > 0.0 && s.beta1 < 1.0, "adam beta1 must lie in (0, 1)");
    require(s.beta2 > 0.0 && s.beta2 < 1.0, "adam beta2 must lie in (0, 1)");
    require(s.epsilon > 0.0, "adam epsilon must be positive");
}

AdamState AdamState::zeros(Index size) {
    return AdamState{Vector::Zero(size), Vector::Zero(size), 0};
}

AdamUpdate adam_step(const AdamState& state, const Vector& params, const Vector& grad,
                     const AdamSettings& settings) {
    require(params.size() == grad.size(), "adam_step: gradient shape mismatch");
    require(state.first_moment.size() == params.size() &&
                state.second_moment.size() == params.size(),
            "adam_step: state shape mismatch");
    if (!grad.allFinite()) {
        std::cerr << "warning: rejected optimizer step " << state.step_count + 1
                  << " (non-finite gradient)\n";
        return AdamUpdate{params, state, false};
    }
    AdamUpdate out;
    out.state.step_count = state.step_count + 1;
    out.state.first_moment = settings.beta1 * state.first_moment + (1.0 - settings.beta1) * grad;
    out.state.second_moment = settings.beta2 * state.second_moment +
                              (1.0 - settings.beta2) * grad.cwiseProduct(grad);
    const double t = static_cast<double>(out.state.step_count);
    const double c1 = 1.0 - std::pow(settings.beta1, t);
    const double c2 = 1.0 - std::pow(settings.beta2, t);
    out.params = params.array() - settings.learning_rate * (out.state.first_moment.array() / c1) /
                                      ((out.state.second_moment.array() / c2).sqrt() +
                                       settings.epsilon);
    if (!out.params.allFinite()) {
        std::cerr << "warning: rejected optimizer step " << out.state.step_count
                  << " (non-finite parameters)\n";
        return AdamUpdate{params, state, false};
    }
    return out;
}

}  // namespace enfo
