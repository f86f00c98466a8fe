#pragma once

#include <stdexcept>

namespace regimeopt {

// Uniform grid on [0, horizon] with n_steps cells (n_steps + 1 nodes).
struct TimeGrid {
    double horizon = 1.0;
    int n_steps = 0;

    TimeGrid() = default;
    TimeGrid(double horizon_, int n_steps_) : horizon(horizon_), n_steps(n_steps_) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (n_steps < 2) throw std::invalid_argument("TimeGrid: need at least two steps");
    }

    double dt() const { return horizon / n_steps; }
    double t(int i) const { return horizon * static_cast<double>(i) / n_steps; }
    int nodes() const { return n_steps + 1; }

    bool operator==(const TimeGrid& o) const {
        return horizon == o.horizon && n_steps == o.n_steps;
    }
};

}  // namespace regimeopt
