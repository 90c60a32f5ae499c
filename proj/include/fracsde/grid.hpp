#pragma once

// Uniform time grids and grid-sampled trajectories in spectral coordinates.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fracsde {

// Spectral coefficient vector, one entry per retained mode.
using State = std::vector<double>;

struct TimeGrid {
    double dt = 0.0;
    int steps = 0;  // nodes are t_i = i*dt for i = 0..steps

    TimeGrid() = default;
    TimeGrid(double dt_, int steps_) : dt(dt_), steps(steps_) {
        if (!(dt > 0.0) || steps < 1) {
            throw domain_error("TimeGrid: need dt > 0 and steps >= 1, got dt=" +
                               std::to_string(dt_) + " steps=" + std::to_string(steps_));
        }
    }

    // Grid covering [0, horizon]; the step count is rounded so dt divides
    // the horizon exactly (dt is adjusted, never the horizon).
    static TimeGrid from_horizon(double horizon, double dt_request) {
        if (!(horizon > 0.0) || !(dt_request > 0.0)) {
            throw domain_error("TimeGrid::from_horizon: need horizon > 0 and dt > 0");
        }
        long long n = std::llround(horizon / dt_request);
        if (n < 1) n = 1;
        return TimeGrid(horizon / static_cast<double>(n), static_cast<int>(n));
    }

    int nodes() const { return steps + 1; }
    double horizon() const { return dt * steps; }
    double time(int i) const { return dt * i; }
};

inline bool same_grid(const TimeGrid& a, const TimeGrid& b) {
    return a.steps == b.steps && a.dt == b.dt;
}

struct Trajectory {
    TimeGrid grid;
    std::vector<State> states;  // states[i] is the coefficient vector at grid.time(i)

    Trajectory() = default;
    Trajectory(const TimeGrid& g, int modes)
        : grid(g), states(static_cast<std::size_t>(g.nodes()), State(modes, 0.0)) {}

    int modes() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
};

inline double l2_norm_sq(const State& s) {
    double acc = 0.0;
    for (double v : s) acc += v * v;
    return acc;
}

inline double l2_norm(const State& s) { return std::sqrt(l2_norm_sq(s)); }

// sup over nodes of the l2 distance between two trajectories on one grid.
inline double sup_gap(const Trajectory& a, const Trajectory& b) {
    if (!same_grid(a.grid, b.grid) || a.states.size() != b.states.size()) {
        throw domain_error("sup_gap: trajectories live on different grids");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < a.states[i].size(); ++k) {
            double d = a.states[i][k] - b.states[i][k];
            acc += d * d;
        }
        worst = std::max(worst, acc);
    }
    return std::sqrt(worst);
}

}  // namespace fracsde
