#pragma once

// Reproducible driving noise: truncated Karhunen-Loeve Q-Wiener increments
// and marked Poisson events with finite total rate, plus the compensated
// jump integral. All sampling is keyed by (master_seed, path_index), so a
// realization is a pure function of its inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace fracsde {

struct QWienerSpec {
    std::vector<double> q_eigenvalues;  // covariance eigenvalues, >= 0, finite count

    int modes() const { return static_cast<int>(q_eigenvalues.size()); }

    void validate() const {
        for (double q : q_eigenvalues) {
            if (!(q >= 0.0)) {
                throw domain_error("QWienerSpec: covariance eigenvalues must be >= 0");
            }
        }
    }
};

// Normalized mark law of the jump measure. The intensity on the mark space
// is total_rate * (mark density); point_mass puts everything on one mark.
struct MarkDistribution {
    enum class Kind { point_mass, uniform };
    Kind kind = Kind::uniform;
    double point = 0.0;        // point_mass location
    double lo = 0.0, hi = 1.0;  // uniform support

    void validate() const {
        if (kind == Kind::uniform && !(hi > lo)) {
            throw domain_error("MarkDistribution: uniform support needs hi > lo");
        }
    }
};

struct JumpSpec {
    double total_rate = 0.0;  // events per unit time, integral of the intensity over marks
    MarkDistribution marks;

    void validate() const {
        if (!(total_rate >= 0.0) || !std::isfinite(total_rate)) {
            throw config_error("JumpSpec: total_rate must be finite and >= 0 "
                               "(infinite-activity regimes are out of scope)");
        }
        marks.validate();
    }
};

struct JumpEvent {
    double time;
    double mark;
};

struct NoiseRealization {
    TimeGrid grid;
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    // increments[i][k] is the k-th mode increment over [t_i, t_{i+1}],
    // already scaled by sqrt(q_k * dt); steps x K entries
    std::vector<std::vector<double>> wiener_increments;
    std::vector<JumpEvent> jump_events;  // times strictly inside (0, horizon), sorted
};

namespace noise_detail {

// Gauss-Legendre rule on [-1, 1], nodes by Newton iteration on P_n. Computed
// once; avoids transcription errors from literal tables.
inline const std::vector<std::pair<double, double>>& gauss_legendre_16() {
    static const std::vector<std::pair<double, double>> rule = [] {
        const int n = 16;
        std::vector<std::pair<double, double>> r(n);
        for (int i = 0; i < n; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p = std::legendre(n, x);
                double pm = std::legendre(n - 1, x);
                double dp = n * (x * p - pm) / (x * x - 1.0);
                double dx = p / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-15) break;
            }
            double p = std::legendre(n, x);
            double pm = std::legendre(n - 1, x);
            double dp = n * (x * p - pm) / (x * x - 1.0);
            r[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
        }
        std::sort(r.begin(), r.end());
        return r;
    }();
    return rule;
}

}  // namespace noise_detail

// Quadrature nodes (mark, weight) such that sum_i w_i f(u_i) approximates
// the intensity-measure integral of f over the mark space; total weight is
// the total rate. Exact for point masses, Gauss-Legendre for uniform marks.
inline std::vector<std::pair<double, double>> mark_quadrature(const JumpSpec& spec) {
    spec.validate();
    if (spec.total_rate == 0.0) return {};
    if (spec.marks.kind == MarkDistribution::Kind::point_mass) {
        return {{spec.marks.point, spec.total_rate}};
    }
    std::vector<std::pair<double, double>> nodes;
    double mid = 0.5 * (spec.marks.lo + spec.marks.hi);
    double half = 0.5 * (spec.marks.hi - spec.marks.lo);
    for (const auto& [x, w] : noise_detail::gauss_legendre_16()) {
        // uniform density rate/(hi-lo); the (hi-lo) factors cancel to rate*w/2
        nodes.emplace_back(mid + half * x, spec.total_rate * w * 0.5);
    }
    return nodes;
}

// Integral of a state-valued function against the intensity measure.
template <class F>
State mark_integral(const JumpSpec& spec, double t, F&& integrand) {
    State acc;
    for (const auto& [u, w] : mark_quadrature(spec)) {
        State v = integrand(t, u);
        if (acc.empty()) acc.assign(v.size(), 0.0);
        for (std::size_t k = 0; k < v.size(); ++k) acc[k] += w * v[k];
    }
    return acc;
}

// Q-Wiener increments for one path; deterministic in (master_seed, path_index).
inline NoiseRealization sample_wiener(const QWienerSpec& spec, const TimeGrid& grid,
                                      std::uint64_t master_seed, std::uint64_t path_index) {
    spec.validate();
    NoiseRealization out;
    out.grid = grid;
    out.master_seed = master_seed;
    out.path_index = path_index;
    CounterRng rng(master_seed, path_index, StreamTag::wiener);
    out.wiener_increments.assign(grid.steps, std::vector<double>(spec.modes(), 0.0));
    for (int i = 0; i < grid.steps; ++i) {
        for (int k = 0; k < spec.modes(); ++k) {
            double scale = std::sqrt(spec.q_eigenvalues[k] * grid.dt);
            // draw even for zero-variance modes so the stream layout is
            // independent of which eigenvalues vanish
            double z = rng.next_normal();
            out.wiener_increments[i][k] = scale * z;
        }
    }
    return out;
}

// Marked Poisson events on (0, horizon); gaps are exponential with the total
// rate, marks drawn from the normalized mark law.
inline NoiseRealization sample_poisson(const JumpSpec& spec, const TimeGrid& grid,
                                       std::uint64_t master_seed, std::uint64_t path_index) {
    spec.validate();
    NoiseRealization out;
    out.grid = grid;
    out.master_seed = master_seed;
    out.path_index = path_index;
    if (spec.total_rate == 0.0) return out;
    CounterRng times(master_seed, path_index, StreamTag::jump_times);
    CounterRng marks(master_seed, path_index, StreamTag::jump_marks);
    double t = 0.0;
    const double horizon = grid.horizon();
    for (;;) {
        t += times.next_exponential(spec.total_rate);
        if (t >= horizon) break;
        double u;
        if (spec.marks.kind == MarkDistribution::Kind::point_mass) {
            u = spec.marks.point;
        } else {
            u = spec.marks.lo + (spec.marks.hi - spec.marks.lo) * marks.next_uniform();
        }
        out.jump_events.push_back(JumpEvent{t, u});
    }
    return out;
}

// Wiener part and jump part together; streams are tagged independently, so
// this equals the union of sample_wiener and sample_poisson outputs.
inline NoiseRealization sample_noise(const QWienerSpec& wspec, const JumpSpec& jspec,
                                     const TimeGrid& grid, std::uint64_t master_seed,
                                     std::uint64_t path_index) {
    NoiseRealization w = sample_wiener(wspec, grid, master_seed, path_index);
    NoiseRealization j = sample_poisson(jspec, grid, master_seed, path_index);
    w.jump_events = std::move(j.jump_events);
    return w;
}

// Compensated jump integral as a trajectory:
//   value(t_i) = sum_{events s <= t_i} integrand(s, u)
//              - sum_{j < i} dt * (intensity integral of integrand(t_j, .))
// The compensator uses the same left-endpoint grid quadrature as the drift
// terms, so both halves carry matching discretization error.
inline Trajectory compensated_integral(const std::vector<JumpEvent>& events,
                                       const std::function<State(double, double)>& integrand,
                                       const JumpSpec& spec, const TimeGrid& grid) {
    // probe the integrand once to size the state space
    double probe_mark =
        spec.marks.kind == MarkDistribution::Kind::point_mass ? spec.marks.point : spec.marks.lo;
    State probe = integrand(0.0, probe_mark);
    Trajectory out(grid, static_cast<int>(probe.size()));

    State running(probe.size(), 0.0);
    std::size_t next_event = 0;
    State comp(probe.size(), 0.0);
    for (int i = 0; i <= grid.steps; ++i) {
        double t = grid.time(i);
        while (next_event < events.size() && events[next_event].time <= t) {
            State v = integrand(events[next_event].time, events[next_event].mark);
            for (std::size_t k = 0; k < running.size(); ++k) running[k] += v[k];
            ++next_event;
        }
        for (std::size_t k = 0; k < running.size(); ++k) {
            out.states[i][k] = running[k] - comp[k];
        }
        if (i < grid.steps) {
            State mi = mark_integral(spec, t, [&](double s, double u) { return integrand(s, u); });
            if (!mi.empty()) {
                for (std::size_t k = 0; k < comp.size(); ++k) comp[k] += grid.dt * mi[k];
            }
        }
    }
    return out;
}

// Audit dump, one row per increment and per jump event:
//   path,step_or_event,mode_or_mark,value
// Wiener rows carry (step index, mode index, increment); jump rows carry
// (event index, mark, event time).
inline void dump_noise_csv(const NoiseRealization& noise, std::ostream& os) {
    os << "path,step_or_event,mode_or_mark,value\n";
    char buf[64];
    for (std::size_t i = 0; i < noise.wiener_increments.size(); ++i) {
        for (std::size_t k = 0; k < noise.wiener_increments[i].size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", noise.wiener_increments[i][k]);
            os << noise.path_index << ',' << i << ',' << k << ',' << buf << '\n';
        }
    }
    for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
        char mb[64];
        std::snprintf(mb, sizeof mb, "%.17g", noise.jump_events[e].mark);
        std::snprintf(buf, sizeof buf, "%.17g", noise.jump_events[e].time);
        os << noise.path_index << ',' << e << ',' << mb << ',' << buf << '\n';
    }
}

}  // namespace fracsde
