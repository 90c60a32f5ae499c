#pragma once

// Discretized mild-solution machinery: family kernel tables, the one-step
// solution map, successive approximation with optional contractor-corrected
// updates, a single-pass direct scheme, the perturbed-identity (regularity)
// solve, a two-start uniqueness check, and deterministic multi-threaded
// ensemble moment accumulation.
//
// Quadrature convention: every time integral uses the left endpoint of each
// subinterval, so integrands never anticipate the driving noise on the
// current step. Stochastic integrals pair the left-endpoint integrand value
// with the increment over the same subinterval.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "criteria.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "noise.hpp"
#include "problem_model.hpp"
#include "spectral_operator.hpp"

namespace fracsde {

enum class FamilyKind { cosine, sine };

// Per-mode kernel tables over grid lags, shared across paths and iterations:
// cos_k[i][n], sin_k[i][n], and the neutral kernel lambda_n * sin_k.
struct FamilyKernels {
    TimeGrid grid{1.0, 1};
    std::vector<State> cos_k, sin_k, neutral_k;

    static FamilyKernels build(const ProblemSpec& spec, const TimeGrid& grid) {
        FamilyKernels k;
        k.grid = grid;
        int m = spec.modes();
        k.cos_k.assign(grid.nodes(), State(m, 0.0));
        k.sin_k.assign(grid.nodes(), State(m, 0.0));
        k.neutral_k.assign(grid.nodes(), State(m, 0.0));
        for (int i = 0; i < grid.nodes(); ++i) {
            double t = grid.time(i);
            for (int n = 0; n < m; ++n) {
                double lam = spec.generator.eigenvalues[n];
                k.cos_k[i][n] = cosine_scalar(spec.alpha, t, lam);
                k.sin_k[i][n] = sine_scalar(spec.alpha, t, lam);
                k.neutral_k[i][n] = lam * k.sin_k[i][n];
            }
        }
        return k;
    }
};

// Sine-family values at event-to-node lags; sin_at[e][i] is zero for nodes
// at or before the event time. Built once per noise realization and shared
// across iterations.
struct EventKernels {
    std::vector<std::vector<State>> sin_at;

    static EventKernels build(const ProblemSpec& spec, const TimeGrid& grid,
                              const std::vector<JumpEvent>& events) {
        EventKernels k;
        int m = spec.modes();
        k.sin_at.assign(events.size(), std::vector<State>(grid.nodes(), State(m, 0.0)));
        for (std::size_t e = 0; e < events.size(); ++e) {
            for (int i = 0; i < grid.nodes(); ++i) {
                double lag = grid.time(i) - events[e].time;
                if (lag <= 0.0) continue;
                for (int n = 0; n < m; ++n) {
                    k.sin_at[e][i][n] = sine_scalar(spec.alpha, lag, spec.generator.eigenvalues[n]);
                }
            }
        }
        return k;
    }
};

// Left-endpoint convolution of per-node values against a resolvent family:
// out[i] = sum_{j<i} dt * K(t_{i-j}) . values[j].
inline std::vector<State> convolve_family(FamilyKind kind, double alpha,
                                          const SpectralGenerator& gen,
                                          const std::vector<State>& values, const TimeGrid& grid) {
    gen.validate();
    if (static_cast<int>(values.size()) != grid.nodes()) {
        throw domain_error("convolve_family: values must have one entry per grid node");
    }
    int m = gen.modes();
    std::vector<State> kern(grid.nodes(), State(m, 0.0));
    for (int i = 1; i < grid.nodes(); ++i) {
        for (int n = 0; n < m; ++n) {
            double lam = gen.eigenvalues[n];
            kern[i][n] = kind == FamilyKind::cosine ? cosine_scalar(alpha, grid.time(i), lam)
                                                    : sine_scalar(alpha, grid.time(i), lam);
        }
    }
    std::vector<State> out(grid.nodes(), State(m, 0.0));
    for (int i = 1; i < grid.nodes(); ++i) {
        for (int j = 0; j < i; ++j) {
            const State& k = kern[i - j];
            const State& v = values[j];
            for (int n = 0; n < m && n < static_cast<int>(v.size()); ++n) {
                out[i][n] += grid.dt * k[n] * v[n];
            }
        }
    }
    return out;
}

namespace solver_detail {

// Domain heuristic for the neutral coefficient: its fractionally weighted
// modes must not concentrate at the high end of the spectrum, otherwise the
// neutral convolution carries an unbounded operator onto values outside its
// domain and the discretization is meaningless.
inline void check_neutral_regularity(const ProblemSpec& spec) {
    if (!spec.coefficients.g) return;
    int m = spec.modes();
    if (m < 6) return;
    Trajectory dummy(TimeGrid(spec.horizon, 1), m);
    HistorySegment h = spec.history_at(dummy, 0.0);
    State gv = spec.coefficients.g(0.0, h);
    State w = apply_diag_power(spec.generator, spec.bounds.gamma, gv);
    double lead = 0.0, tail = 0.0;
    for (int n = 0; n < m / 2; ++n) lead = std::max(lead, std::fabs(w[n]));
    for (int n = m / 2; n < m; ++n) tail = std::max(tail, std::fabs(w[n]));
    if (tail > 1e-12 && tail > 4.0 * lead) {
        std::ostringstream os;
        os << "neutral coefficient concentrates outside the fractional domain: weighted tail "
           << tail << " exceeds 4x the leading-mode weight " << lead;
        throw ill_posed_neutral_term_error(os.str());
    }
}

inline State initial_neutral_offset(const ProblemSpec& spec, const TimeGrid& grid) {
    int m = spec.modes();
    Trajectory dummy(grid, m);
    State w0 = spec.phi ? spec.phi(0.0) : State(m, 0.0);
    w0.resize(m, 0.0);
    if (spec.coefficients.g) {
        HistorySegment h0 = spec.history_at(dummy, 0.0);
        State g0 = spec.coefficients.g(0.0, h0);
        for (int n = 0; n < m; ++n) w0[n] += g0[n];
    }
    return w0;
}

// per-node coefficient values of a trajectory, null coefficient meaning zero
inline std::vector<State> eval_history_coefficient(const ProblemSpec& spec,
                                                   const HistoryCoefficient& c,
                                                   const Trajectory& x) {
    int m = spec.modes();
    std::vector<State> out(x.grid.nodes(), State(m, 0.0));
    if (!c) return out;
    for (int i = 0; i < x.grid.nodes(); ++i) {
        out[i] = c(x.grid.time(i), spec.history_at(x, x.grid.time(i)));
        out[i].resize(m, 0.0);
    }
    return out;
}

inline void axpy(State& y, double a, const State& k, const State& v) {
    std::size_t n = std::min({y.size(), k.size(), v.size()});
    for (std::size_t i = 0; i < n; ++i) y[i] += a * k[i] * v[i];
}

}  // namespace solver_detail

// One application of the mild-solution map to a trajectory iterate, with all
// integral terms discretized on the trajectory grid against the supplied
// noise realization.
inline Trajectory mild_map(const ProblemSpec& spec, const Trajectory& x,
                           const NoiseRealization& noise, const FamilyKernels& kernels,
                           const EventKernels& event_kernels) {
    spec.validate();
    solver_detail::check_neutral_regularity(spec);
    if (!same_grid(x.grid, kernels.grid) || !same_grid(x.grid, noise.grid)) {
        throw domain_error("mild_map: trajectory, kernel, and noise grids must agree");
    }
    const TimeGrid& grid = x.grid;
    const int m = spec.modes();
    const int nodes = grid.nodes();
    const double dt = grid.dt;
    const auto& co = spec.coefficients;

    State w0 = solver_detail::initial_neutral_offset(spec, grid);
    State eta = spec.eta;
    eta.resize(m, 0.0);

    std::vector<State> g_vals = solver_detail::eval_history_coefficient(spec, co.g, x);
    std::vector<State> f_vals = solver_detail::eval_history_coefficient(spec, co.f, x);
    std::vector<State> G_vals = solver_detail::eval_history_coefficient(spec, co.G, x);
    std::vector<State> comp_vals(nodes, State(m, 0.0));
    std::vector<State> sigma_event(noise.jump_events.size(), State(m, 0.0));
    if (co.sigma) {
        for (int j = 0; j < nodes; ++j) {
            double t = grid.time(j);
            HistorySegment h = spec.history_at(x, t);
            comp_vals[j] = mark_integral(spec.jumps, t,
                                         [&](double tt, double u) { return co.sigma(tt, h, u); });
            comp_vals[j].resize(m, 0.0);
        }
        for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
            const JumpEvent& ev = noise.jump_events[e];
            HistorySegment h = spec.history_at(x, ev.time);
            sigma_event[e] = co.sigma(ev.time, h, ev.mark);
            sigma_event[e].resize(m, 0.0);
        }
    }

    Trajectory out(grid, m);
    for (int i = 0; i < nodes; ++i) {
        State acc(m, 0.0);
        for (int n = 0; n < m; ++n) {
            acc[n] = kernels.cos_k[i][n] * w0[n] + kernels.sin_k[i][n] * eta[n];
        }
        if (co.g) {
            double t = grid.time(i);
            State gi = co.g(t, spec.history_at(x, t));
            gi.resize(m, 0.0);
            for (int n = 0; n < m; ++n) acc[n] -= gi[n];
            for (int j = 0; j < i; ++j) {
                solver_detail::axpy(acc, -dt, kernels.neutral_k[i - j], g_vals[j]);
            }
        }
        if (co.f) {
            for (int j = 0; j < i; ++j) {
                solver_detail::axpy(acc, dt, kernels.sin_k[i - j], f_vals[j]);
            }
        }
        if (co.G) {
            for (int j = 0; j < i; ++j) {
                const State& dw = noise.wiener_increments[j];
                const State& k = kernels.sin_k[i - j];
                const State& gv = G_vals[j];
                std::size_t kk = std::min({static_cast<std::size_t>(m), dw.size(), gv.size()});
                for (std::size_t n = 0; n < kk; ++n) acc[n] += k[n] * gv[n] * dw[n];
            }
        }
        if (co.sigma) {
            double ti = grid.time(i);
            for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
                if (noise.jump_events[e].time >= ti) break;
                solver_detail::axpy(acc, 1.0, event_kernels.sin_at[e][i], sigma_event[e]);
            }
            for (int j = 0; j < i; ++j) {
                solver_detail::axpy(acc, -dt, kernels.sin_k[i - j], comp_vals[j]);
            }
        }
        out.states[i] = std::move(acc);
    }
    return out;
}

inline Trajectory mild_map(const ProblemSpec& spec, const Trajectory& x,
                           const NoiseRealization& noise) {
    FamilyKernels kernels = FamilyKernels::build(spec, x.grid);
    EventKernels ev = EventKernels::build(spec, x.grid, noise.jump_events);
    return mild_map(spec, x, noise, kernels, ev);
}

// Starting iterate: the family applied to the initial data only.
inline Trajectory picard_initial(const ProblemSpec& spec, const TimeGrid& grid,
                                 const FamilyKernels& kernels) {
    int m = spec.modes();
    State w0 = solver_detail::initial_neutral_offset(spec, grid);
    State eta = spec.eta;
    eta.resize(m, 0.0);
    Trajectory x(grid, m);
    for (int i = 0; i < grid.nodes(); ++i) {
        for (int n = 0; n < m; ++n) {
            x.states[i][n] = kernels.cos_k[i][n] * w0[n] + kernels.sin_k[i][n] * eta[n];
        }
    }
    return x;
}

inline Trajectory picard_initial(const ProblemSpec& spec, const TimeGrid& grid) {
    return picard_initial(spec, grid, FamilyKernels::build(spec, grid));
}

// Defect of an iterate under the solution map, y = x - Phi(x).
inline Trajectory picard_residual(const ProblemSpec& spec, const Trajectory& x,
                                  const NoiseRealization& noise, const FamilyKernels& kernels,
                                  const EventKernels& event_kernels) {
    Trajectory phi = mild_map(spec, x, noise, kernels, event_kernels);
    Trajectory y(x.grid, spec.modes());
    for (int i = 0; i < x.grid.nodes(); ++i) {
        for (int n = 0; n < spec.modes(); ++n) {
            y.states[i][n] = x.states[i][n] - phi.states[i][n];
        }
    }
    return y;
}

inline Trajectory picard_residual(const ProblemSpec& spec, const Trajectory& x,
                                  const NoiseRealization& noise) {
    FamilyKernels kernels = FamilyKernels::build(spec, x.grid);
    EventKernels ev = EventKernels::build(spec, x.grid, noise.jump_events);
    return picard_residual(spec, x, noise, kernels, ev);
}

// Contractor-corrected step
//   x_{k+1} = x_k - [ y + int S (Gamma1 + Gamma2) y + int S Gamma3 y dw
//                     + jump correction on Gamma4 y ],
// which reduces to x_{k+1} = Phi(x_k) when every contractor vanishes. The
// jump correction integrates against the compensator intensity by default
// and against the centered event measure when the spec requests it.
inline Trajectory picard_update(const ProblemSpec& spec, const Trajectory& x, const Trajectory& y,
                                const NoiseRealization& noise, const FamilyKernels& kernels,
                                const EventKernels& event_kernels) {
    if (!same_grid(x.grid, y.grid)) {
        throw domain_error("picard_update: iterate and residual grids must agree");
    }
    const TimeGrid& grid = x.grid;
    const int m = spec.modes();
    const double dt = grid.dt;
    const auto& ct = spec.contractors;

    Trajectory out(grid, m);
    std::vector<State> drift_part(grid.nodes(), State(m, 0.0));
    std::vector<State> diff_part(grid.nodes(), State(m, 0.0));
    std::vector<State> jump_comp(grid.nodes(), State(m, 0.0));
    std::vector<State> jump_event(noise.jump_events.size(), State(m, 0.0));
    const bool have = !ct.all_zero();
    if (have) {
        for (int j = 0; j < grid.nodes(); ++j) {
            double t = grid.time(j);
            const State& xj = x.states[j];
            const State& yj = y.states[j];
            if (ct.gamma1) {
                solver_detail::axpy(drift_part[j], 1.0, ct.gamma1(t, xj), yj);
            }
            if (ct.gamma2) {
                solver_detail::axpy(drift_part[j], 1.0, ct.gamma2(t, xj), yj);
            }
            if (ct.gamma3) {
                solver_detail::axpy(diff_part[j], 1.0, ct.gamma3(t, xj), yj);
            }
            if (ct.gamma4) {
                jump_comp[j] = mark_integral(spec.jumps, t, [&](double tt, double u) {
                    State gy(m, 0.0);
                    solver_detail::axpy(gy, 1.0, ct.gamma4(tt, xj, u), yj);
                    return gy;
                });
                jump_comp[j].resize(m, 0.0);
            }
        }
        if (ct.gamma4 && ct.use_martingale_jump_correction) {
            for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
                const JumpEvent& ev = noise.jump_events[e];
                // contractor argument and residual sampled at the last node
                // not after the event time
                int j = std::min(static_cast<int>(ev.time / grid.dt), grid.steps);
                solver_detail::axpy(jump_event[e], 1.0, ct.gamma4(ev.time, x.states[j], ev.mark),
                                    y.states[j]);
            }
        }
    }

    for (int i = 0; i < grid.nodes(); ++i) {
        State corr = y.states[i];
        if (have) {
            for (int j = 0; j < i; ++j) {
                solver_detail::axpy(corr, dt, kernels.sin_k[i - j], drift_part[j]);
                if (ct.gamma3) {
                    const State& dw = noise.wiener_increments[j];
                    const State& k = kernels.sin_k[i - j];
                    const State& dv = diff_part[j];
                    std::size_t kk = std::min({static_cast<std::size_t>(m), dw.size(), dv.size()});
                    for (std::size_t n = 0; n < kk; ++n) corr[n] += k[n] * dv[n] * dw[n];
                }
                if (ct.gamma4) {
                    double sgn = ct.use_martingale_jump_correction ? -1.0 : 1.0;
                    solver_detail::axpy(corr, sgn * dt, kernels.sin_k[i - j], jump_comp[j]);
                }
            }
            if (ct.gamma4 && ct.use_martingale_jump_correction) {
                double ti = grid.time(i);
                for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
                    if (noise.jump_events[e].time >= ti) break;
                    solver_detail::axpy(corr, 1.0, event_kernels.sin_at[e][i], jump_event[e]);
                }
            }
        }
        for (int n = 0; n < m; ++n) {
            out.states[i][n] = x.states[i][n] - corr[n];
        }
    }
    return out;
}

// Defect size of one iterate: sup over nodes of ||y(t)||^p, the single-path
// surrogate of the moment norm the convergence argument controls.
inline double residual_norm(const Trajectory& y, double p) {
    double sup = 0.0;
    for (const State& s : y.states) sup = std::max(sup, std::pow(l2_norm_sq(s), p / 2.0));
    return sup;
}

struct PicardResult {
    Trajectory x{TimeGrid(1.0, 1), 0};
    bool converged = false;
    bool diverged = false;  // residuals grew past the blowup guard
    int iterations = 0;
    std::vector<double> residuals;  // sup_t ||y||^p after each map application
    double theta_exist = 0.0;       // contraction constant of the closed-form criterion
    std::string note;
};

// Successive approximation from the family-applied initial data. Convergence
// means the sup-norm defect dropped below tol; the result reports the full
// residual history and the closed-form contraction constant either way.
inline PicardResult picard_solve(const ProblemSpec& spec, const TimeGrid& grid,
                                 const NoiseRealization& noise, double tol = 1e-10,
                                 int max_iter = 64) {
    spec.validate();
    if (!(tol > 0.0)) throw domain_error("picard_solve: tol must be > 0");
    if (max_iter < 1) throw domain_error("picard_solve: max_iter must be >= 1");
    solver_detail::check_neutral_regularity(spec);
    FamilyKernels kernels = FamilyKernels::build(spec, grid);
    EventKernels ev = EventKernels::build(spec, grid, noise.jump_events);

    PicardResult res;
    res.theta_exist = existence_criterion(spec).theta;
    Trajectory x = picard_initial(spec, grid, kernels);
    double first = -1.0;
    int growth_streak = 0;
    for (int it = 0; it < max_iter; ++it) {
        Trajectory y = picard_residual(spec, x, noise, kernels, ev);
        double sup = residual_norm(y, spec.p);
        res.residuals.push_back(sup);
        res.iterations = it + 1;
        if (!std::isfinite(sup) || sup > 1e120) {
            res.diverged = true;
            break;
        }
        if (sup <= tol) {
            res.converged = true;
            break;
        }
        if (first < 0.0) first = sup;
        std::size_t k = res.residuals.size();
        if (k >= 2 && res.residuals[k - 1] > res.residuals[k - 2]) {
            ++growth_streak;
        } else {
            growth_streak = 0;
        }
        if (growth_streak >= 3 && sup > 1e6 * std::max(first, 1e-300)) {
            res.diverged = true;
            break;
        }
        x = picard_update(spec, x, y, noise, kernels, ev);
    }
    res.x = std::move(x);
    if (res.diverged) {
        std::ostringstream os;
        os << "iteration diverged after " << res.iterations
           << " steps; contraction constant theta = " << res.theta_exist;
        res.note = os.str();
    } else if (!res.converged) {
        std::ostringstream os;
        os << "no convergence within " << res.iterations
           << " iterations; contraction constant theta = " << res.theta_exist;
        res.note = os.str();
    }
    return res;
}

// Single-pass scheme marching the same discretized mild form forward in
// time, closing the neutral term's dependence on the current value with a
// one-step predictor. Only meaningful for the plain solution map, so any
// nonzero contractor is an unsupported regime.
inline Trajectory direct_scheme(const ProblemSpec& spec, const TimeGrid& grid,
                                const NoiseRealization& noise, const FamilyKernels& kernels,
                                const EventKernels& ev) {
    spec.validate();
    if (!spec.contractors.all_zero()) {
        throw unsupported_regime_error(
            "direct_scheme: contractor-corrected iteration has no single-pass form; use the "
            "successive-approximation solver");
    }
    solver_detail::check_neutral_regularity(spec);
    if (!same_grid(grid, kernels.grid)) {
        throw domain_error("direct_scheme: kernel table grid must match the requested grid");
    }
    const int m = spec.modes();
    const int nodes = grid.nodes();
    const double dt = grid.dt;
    const auto& co = spec.coefficients;

    State w0 = solver_detail::initial_neutral_offset(spec, grid);
    State eta = spec.eta;
    eta.resize(m, 0.0);

    Trajectory x(grid, m);
    std::vector<State> g_vals(nodes, State(m, 0.0));
    std::vector<State> f_vals(nodes, State(m, 0.0));
    std::vector<State> G_vals(nodes, State(m, 0.0));
    std::vector<State> comp_vals(nodes, State(m, 0.0));
    std::vector<State> sigma_event(noise.jump_events.size(), State(m, 0.0));
    std::vector<bool> sigma_done(noise.jump_events.size(), false);

    State phi0 = spec.phi ? spec.phi(0.0) : State(m, 0.0);
    phi0.resize(m, 0.0);
    x.states[0] = phi0;

    auto record_node = [&](int j) {
        double t = grid.time(j);
        HistorySegment h = spec.history_at(x, t);
        if (co.g) {
            g_vals[j] = co.g(t, h);
            g_vals[j].resize(m, 0.0);
        }
        if (co.f) {
            f_vals[j] = co.f(t, h);
            f_vals[j].resize(m, 0.0);
        }
        if (co.G) {
            G_vals[j] = co.G(t, h);
            G_vals[j].resize(m, 0.0);
        }
        if (co.sigma) {
            comp_vals[j] = mark_integral(spec.jumps, t,
                                         [&](double tt, double u) { return co.sigma(tt, h, u); });
            comp_vals[j].resize(m, 0.0);
        }
    };
    record_node(0);

    for (int i = 1; i < nodes; ++i) {
        double ti = grid.time(i);
        // event coefficients become available once the node passes them
        if (co.sigma) {
            for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
                if (sigma_done[e] || noise.jump_events[e].time >= ti) continue;
                HistorySegment h = spec.history_at(x, noise.jump_events[e].time);
                sigma_event[e] = co.sigma(noise.jump_events[e].time, h, noise.jump_events[e].mark);
                sigma_event[e].resize(m, 0.0);
                sigma_done[e] = true;
            }
        }
        State acc(m, 0.0);
        for (int n = 0; n < m; ++n) {
            acc[n] = kernels.cos_k[i][n] * w0[n] + kernels.sin_k[i][n] * eta[n];
        }
        for (int j = 0; j < i; ++j) {
            if (co.g) solver_detail::axpy(acc, -dt, kernels.neutral_k[i - j], g_vals[j]);
            if (co.f) solver_detail::axpy(acc, dt, kernels.sin_k[i - j], f_vals[j]);
            if (co.G) {
                const State& dw = noise.wiener_increments[j];
                const State& k = kernels.sin_k[i - j];
                std::size_t kk = std::min({static_cast<std::size_t>(m), dw.size(), G_vals[j].size()});
                for (std::size_t n = 0; n < kk; ++n) acc[n] += k[n] * G_vals[j][n] * dw[n];
            }
            if (co.sigma) solver_detail::axpy(acc, -dt, kernels.sin_k[i - j], comp_vals[j]);
        }
        if (co.sigma) {
            for (std::size_t e = 0; e < noise.jump_events.size(); ++e) {
                if (noise.jump_events[e].time >= ti) break;
                solver_detail::axpy(acc, 1.0, ev.sin_at[e][i], sigma_event[e]);
            }
        }
        if (co.g) {
            // predictor: freeze the unknown current value at the previous node
            x.states[i] = x.states[i - 1];
            State gi = co.g(ti, spec.history_at(x, ti));
            gi.resize(m, 0.0);
            for (int n = 0; n < m; ++n) acc[n] -= gi[n];
        }
        x.states[i] = std::move(acc);
        record_node(i);
    }
    return x;
}

inline Trajectory direct_scheme(const ProblemSpec& spec, const TimeGrid& grid,
                                const NoiseRealization& noise) {
    FamilyKernels kernels = FamilyKernels::build(spec, grid);
    EventKernels ev = EventKernels::build(spec, grid, noise.jump_events);
    return direct_scheme(spec, grid, noise, kernels, ev);
}

// Solves the perturbed-identity equation
//   y + int S (Gamma1 + Gamma2) y + int S Gamma3 y dw + jump term = rhs
// for y by forward substitution; the discretized couplings are strictly
// causal, so each node is explicit in terms of earlier ones. With all
// contractors zero the solution is rhs itself.
inline Trajectory regularity_solve(const ProblemSpec& spec, const Trajectory& x_base,
                                   const Trajectory& rhs, const NoiseRealization& noise) {
    spec.validate();
    if (!same_grid(x_base.grid, rhs.grid)) {
        throw domain_error("regularity_solve: base and right-hand-side grids must agree");
    }
    const TimeGrid& grid = rhs.grid;
    FamilyKernels kernels = FamilyKernels::build(spec, grid);
    EventKernels ev = EventKernels::build(spec, grid, noise.jump_events);
    const int m = spec.modes();
    const double dt = grid.dt;
    const auto& ct = spec.contractors;

    Trajectory y(grid, m);
    std::vector<State> drift_part(grid.nodes(), State(m, 0.0));
    std::vector<State> diff_part(grid.nodes(), State(m, 0.0));
    std::vector<State> jump_comp(grid.nodes(), State(m, 0.0));
    for (int i = 0; i < grid.nodes(); ++i) {
        State acc = rhs.states[i];
        acc.resize(m, 0.0);
        for (int j = 0; j < i; ++j) {
            solver_detail::axpy(acc, -dt, kernels.sin_k[i - j], drift_part[j]);
            if (ct.gamma3) {
                const State& dw = noise.wiener_increments[j];
                const State& k = kernels.sin_k[i - j];
                std::size_t kk = std::min({static_cast<std::size_t>(m), dw.size(),
                                           diff_part[j].size()});
                for (std::size_t n = 0; n < kk; ++n) acc[n] -= k[n] * diff_part[j][n] * dw[n];
            }
            if (ct.gamma4) solver_detail::axpy(acc, -dt, kernels.sin_k[i - j], jump_comp[j]);
        }
        y.states[i] = std::move(acc);
        double t = grid.time(i);
        const State& xi = x_base.states[i];
        const State& yi = y.states[i];
        if (ct.gamma1) solver_detail::axpy(drift_part[i], 1.0, ct.gamma1(t, xi), yi);
        if (ct.gamma2) solver_detail::axpy(drift_part[i], 1.0, ct.gamma2(t, xi), yi);
        if (ct.gamma3) solver_detail::axpy(diff_part[i], 1.0, ct.gamma3(t, xi), yi);
        if (ct.gamma4) {
            jump_comp[i] = mark_integral(spec.jumps, t, [&](double tt, double u) {
                State gy(m, 0.0);
                solver_detail::axpy(gy, 1.0, ct.gamma4(tt, xi, u), yi);
                return gy;
            });
            jump_comp[i].resize(m, 0.0);
        }
    }
    return y;
}

// Sup-norm defect of a regularity solution substituted back into its
// equation; a correct forward substitution leaves roundoff only.
inline double regularity_residual(const ProblemSpec& spec, const Trajectory& x_base,
                                  const Trajectory& y, const Trajectory& rhs,
                                  const NoiseRealization& noise) {
    const TimeGrid& grid = rhs.grid;
    FamilyKernels kernels = FamilyKernels::build(spec, grid);
    const int m = spec.modes();
    const double dt = grid.dt;
    const auto& ct = spec.contractors;

    std::vector<State> drift_part(grid.nodes(), State(m, 0.0));
    std::vector<State> diff_part(grid.nodes(), State(m, 0.0));
    std::vector<State> jump_comp(grid.nodes(), State(m, 0.0));
    for (int j = 0; j < grid.nodes(); ++j) {
        double t = grid.time(j);
        const State& xj = x_base.states[j];
        const State& yj = y.states[j];
        if (ct.gamma1) solver_detail::axpy(drift_part[j], 1.0, ct.gamma1(t, xj), yj);
        if (ct.gamma2) solver_detail::axpy(drift_part[j], 1.0, ct.gamma2(t, xj), yj);
        if (ct.gamma3) solver_detail::axpy(diff_part[j], 1.0, ct.gamma3(t, xj), yj);
        if (ct.gamma4) {
            jump_comp[j] = mark_integral(spec.jumps, t, [&](double tt, double u) {
                State gy(m, 0.0);
                solver_detail::axpy(gy, 1.0, ct.gamma4(tt, xj, u), yj);
                return gy;
            });
            jump_comp[j].resize(m, 0.0);
        }
    }
    double worst = 0.0;
    for (int i = 0; i < grid.nodes(); ++i) {
        State acc = y.states[i];
        for (int j = 0; j < i; ++j) {
            solver_detail::axpy(acc, dt, kernels.sin_k[i - j], drift_part[j]);
            if (ct.gamma3) {
                const State& dw = noise.wiener_increments[j];
                const State& k = kernels.sin_k[i - j];
                std::size_t kk = std::min({static_cast<std::size_t>(m), dw.size(),
                                           diff_part[j].size()});
                for (std::size_t n = 0; n < kk; ++n) acc[n] += k[n] * diff_part[j][n] * dw[n];
            }
            if (ct.gamma4) solver_detail::axpy(acc, dt, kernels.sin_k[i - j], jump_comp[j]);
        }
        for (int n = 0; n < m; ++n) acc[n] -= rhs.states[i][n];
        worst = std::max(worst, l2_norm(acc));
    }
    return worst;
}

// Distance between two candidate solutions of the same problem on the same
// noise, measured as sup over nodes of ||x2 - x1||^p, the quantity the
// Gronwall uniqueness argument bounds by zero. Requires the instantaneous
// constant of that argument to be subcritical, otherwise the comparison
// proves nothing.
inline double uniqueness_gap(const ProblemSpec& spec, const Trajectory& x1,
                             const Trajectory& x2) {
    UniquenessConstants u = uniqueness_constants(spec);
    if (!u.applicable) {
        std::ostringstream os;
        os << "uniqueness_gap: instantaneous constant " << u.oplus1
           << " is not below 1; the contraction argument does not apply";
        throw inapplicable_criterion_error(os.str());
    }
    if (!same_grid(x1.grid, x2.grid) || x1.states.size() != x2.states.size()) {
        throw domain_error("uniqueness_gap: trajectories live on different grids");
    }
    double sup = 0.0;
    for (std::size_t i = 0; i < x1.states.size(); ++i) {
        const State& a = x1.states[i];
        const State& b = x2.states[i];
        if (a.size() != b.size()) {
            throw domain_error("uniqueness_gap: trajectories have different mode counts");
        }
        double q = 0.0;
        for (std::size_t n = 0; n < a.size(); ++n) q += (b[n] - a[n]) * (b[n] - a[n]);
        sup = std::max(sup, std::pow(q, spec.p / 2.0));
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Ensemble simulation with deterministic reduction.

enum class SolveMethod { automatic, successive, single_pass };

struct MomentAccumulation {
    TimeGrid grid{1.0, 1};
    int paths = 0;
    double p = 2.0;
    std::vector<double> sum_p;     // per node, sum over paths of ||x||^p
    std::vector<double> sum_p_sq;  // per node, sum of squares of ||x||^p
    int nonconverged_paths = 0;
};

// Simulates path_count independent paths and accumulates p-th moment sums
// per node. Paths are processed in fixed-size blocks; partial sums are
// stored per block and reduced in block order, so the result is bit
// identical for any thread count.
inline MomentAccumulation simulate_ensemble(const ProblemSpec& spec, const TimeGrid& grid,
                                            int path_count, std::uint64_t master_seed,
                                            int threads = 0,
                                            SolveMethod method = SolveMethod::automatic,
                                            double tol = 1e-10, int max_iter = 64) {
    spec.validate();
    if (path_count < 1) throw domain_error("simulate_ensemble: path_count must be >= 1");
    if (method == SolveMethod::automatic) {
        method = spec.contractors.all_zero() ? SolveMethod::single_pass : SolveMethod::successive;
    }
    if (method == SolveMethod::single_pass && !spec.contractors.all_zero()) {
        throw unsupported_regime_error(
            "simulate_ensemble: the single-pass scheme cannot honor nonzero contractors");
    }
    const FamilyKernels kernels = FamilyKernels::build(spec, grid);
    const int nodes = grid.nodes();
    const double p = spec.p;

    const int block_size = 32;
    const int blocks = (path_count + block_size - 1) / block_size;
    std::vector<std::vector<double>> block_sum(blocks), block_sq(blocks);
    std::vector<int> block_bad(blocks, 0);

    std::atomic<int> next_block{0};
    auto worker = [&]() {
        for (;;) {
            int b = next_block.fetch_add(1);
            if (b >= blocks) return;
            std::vector<double> sp(nodes, 0.0), sq(nodes, 0.0);
            int bad = 0;
            int lo = b * block_size;
            int hi = std::min(path_count, lo + block_size);
            for (int path = lo; path < hi; ++path) {
                NoiseRealization noise = sample_noise(spec.wiener, spec.jumps, grid, master_seed,
                                                      static_cast<std::uint64_t>(path));
                Trajectory x(grid, spec.modes());
                EventKernels ev = EventKernels::build(spec, grid, noise.jump_events);
                if (method == SolveMethod::single_pass) {
                    x = direct_scheme(spec, grid, noise, kernels, ev);
                } else {
                    Trajectory it = picard_initial(spec, grid, kernels);
                    bool ok = false;
                    for (int k = 0; k < max_iter; ++k) {
                        Trajectory y = picard_residual(spec, it, noise, kernels, ev);
                        double sup = residual_norm(y, spec.p);
                        if (sup <= tol) {
                            ok = true;
                            break;
                        }
                        if (!std::isfinite(sup) || sup > 1e120) break;
                        it = picard_update(spec, it, y, noise, kernels, ev);
                    }
                    if (!ok) ++bad;
                    x = std::move(it);
                }
                for (int i = 0; i < nodes; ++i) {
                    double v = std::pow(l2_norm_sq(x.states[i]), p / 2.0);
                    sp[i] += v;
                    sq[i] += v * v;
                }
            }
            block_sum[b] = std::move(sp);
            block_sq[b] = std::move(sq);
            block_bad[b] = bad;
        }
    };

    int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (nthreads < 1) nthreads = 1;
    nthreads = std::min(nthreads, blocks);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    MomentAccumulation acc;
    acc.grid = grid;
    acc.paths = path_count;
    acc.p = p;
    acc.sum_p.assign(nodes, 0.0);
    acc.sum_p_sq.assign(nodes, 0.0);
    for (int b = 0; b < blocks; ++b) {
        for (int i = 0; i < nodes; ++i) {
            acc.sum_p[i] += block_sum[b][i];
            acc.sum_p_sq[i] += block_sq[b][i];
        }
        acc.nonconverged_paths += block_bad[b];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// CSV writers.

inline std::string trajectory_csv(const Trajectory& x) {
    std::string out = "t";
    char buf[40];
    for (int n = 1; n <= static_cast<int>(x.modes()); ++n) {
        std::snprintf(buf, sizeof buf, ",mode_%d", n);
        out += buf;
    }
    out += '\n';
    for (int i = 0; i < x.grid.nodes(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", x.grid.time(i));
        out += buf;
        for (double v : x.states[i]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline std::string residual_csv(const std::vector<double>& residuals) {
    std::string out = "iteration,residual\n";
    char buf[48];
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, residuals[i]);
        out += buf;
    }
    return out;
}

}  // namespace fracsde
