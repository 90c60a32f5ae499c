#pragma once

// Monte Carlo moment estimation, exponential decay fitting, and the
// end-to-end stability verification report: closed-form criterion, decay
// envelope certification, and empirical moment-curve cross checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "mild_solver.hpp"
#include "problem_model.hpp"

namespace fracsde {

// ---------------------------------------------------------------------------
// Moment curves.

struct MomentCurve {
    TimeGrid grid{1.0, 1};
    double p = 2.0;
    int paths = 0;
    std::vector<double> mean;     // estimated E ||x(t)||^p per node
    std::vector<double> std_err;  // standard error of that mean per node
    std::vector<double> ci_low;   // normal confidence band, clamped at 0
    std::vector<double> ci_high;
    double confidence = 0.95;
    int nonconverged_paths = 0;
};

// Standard normal quantile via Newton iteration on the erfc-based CDF.
inline double normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) {
        std::ostringstream os;
        os << "normal_quantile: probability " << q << " must lie in (0, 1)";
        throw domain_error(os.str());
    }
    const double sqrt2 = std::sqrt(2.0);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * static_cast<double>(ml_detail::kPi));
    double x = 0.0;
    for (int it = 0; it < 200; ++it) {
        double cdf = 0.5 * std::erfc(-x / sqrt2);
        double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        double step = (cdf - q) / std::max(pdf, 1e-300);
        step = std::clamp(step, -1.0, 1.0);
        x -= step;
        if (std::abs(step) < 1e-14) break;
    }
    return x;
}

// Turns accumulated p-th moment sums into a mean curve with a normal
// confidence band. Identical paths give a zero-width band; the lower band is
// clamped at zero because the estimated quantity is nonnegative.
inline MomentCurve estimate_moment(const MomentAccumulation& acc, double confidence = 0.95) {
    if (acc.paths < 1) throw domain_error("estimate_moment: needs at least one path");
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw domain_error("estimate_moment: confidence must lie in (0, 1)");
    }
    const double n = static_cast<double>(acc.paths);
    const double z = normal_quantile(0.5 + 0.5 * confidence);
    MomentCurve c;
    c.grid = acc.grid;
    c.p = acc.p;
    c.paths = acc.paths;
    c.confidence = confidence;
    c.nonconverged_paths = acc.nonconverged_paths;
    std::size_t nodes = acc.sum_p.size();
    c.mean.resize(nodes);
    c.std_err.resize(nodes);
    c.ci_low.resize(nodes);
    c.ci_high.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        double mean = acc.sum_p[i] / n;
        double var = 0.0;
        if (acc.paths > 1) {
            var = (acc.sum_p_sq[i] - n * mean * mean) / (n - 1.0);
            var = std::max(var, 0.0);
        }
        double se = std::sqrt(var / n);
        c.mean[i] = mean;
        c.std_err[i] = se;
        c.ci_low[i] = std::max(0.0, mean - z * se);
        c.ci_high[i] = mean + z * se;
    }
    return c;
}

// Moment curve from explicitly stored sample paths.
inline MomentCurve estimate_moment(const std::vector<Trajectory>& paths, double p,
                                   double confidence = 0.95) {
    if (paths.empty()) throw domain_error("estimate_moment: needs at least one path");
    if (!(p >= 1.0)) throw domain_error("estimate_moment: moment order p must be >= 1");
    const TimeGrid& grid = paths.front().grid;
    std::size_t nodes = paths.front().states.size();
    MomentAccumulation acc;
    acc.grid = grid;
    acc.paths = static_cast<int>(paths.size());
    acc.p = p;
    acc.sum_p.assign(nodes, 0.0);
    acc.sum_p_sq.assign(nodes, 0.0);
    for (const Trajectory& x : paths) {
        if (!same_grid(x.grid, grid) || x.states.size() != nodes) {
            throw domain_error("estimate_moment: sample paths live on different grids");
        }
        for (std::size_t i = 0; i < nodes; ++i) {
            double v = std::pow(l2_norm_sq(x.states[i]), p / 2.0);
            acc.sum_p[i] += v;
            acc.sum_p_sq[i] += v * v;
        }
    }
    return estimate_moment(acc, confidence);
}

// Convenience wrapper: simulate an ensemble and estimate its moment curve.
inline MomentCurve estimate_moment(const ProblemSpec& spec, const TimeGrid& grid, int path_count,
                                   std::uint64_t master_seed, int threads = 0,
                                   SolveMethod method = SolveMethod::automatic,
                                   double confidence = 0.95) {
    MomentAccumulation acc = simulate_ensemble(spec, grid, path_count, master_seed, threads, method);
    return estimate_moment(acc, confidence);
}

// CSV writer for moment curves: header plus one line per node, full
// round-trip precision, dot decimal separator, LF line endings.
inline std::string moment_csv(const MomentCurve& c) {
    std::string out = "t,mean,ci_low,ci_high\n";
    char buf[256];
    for (std::size_t i = 0; i < c.mean.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", c.grid.time(i), c.mean[i],
                      c.ci_low[i], c.ci_high[i]);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exponential decay fitting.

struct DecayFit {
    double mu_hat = 0.0;    // fitted decay rate, clamped at 0
    double n_hat = 1.0;     // fitted amplitude
    double rate_raw = 0.0;  // unclamped least-squares rate; negative means growth
    double r_squared = 0.0;
    double mu_se = 0.0;        // standard error of the rate estimate
    double mu_ci_low = 0.0;    // confidence interval on the raw rate
    double mu_ci_high = 0.0;
    int points = 0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double confidence = 0.95;
};

// Least-squares fit of log(values) against times, interpreted as the
// envelope values ~ n_hat * exp(-mu_hat * t). Requires at least three
// strictly positive points.
inline DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& values,
                          double confidence = 0.95) {
    if (times.size() != values.size()) {
        throw domain_error("fit_decay: times and values have different lengths");
    }
    std::size_t n = times.size();
    if (n < 3) {
        std::ostringstream os;
        os << "fit_decay: needs at least 3 points, got " << n;
        throw fit_domain_error(os.str());
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw domain_error("fit_decay: confidence must lie in (0, 1)");
    }
    std::vector<double> logv(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(values[i] > 0.0)) {
            std::ostringstream os;
            os << "fit_decay: value " << values[i] << " at index " << i
               << " is not positive; cannot fit an exponential";
            throw fit_domain_error(os.str());
        }
        logv[i] = std::log(values[i]);
    }

    double tbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tbar += times[i];
        ybar += logv[i];
    }
    tbar /= static_cast<double>(n);
    ybar /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dt = times[i] - tbar;
        sxx += dt * dt;
        sxy += dt * (logv[i] - ybar);
    }
    if (!(sxx > 0.0)) {
        throw fit_domain_error("fit_decay: all sample times coincide; the rate is not identifiable");
    }
    double slope = sxy / sxx;
    double intercept = ybar - slope * tbar;

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double model = intercept + slope * times[i];
        ss_res += (logv[i] - model) * (logv[i] - model);
        ss_tot += (logv[i] - ybar) * (logv[i] - ybar);
    }

    DecayFit fit;
    fit.rate_raw = -slope;
    fit.mu_hat = std::max(0.0, fit.rate_raw);
    fit.n_hat = std::exp(intercept);
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    double resid_var = n > 2 ? ss_res / static_cast<double>(n - 2) : 0.0;
    fit.mu_se = std::sqrt(std::max(resid_var, 0.0) / sxx);
    double z = normal_quantile(0.5 + 0.5 * confidence);
    fit.mu_ci_low = fit.rate_raw - z * fit.mu_se;
    fit.mu_ci_high = fit.rate_raw + z * fit.mu_se;
    fit.points = static_cast<int>(n);
    fit.t_lo = *std::min_element(times.begin(), times.end());
    fit.t_hi = *std::max_element(times.begin(), times.end());
    fit.confidence = confidence;
    return fit;
}

// Fits the mean moment curve restricted to nodes with t in [t_lo, t_hi].
inline DecayFit fit_decay(const MomentCurve& curve, double t_lo, double t_hi,
                          double confidence = 0.95) {
    std::vector<double> ts, vs;
    for (std::size_t i = 0; i < curve.mean.size(); ++i) {
        double t = curve.grid.time(i);
        if (t >= t_lo && t <= t_hi) {
            ts.push_back(t);
            vs.push_back(curve.mean[i]);
        }
    }
    if (ts.size() < 3) {
        std::ostringstream os;
        os << "fit_decay: window [" << t_lo << ", " << t_hi << "] holds " << ts.size()
           << " nodes; needs at least 3";
        throw fit_domain_error(os.str());
    }
    DecayFit fit = fit_decay(ts, vs, confidence);
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    return fit;
}

// ---------------------------------------------------------------------------
// End-to-end stability verification.

struct StabilityReport {
    CriterionResult criterion;  // closed-form moment-stability check
    bool advisory = false;      // criterion failed; everything below is advisory only
    double a1_hat = 0.0;        // envelope mass of the history block (neutral terms)
    double a2_hat = 0.0;        // envelope mass of the convolution block (drift/diffusion/jumps)
    UniquenessConstants uniqueness;
    InequalityParams envelope;   // decay-inequality data assembled from the constants
    bool envelope_built = false; // false when the family bounds certify no decay
    bool certified = false;      // a decay root exists for the envelope
    double mu_certified = 0.0;   // certified decay rate of E ||x||^p
    double n_certified = 0.0;    // certified envelope amplitude
    MomentCurve moments;
    DecayFit fit;  // empirical decay fit of the mean curve on the tail window
    bool fitted = false;
    double fit_t_lo = 0.0;
    double fit_t_hi = 0.0;
    bool empirical_decay = false;  // fitted rate confidence interval excludes 0
    bool envelope_checked = false;
    bool envelope_holds = false;  // mean - 3 se <= N e^{-mu t} on the window
    std::string note;
};

namespace stability_detail {

inline void append_note(std::string& note, const std::string& extra) {
    if (extra.empty()) return;
    if (!note.empty()) note += "; ";
    note += extra;
}

}  // namespace stability_detail

// Runs the full verification pipeline: evaluates the closed-form stability
// criterion, assembles the exponential decay envelope implied by its
// constants, simulates a Monte Carlo ensemble, fits the empirical moment
// decay on a tail window, and checks the certified envelope against the
// empirical band. Never throws on negative findings; they land in the
// report flags and note.
inline StabilityReport verify_stability(const ProblemSpec& spec, const TimeGrid& grid,
                                        int path_count, std::uint64_t master_seed,
                                        int threads = 0, double confidence = 0.95,
                                        double fit_window_start = -1.0,
                                        const CriterionOptions& opt = {}) {
    spec.validate();
    StabilityReport rep;
    rep.criterion = stability_criterion(spec, opt);
    rep.advisory = !rep.criterion.pass;
    rep.a1_hat = rep.criterion.addends[0] + rep.criterion.addends[1];
    rep.a2_hat = rep.criterion.addends[2] + rep.criterion.addends[3] + rep.criterion.addends[4];
    rep.uniqueness = uniqueness_constants(spec, opt);
    if (rep.advisory) {
        stability_detail::append_note(
            rep.note, "closed-form criterion fails; Monte Carlo results are advisory only");
    }

    // Envelope data. The initial blocks decay with the fitted family rates;
    // the history and convolution blocks carry the criterion addends. The
    // time variable inside the first two criterion addends is evaluated at
    // t_eval; the underlying estimate does not pin this instant, so the
    // certified envelope is parameterized by that choice.
    const FamilyBounds& fb = spec.bounds;
    bool have_rates = fb.exponential_decay && fb.a1 > 0.0 && fb.a2 > 0.0 && fb.D1 > 0.0 &&
                      fb.D2 > 0.0;
    if (!have_rates) {
        stability_detail::append_note(rep.note,
                                      "family bounds certify no exponential decay; the envelope "
                                      "cannot be assembled");
        if (!fb.exponential_note.empty()) stability_detail::append_note(rep.note, fb.exponential_note);
    } else {
        const double p = spec.p;
        const double pre = std::pow(5.0, p - 1.0);
        State w0 = solver_detail::initial_neutral_offset(spec, grid);
        double w0_p = std::pow(l2_norm_sq(w0), p / 2.0);
        State eta = spec.eta;
        eta.resize(static_cast<std::size_t>(spec.modes()), 0.0);
        double eta_p = std::pow(l2_norm_sq(eta), p / 2.0);

        InequalityParams prm;
        prm.eta1 = p * fb.a1;
        prm.eta2 = p * fb.a2;
        prm.theta_delay = spec.delay;
        prm.xi[0] = pre * std::pow(fb.D1, p) * w0_p;
        prm.xi[1] = pre * std::pow(fb.D2, p) * eta_p;
        prm.xi[2] = rep.a1_hat;            // history block, proportional to the running sup
        prm.xi[3] = 0.0;                   // no convolution against the first rate
        prm.xi[4] = rep.a2_hat * prm.eta2; // convolution block against the second rate
        prm.xi[5] = 0.0;
        prm.xi[6] = 0.0;
        rep.envelope = prm;
        rep.envelope_built = true;
        stability_detail::append_note(rep.note,
                                      "envelope constants evaluate the time variable at t_eval = " +
                                          [&] {
                                              std::ostringstream os;
                                              os << spec.t_eval;
                                              return os.str();
                                          }() +
                                          "; the decay estimate leaves this instant free");

        if (prm.xi[2] == 0.0 && prm.xi[4] == 0.0) {
            // noise-free envelope: only the initial blocks remain
            rep.certified = true;
            rep.mu_certified = std::min(prm.eta1, prm.eta2);
            rep.n_certified = prm.xi[0] + prm.xi[1];
        } else if (decay_margin(prm) < 1.0) {
            try {
                DecayRootResult root = decay_root(prm);
                rep.mu_certified = root.mu;
                rep.n_certified = n_epsilon(prm, root.mu);
                rep.certified = true;
            } catch (const error& e) {
                stability_detail::append_note(rep.note, std::string("decay root failed: ") + e.what());
            }
        } else {
            std::ostringstream os;
            os << "decay margin " << decay_margin(prm) << " is not below 1; no certified envelope";
            stability_detail::append_note(rep.note, os.str());
        }
    }

    // Monte Carlo moments and the empirical decay fit.
    MomentAccumulation acc = simulate_ensemble(spec, grid, path_count, master_seed, threads);
    rep.moments = estimate_moment(acc, confidence);
    if (acc.nonconverged_paths > 0) {
        std::ostringstream os;
        os << acc.nonconverged_paths << " of " << path_count
           << " paths missed the iteration tolerance";
        stability_detail::append_note(rep.note, os.str());
    }

    rep.fit_t_lo = fit_window_start >= 0.0 ? fit_window_start : 0.2 * grid.horizon();
    rep.fit_t_hi = grid.horizon();
    try {
        rep.fit = fit_decay(rep.moments, rep.fit_t_lo, rep.fit_t_hi, confidence);
        rep.fitted = true;
        rep.empirical_decay = rep.fit.mu_ci_low > 0.0;
    } catch (const error& e) {
        stability_detail::append_note(rep.note, std::string("decay fit failed: ") + e.what());
    }

    if (rep.certified) {
        rep.envelope_checked = true;
        rep.envelope_holds = true;
        for (std::size_t i = 0; i < rep.moments.mean.size(); ++i) {
            double t = grid.time(i);
            if (t < rep.fit_t_lo) continue;
            double bound = rep.n_certified * std::exp(-rep.mu_certified * t);
            double lower = rep.moments.mean[i] - 3.0 * rep.moments.std_err[i];
            if (lower > bound + 1e-12) {
                rep.envelope_holds = false;
                std::ostringstream os;
                os << "envelope violated at t = " << t << ": lower band " << lower
                   << " exceeds bound " << bound;
                stability_detail::append_note(rep.note, os.str());
                break;
            }
        }
    }
    return rep;
}

}  // namespace fracsde
