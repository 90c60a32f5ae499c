#pragma once

// Closed-form solvability and moment-stability criteria, plus the
// exponential-decay inequality machinery (decay-rate root and envelope
// amplitude) used to convert fitted constants into a decay certificate.
//
// Every criterion value is reported together with its itemized addends; the
// addends carry the common 5^{p-1} prefactor and sum exactly (left to right)
// to the reported theta.

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "problem_model.hpp"

namespace fracsde {

// Moment constant of the martingale maximal inequality, (p(p-1)/2)^{p/2}.
inline double burkholder_constant(double p) {
    if (!(p >= 2.0)) {
        std::ostringstream os;
        os << "burkholder_constant: moment order must be >= 2, got " << p;
        throw domain_error(os.str());
    }
    return std::pow(p * (p - 1.0) / 2.0, p / 2.0);
}

// Previously reported values of the two criteria for the reference parameter
// set behind example_problem(). Their arithmetic is not reproducible term by
// term from the printed displays, so reports carry the deviation from these
// numbers instead of asserting agreement with them.
inline constexpr double kReportedExistenceValue = 0.007436;
inline constexpr double kReportedStabilityValue = 0.00874;

struct CriterionOptions {
    // true: use the operator-norm value carried in bounds.inv_power_norm
    // (which may be an override); false: use the diagonal computed value
    bool use_overridden_norm = true;
    // at p = 2 the tail factor (2 a2 (p-1)/(p-2))^{1-p/2} is an indeterminate
    // form with limit 1; true adopts that limit, false refuses to evaluate
    bool p2_limit_convention = true;
};

struct CriterionResult {
    double theta = 0.0;
    bool pass = false;  // theta < 1
    // itemized addends in display order, 5^{p-1} prefactor included;
    // existence: {neutral norm, neutral integral, jump, drift, diffusion};
    // stability: {neutral norm, neutral integral, drift, diffusion, jump}
    std::array<double, 5> addends{};
    double prefactor = 1.0;       // 5^{p-1}
    double burkholder = 1.0;      // C_p used
    double inv_power_norm = 1.0;  // operator-norm value used
    std::string inv_norm_source;
    double tail_factor = 1.0;  // stability only
    bool p2_convention_applied = false;
    std::string note;
};

namespace criteria_detail {

// shared first two addends: the neutral-coefficient norm term and the
// neutral convolution term
inline void neutral_addends(const ProblemSpec& spec, const CriterionOptions& opt,
                            CriterionResult& r) {
    const double p = spec.p;
    const FamilyBounds& b = spec.bounds;
    r.prefactor = std::pow(5.0, p - 1.0);
    r.burkholder = burkholder_constant(p);
    r.inv_power_norm = opt.use_overridden_norm ? b.inv_power_norm : spec.inv_power_norm_computed;
    r.inv_norm_source = opt.use_overridden_norm ? b.inv_norm_source : "computed";
    const double a1h = spec.coefficients.a_hat[0];
    const double iota = spec.t_eval;
    const double pam = p * spec.alpha * b.mu_smoothing;
    r.addends[0] = r.prefactor * std::pow(r.inv_power_norm, p) * std::pow(a1h, p);
    r.addends[1] = r.prefactor * std::pow(spec.alpha, p) * std::pow(b.c_mu, p) *
                   std::pow(a1h, p) * std::pow(std::pow(iota, pam) / pam, p);
}

inline void finish(CriterionResult& r) {
    r.theta = ((r.addends[0] + r.addends[1]) + r.addends[2]) + r.addends[3];
    r.theta += r.addends[4];
    r.pass = r.theta < 1.0;
}

}  // namespace criteria_detail

// Contraction constant of the successive-approximation map on [0, t_eval].
// A value below one certifies a unique mild solution reachable by the
// iteration.
inline CriterionResult existence_criterion(const ProblemSpec& spec,
                                           const CriterionOptions& opt = {}) {
    spec.validate();
    CriterionResult r;
    criteria_detail::neutral_addends(spec, opt, r);
    const double p = spec.p;
    const double iota = spec.t_eval;
    const double M = spec.bounds.M;
    const auto& ah = spec.coefficients.a_hat;
    r.addends[2] = r.prefactor * spec.k_p * std::pow(M, p) *
                   (std::pow(std::pow(iota, 3) / 3.0, p / 2.0) * std::pow(ah[3], p) +
                    std::sqrt(std::pow(iota, 2.0 * p + 1.0) / (2.0 * p + 1.0)) * std::pow(ah[4], p));
    r.addends[3] = r.prefactor * std::pow(M, p) * std::pow(iota, p - 1.0) * std::pow(ah[1], p);
    r.addends[4] =
        r.prefactor * r.burkholder * std::pow(M, p) * std::pow(iota, p / 2.0 - 1.0) * std::pow(ah[2], p);
    criteria_detail::finish(r);
    return r;
}

// Moment-stability constant built from the exponential family bounds
// (D2, a2). A value below one, combined with genuinely decaying families,
// certifies p-th moment exponential decay.
inline CriterionResult stability_criterion(const ProblemSpec& spec,
                                           const CriterionOptions& opt = {}) {
    spec.validate();
    CriterionResult r;
    criteria_detail::neutral_addends(spec, opt, r);
    const double p = spec.p;
    const FamilyBounds& b = spec.bounds;
    const auto& ah = spec.coefficients.a_hat;
    if (p == 2.0) {
        if (!opt.p2_limit_convention) {
            throw singular_exponent_error(
                "stability_criterion: tail factor exponent vanishes at p = 2; enable the limit "
                "convention to evaluate");
        }
        r.tail_factor = 1.0;
        r.p2_convention_applied = true;
    } else {
        r.tail_factor = std::pow(2.0 * b.a2 * (p - 1.0) / (p - 2.0), 1.0 - p / 2.0);
    }
    r.addends[2] =
        r.prefactor * std::pow(b.D2, p) * std::pow(b.a2, p - 1.0) * std::pow(ah[1], p);
    r.addends[3] = r.prefactor * r.burkholder * std::pow(b.D2, p) * r.tail_factor * std::pow(ah[2], p);
    r.addends[4] = r.prefactor * spec.k_p * std::pow(b.D2, p) *
                   (std::pow(ah[3], p / 2.0) + std::pow(ah[4], p)) * r.tail_factor;
    criteria_detail::finish(r);
    if (!b.exponential_decay) {
        r.note =
            "family bounds report no uniform exponential decay; the stability constant is formal";
    }
    return r;
}

// Gronwall constants of the uniqueness argument: the difference of two mild
// solutions satisfies
//   E||d(t)||^p <= oplus1 E||d(t)||^p + oplus2 int_0^t (t-s) E||d(s)||^p ds,
// which forces d = 0 whenever oplus1 < 1.
struct UniquenessConstants {
    double oplus1 = 0.0;  // instantaneous part: neutral + jump addends
    double oplus2 = 0.0;  // convolution part: drift + diffusion addends
    bool applicable = false;  // oplus1 < 1
    double gronwall_rate = 0.0;  // oplus2 / (1 - oplus1) when applicable
};

inline UniquenessConstants uniqueness_constants(const ProblemSpec& spec,
                                                const CriterionOptions& opt = {}) {
    CriterionResult e = existence_criterion(spec, opt);
    UniquenessConstants u;
    u.oplus1 = (e.addends[0] + e.addends[1]) + e.addends[2];
    u.oplus2 = e.addends[3] + e.addends[4];
    u.applicable = u.oplus1 < 1.0;
    u.gronwall_rate =
        u.applicable ? u.oplus2 / (1.0 - u.oplus1) : std::numeric_limits<double>::infinity();
    return u;
}

// ---------------------------------------------------------------------------
// Exponential-decay inequality machinery. A nonnegative function dominated by
//   xi1 e^{-eta1 t} + xi2 e^{-eta2 t} + xi3 sup_theta Psi(t + theta)
//   + (xi4 + xi6) int_0^t e^{-eta1 (t-s)} sup_theta Psi(s + theta) ds
//   + (xi5 + xi7) int_0^t e^{-eta2 (t-s)} sup_theta Psi(s + theta) ds
// decays like N e^{-mu t} once the coefficient mass is subcritical; mu is the
// root of the scalar equation below and N the matching amplitude.

struct InequalityParams {
    // xi[0..6] correspond to the seven coefficients xi_1 .. xi_7
    std::array<double, 7> xi{};
    double eta1 = 1.0;
    double eta2 = 1.0;
    double theta_delay = 0.0;  // history-window length entering e^{mu theta}

    void validate() const {
        for (double v : xi) {
            if (!(v >= 0.0)) throw domain_error("InequalityParams: coefficients must be >= 0");
        }
        if (!(eta1 > 0.0) || !(eta2 > 0.0)) {
            throw domain_error("InequalityParams: decay rates eta1, eta2 must be > 0");
        }
        if (!(theta_delay >= 0.0)) {
            throw domain_error("InequalityParams: theta_delay must be >= 0");
        }
    }
};

// Subcritical-mass expression; values below one admit an exponential envelope.
inline double decay_margin(const InequalityParams& p) {
    return p.xi[2] + p.xi[3] / p.eta1 + p.xi[4] / p.eta2;
}

struct DecayRootResult {
    double mu = 0.0;
    double residual = 0.0;  // |F(mu)| at the returned root
    int iterations = 0;
};

namespace decay_detail {

inline double root_function(const InequalityParams& p, double mu) {
    double e = std::exp(-mu * p.theta_delay);
    double v = p.xi[2] * e;
    if (p.xi[3] > 0.0) v += p.xi[3] * e / (p.eta1 - mu);
    if (p.xi[4] > 0.0) v += p.xi[4] * e / (p.eta2 - mu);
    return v - 1.0;
}

inline double root_derivative(const InequalityParams& p, double mu) {
    double e = std::exp(-mu * p.theta_delay);
    double th = p.theta_delay;
    double d = -th * p.xi[2] * e;
    if (p.xi[3] > 0.0) {
        double den = p.eta1 - mu;
        d += p.xi[3] * e * (1.0 / (den * den) - th / den);
    }
    if (p.xi[4] > 0.0) {
        double den = p.eta2 - mu;
        d += p.xi[4] * e * (1.0 / (den * den) - th / den);
    }
    return d;
}

}  // namespace decay_detail

// Solves xi3 e^{-mu theta} + xi4 e^{-mu theta}/(eta1 - mu)
//        + xi5 e^{-mu theta}/(eta2 - mu) = 1 for mu.
// The admissible interval is capped by eta1 (resp. eta2) only when that decay
// channel is present, i.e. when its kernel carries a nonzero coefficient in
// the inequality (xi4 or xi6; xi5 or xi7). Throws no_root_error when the
// coefficient mass is supercritical or the equation has no admissible root.
inline DecayRootResult decay_root(const InequalityParams& prm) {
    prm.validate();
    double margin = decay_margin(prm);
    if (!(margin < 1.0)) {
        std::ostringstream os;
        os << "decay_root: coefficient mass xi3 + xi4/eta1 + xi5/eta2 = " << margin
           << " is not below 1; no exponential envelope exists";
        throw no_root_error(os.str());
    }
    double upper = std::numeric_limits<double>::infinity();
    if (prm.xi[3] > 0.0 || prm.xi[5] > 0.0) upper = std::min(upper, prm.eta1);
    if (prm.xi[4] > 0.0 || prm.xi[6] > 0.0) upper = std::min(upper, prm.eta2);
    if (!std::isfinite(upper)) {
        // only the instantaneous channel is active: xi3 e^{-mu theta} stays
        // below its mu = 0 value, which is already below one
        throw no_root_error(
            "decay_root: no integral decay channel is active and the instantaneous coefficient is "
            "below 1; the root equation has no solution");
    }

    // locate a sign change approaching the admissible upper end
    double lo = 0.0;  // F(0) = margin - 1 < 0
    double hi = -1.0;
    for (int k = 1; k <= 64; ++k) {
        double cand = upper * (1.0 - std::pow(2.0, -k));
        if (decay_detail::root_function(prm, cand) > 0.0) {
            hi = cand;
            break;
        }
        lo = cand;
    }
    if (hi < 0.0) {
        throw no_root_error(
            "decay_root: the root function stays below 1 on the admissible interval");
    }

    DecayRootResult out;
    double mu = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mu = 0.5 * (lo + hi);
        double v = decay_detail::root_function(prm, mu);
        ++out.iterations;
        if (v > 0.0) {
            hi = mu;
        } else {
            lo = mu;
        }
        if (hi - lo < 1e-15 * (1.0 + hi)) break;
    }
    // Newton polish from the bisection midpoint
    mu = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
        double v = decay_detail::root_function(prm, mu);
        double d = decay_detail::root_derivative(prm, mu);
        if (d == 0.0) break;
        double next = mu - v / d;
        if (!(next > 0.0 && next < upper)) break;
        mu = next;
        ++out.iterations;
        if (std::fabs(v) < 1e-14) break;
    }
    out.mu = mu;
    out.residual = std::fabs(decay_detail::root_function(prm, mu));
    return out;
}

// Envelope amplitude matching the decay root:
//   N = max{ xi1 + xi2, (eta1 - mu)/(xi4 e^{mu theta} - xi6),
//            (eta2 - mu)/(xi5 e^{mu theta} - xi7) },
// where a channel term is skipped entirely when both of its coefficients
// vanish, and a present channel whose denominator is exactly zero is a
// degenerate configuration.
inline double n_epsilon(const InequalityParams& prm, double mu) {
    prm.validate();
    if (!(mu > 0.0)) throw domain_error("n_epsilon: mu must be > 0");
    double best = prm.xi[0] + prm.xi[1];
    double e = std::exp(mu * prm.theta_delay);
    if (prm.xi[3] > 0.0 || prm.xi[5] > 0.0) {
        double den = prm.xi[3] * e - prm.xi[5];
        if (den == 0.0) {
            throw degenerate_denominator_error(
                "n_epsilon: first-channel denominator xi4 e^{mu theta} - xi6 vanishes");
        }
        best = std::max(best, (prm.eta1 - mu) / den);
    }
    if (prm.xi[4] > 0.0 || prm.xi[6] > 0.0) {
        double den = prm.xi[4] * e - prm.xi[6];
        if (den == 0.0) {
            throw degenerate_denominator_error(
                "n_epsilon: second-channel denominator xi5 e^{mu theta} - xi7 vanishes");
        }
        best = std::max(best, (prm.eta2 - mu) / den);
    }
    return best;
}

}  // namespace fracsde
