#pragma once

// Scalar special functions: Gamma and the two-parameter Mittag-Leffler
// function E_{a,b}(z) = sum_k z^k / Gamma(a k + b) for real z.
//
// Evaluation strategy (switchover Z0(a) = -18^a, see ml_detail below):
//   z >= Z0(a)        long-double power series with compensated summation
//                     and cached reciprocal-gamma coefficients; the largest
//                     term is about e^{|z|^{1/a}}, so cancellation stays
//                     below ~1e-10 on this side of the switchover
//   z <  Z0(a), a > 1 Laplace-inversion representation: conjugate pole pair
//                     plus a branch-cut integral, evaluated adaptively
//   z <  Z0(a), a == 1  Kummer transformation e^z M(b-1, b, -z) / Gamma(b)
//                     down to z = -200; the algebraic asymptotic series
//                     below that (truncation error under e^{-200})
//
// Supported box: a in [1, 2], b in (0, 8], z in [-1e6, 100]. Outside it an
// unsupported_range_error is thrown; no silent extrapolation.

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace fracsde {

struct MLParams {
    double alpha;
    double beta;
};

// Gamma(x) for x > 0.
inline double gamma_fn(double x) {
    if (!(x > 0.0)) {
        throw domain_error("gamma_fn: argument must be positive, got " + std::to_string(x));
    }
    return std::tgamma(x);
}

namespace ml_detail {

inline constexpr long double kPi = 3.14159265358979323846264338327950288L;

// Series / continuation switchover. The largest series term at z < 0 has
// magnitude about e^R with R = |z|^{1/alpha}, so summing in long double
// (64-bit mantissa, ~e^44 headroom) keeps the cancellation error below
// ~1e-10 as long as R <= 18. That gives an alpha-dependent floor of -18^alpha.
inline double series_floor(double a) { return -std::pow(18.0, a); }

// 1/Gamma(x), entire in x; reflection below 1/2 keeps it finite at poles.
inline long double recip_gamma(long double x) {
    if (x >= 0.5L) {
        long double g = tgammal(x);
        return std::isinf(g) ? 0.0L : 1.0L / g;
    }
    // 1/Gamma(x) = Gamma(1-x) sin(pi x) / pi with sin reduced mod 2
    long double fl = floorl(x);
    long double r = x - fl;
    long double s = sinl(kPi * r);
    if (fmodl(fl, 2.0L) != 0.0L) s = -s;
    long double g1 = tgammal(1.0L - x);
    if (std::isinf(g1)) return 0.0L;  // |x| so large the reciprocal underflows
    return g1 * s / kPi;
}

// Reciprocal-gamma series coefficients 1/Gamma(a k + b), cached per (a, b);
// inner solver loops evaluate the same parameter pair at thousands of
// arguments, and the gamma calls dominate the series cost otherwise.
inline const std::vector<long double>& series_coefficients(long double a, long double b) {
    thread_local std::map<std::pair<long double, long double>, std::vector<long double>> cache;
    auto key = std::make_pair(a, b);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<long double> c(640);
    for (std::size_t k = 0; k < c.size(); ++k) {
        long double g = tgammal(a * static_cast<long double>(k) + b);
        c[k] = std::isinf(g) ? 0.0L : 1.0L / g;
    }
    return cache.emplace(key, std::move(c)).first->second;
}

// Power series with Kahan summation; valid wherever cancellation allows
// (callers restrict to z >= series_floor(a), z <= 100).
inline double ml_series(double a, double b, double z) {
    const std::vector<long double>& coeff = series_coefficients(a, b);
    long double sum = 0.0L, comp = 0.0L;
    long double zk = 1.0L;
    long double la = a, lb = b, lz = z;
    long double peak = 0.0L;
    for (std::size_t k = 0; k < coeff.size(); ++k) {
        long double term = zk * coeff[k];
        long double y = term - comp;
        long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        long double mag = fabsl(term);
        if (mag > peak) peak = mag;
        if (k > 2 && mag < 1e-24L * (fabsl(sum) + 1.0L) && mag <= peak) {
            if (la * k + lb > fabsl(lz) || mag == 0.0L) break;
        }
        zk *= lz;
    }
    return static_cast<double>(sum);
}

// Adaptive Simpson on [lo, hi] to absolute tolerance tol.
template <class F>
double simpson_rec(const F& f, double lo, double mid, double hi, double flo, double fmid,
                   double fhi, double whole, double tol, int depth) {
    double lm = 0.5 * (lo + mid), mh = 0.5 * (mid + hi);
    double flm = f(lm), fmh = f(mh);
    double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    double right = (hi - mid) / 6.0 * (fmid + 4.0 * fmh + fhi);
    double err = left + right - whole;
    if (depth <= 0 || std::fabs(err) < 15.0 * tol) {
        return left + right + err / 15.0;
    }
    return simpson_rec(f, lo, lm, mid, flo, flm, fmid, left, tol * 0.5, depth - 1) +
           simpson_rec(f, mid, mh, hi, fmid, fmh, fhi, right, tol * 0.5, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double lo, double hi, double tol) {
    double mid = 0.5 * (lo + hi);
    double flo = f(lo), fmid = f(mid), fhi = f(hi);
    double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    return simpson_rec(f, lo, mid, hi, flo, fmid, fhi, whole, tol, 40);
}

// Pole pair + branch-cut integral for a in (1,2], z <= -20.
// Requires b <= a + 1/2 so the cut integrand is integrable at 0; callers
// reduce larger b with the recurrence first.
inline double ml_pole_cut(double a, double b, double z) {
    const double x = -z;
    // conjugate poles s0 = x^{1/a} e^{+-i pi/a}; residue pair (2/a) Re[s0^{1-b} e^{s0}]
    const double rad = std::pow(x, 1.0 / a);
    const double re0 = rad * std::cos(M_PI / a);
    const double im0 = rad * std::sin(M_PI / a);
    const double ex = (1.0 - b) * std::log(x) / a + re0;
    const double an = (1.0 - b) * M_PI / a + im0;
    double pole = 0.0;
    if (ex > -700.0) pole = (2.0 / a) * std::exp(ex) * std::cos(an);

    // cut integral, substituted r = u^2 to remove the endpoint singularity:
    // (2/pi) int_0^U e^{-u^2} u^{2(a-b)+1} [u^{2a} sin(pi b) - x sin(pi(a-b))]
    //                 / (u^{4a} + 2 x u^{2a} cos(pi a) + x^2) du
    const double sb = std::sin(M_PI * b);
    const double sab = std::sin(M_PI * (a - b));
    const double ca = std::cos(M_PI * a);
    const double pw = 2.0 * (a - b) + 1.0;
    auto integrand = [&](double u) -> double {
        if (u <= 0.0) return pw > 0.0 ? 0.0 : (pw == 0.0 ? -sab / x : 0.0);
        double ua = std::pow(u, 2.0 * a);
        double den = ua * ua + 2.0 * x * ua * ca + x * x;
        double num = ua * sb - x * sab;
        return std::exp(-u * u) * std::pow(u, pw) * num / den;
    };
    double cut = (2.0 / M_PI) * adaptive_simpson(integrand, 0.0, 8.0, 5e-13);
    return pole + cut;
}

// a == 1, moderate negative z: E_{1,b}(z) = e^z M(b-1, b, -z) / Gamma(b)
// (Kummer transformation). For b in (0,8] the Kummer series over x = -z > 0
// has at most one sign change (all Pochhammer factors past the first are
// positive), so there is no catastrophic cancellation; the only size limit
// is M ~ e^x, kept inside long-double range by restricting to x <= 200.
inline double ml_kummer_a1(double b, double z) {
    const long double x = -(long double)z;
    const long double a = (long double)b - 1.0L;
    long double term = 1.0L, sum = 1.0L, comp = 0.0L;
    for (int k = 1; k < 1200; ++k) {
        term *= (a + (k - 1)) / ((long double)b + (k - 1)) * x / k;
        long double y = term - comp;
        long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if (k > x && fabsl(term) < 1e-24L * (fabsl(sum) + 1.0L)) break;
    }
    return static_cast<double>(expl((long double)z) * sum * recip_gamma((long double)b));
}

// Asymptotic algebraic series for a == 1, z < -200:
//   E_{1,b}(z) ~ -sum_{k>=1} z^{-k}/Gamma(b-k),
// truncated where the smooth term envelope bottoms out (error ~ e^{-|z|}).
// When b is an integer the omitted exponential part is exactly e^z z^{1-b}.
inline double ml_asymptotic_a1(double b, double z) {
    long double sum = 0.0L;
    long double lz = z;
    long double zik = 1.0L;
    long double prev_env = std::numeric_limits<long double>::max();
    for (int k = 1; k < 400; ++k) {
        zik /= lz;
        long double g = b - k;
        long double env = fabsl(zik) * (g >= 0.5L ? recip_gamma(g) : tgammal(1.0L - g) / kPi);
        if (env > prev_env || std::isinf(env)) break;
        sum -= zik * recip_gamma(g);
        prev_env = env;
        if (env < 1e-30L) break;
    }
    double bi = std::round(b);
    if (std::fabs(b - bi) < 1e-12 && z > -700.0) {
        sum += expl((long double)z) * powl((long double)z, 1.0L - (long double)bi);
    }
    return static_cast<double>(sum);
}

inline double ml_dispatch(double a, double b, double z);

// z <= -20 continuation with the b-reduction recurrence
// E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z applied until b <= a + 1/2.
inline double ml_large_negative(double a, double b, double z) {
    if (a == 1.0) {
        if (z >= -200.0) return ml_kummer_a1(b, z);
        // reduction keeps b <= 1.5 so the integer-b correction stays sharp
        if (b > 1.5) {
            return (ml_large_negative(a, b - 1.0, z) - static_cast<double>(recip_gamma(b - 1.0))) / z;
        }
        return ml_asymptotic_a1(b, z);
    }
    if (b > a + 0.5) {
        return (ml_large_negative(a, b - a, z) - static_cast<double>(recip_gamma(b - a))) / z;
    }
    return ml_pole_cut(a, b, z);
}

inline double ml_dispatch(double a, double b, double z) {
    if (z == 0.0) return static_cast<double>(recip_gamma(b));
    if (z >= series_floor(a)) return ml_series(a, b, z);
    return ml_large_negative(a, b, z);
}

}  // namespace ml_detail

// E_{alpha,beta}(z). Supported: alpha in [1,2], beta in (0,8], z in [-1e6,100].
inline double mittag_leffler(const MLParams& p, double z) {
    if (!(p.alpha >= 1.0 && p.alpha <= 2.0)) {
        throw unsupported_range_error("mittag_leffler: alpha must lie in [1, 2], got " +
                                      std::to_string(p.alpha));
    }
    if (!(p.beta > 0.0 && p.beta <= 8.0)) {
        throw unsupported_range_error("mittag_leffler: beta must lie in (0, 8], got " +
                                      std::to_string(p.beta));
    }
    if (!(z >= -1e6 && z <= 100.0)) {
        throw unsupported_range_error("mittag_leffler: z must lie in [-1e6, 100], got " +
                                      std::to_string(z));
    }
    return ml_detail::ml_dispatch(p.alpha, p.beta, z);
}

inline double mittag_leffler(double alpha, double beta, double z) {
    return mittag_leffler(MLParams{alpha, beta}, z);
}

}  // namespace fracsde
