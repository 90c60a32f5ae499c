#include <doctest.h>

#include <cmath>
#include <vector>

#include "fracsde/spectral_operator.hpp"

using namespace fracsde;

TEST_SUITE("families") {

TEST_CASE("scalar families are the advertised Mittag-Leffler expressions") {
    for (double alpha : {1.2, 1.5, 1.9}) {
        for (double lambda : {-0.5, -4.0, -50.0}) {
            for (int i = 1; i <= 20; ++i) {
                double t = 0.1 * i;
                double z = lambda * std::pow(t, alpha);
                CHECK(cosine_scalar(alpha, t, lambda) ==
                      doctest::Approx(mittag_leffler(alpha, 1.0, z)).epsilon(1e-14));
                CHECK(sine_scalar(alpha, t, lambda) ==
                      doctest::Approx(t * mittag_leffler(alpha, 2.0, z)).epsilon(1e-14));
                CHECK(rl_family_scalar(alpha, t, lambda) ==
                      doctest::Approx(std::pow(t, alpha - 1.0) *
                                      mittag_leffler(alpha, alpha, z)).epsilon(1e-14));
            }
        }
    }
    CHECK(cosine_scalar(1.5, 0.0, -2.0) == 1.0);
    CHECK(sine_scalar(1.5, 0.0, -2.0) == 0.0);
    CHECK_THROWS_AS(rl_family_scalar(1.5, 0.0, -2.0), domain_error);
    CHECK_THROWS_AS(cosine_scalar(1.5, -0.1, -2.0), domain_error);
}

TEST_CASE("collapse to the classical cosine and sine at alpha = 2") {
    for (double lambda : {-1.0, -9.0, -100.0}) {
        double w = std::sqrt(-lambda);
        for (int i = 0; i <= 40; ++i) {
            double t = 0.1 * i;
            CHECK(std::abs(cosine_scalar(2.0, t, lambda) - std::cos(w * t)) <= 1e-8);
            CHECK(std::abs(sine_scalar(2.0, t, lambda) - std::sin(w * t) / w) <= 1e-8);
        }
    }
}

TEST_CASE("sine family integrates the cosine family") {
    // S(t) = int_0^t C(s) ds, checked with composite Simpson on a fine grid
    for (double alpha : {1.3, 1.7}) {
        for (double lambda : {-1.0, -10.0}) {
            double t = 1.4;
            int n = 2000;  // even
            double h = t / n;
            double acc = cosine_scalar(alpha, 0.0, lambda) + cosine_scalar(alpha, t, lambda);
            for (int i = 1; i < n; ++i) {
                acc += (i % 2 == 1 ? 4.0 : 2.0) * cosine_scalar(alpha, i * h, lambda);
            }
            acc *= h / 3.0;
            // the integrand has a t^alpha term, so Simpson converges at a
            // reduced rate; 1e-6 relative is well inside that budget
            CHECK(sine_scalar(alpha, t, lambda) == doctest::Approx(acc).epsilon(1e-6));
        }
    }
}

TEST_CASE("cosine functional equation holds in the classical limit") {
    double lambda = -4.0;
    for (double t : {0.3, 0.9}) {
        for (double s : {0.2, 0.7}) {
            double lhs = cosine_scalar(2.0, t + s, lambda) + cosine_scalar(2.0, std::abs(t - s), lambda);
            double rhs = 2.0 * cosine_scalar(2.0, t, lambda) * cosine_scalar(2.0, s, lambda);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
        }
    }
}

TEST_CASE("fractional power norm is the diagonal supremum") {
    SpectralGenerator gen = SpectralGenerator::laplacian(10);
    CHECK(frac_power_norm(gen, 0.5) == doctest::Approx(1.0));
    SpectralGenerator shifted(std::vector<double>{-4.0, -9.0, -25.0});
    CHECK(frac_power_norm(shifted, 0.5) == doctest::Approx(0.5));
    CHECK(frac_power_norm(shifted, 0.25) == doctest::Approx(std::pow(4.0, -0.25)));
    CHECK_THROWS_AS(frac_power_norm(shifted, 0.0), domain_error);
    CHECK_THROWS_AS(frac_power_norm(shifted, 1.0), domain_error);
}

TEST_CASE("estimated uniform bounds dominate the sampled norms") {
    SpectralGenerator gen = SpectralGenerator::laplacian(6);
    double alpha = 1.5, horizon = 2.0;
    FamilyBounds b = estimate_family_bounds(gen, alpha, horizon, 300);
    CHECK(b.M_c >= 1.0);
    CHECK(b.M > 0.0);
    // probe points form a subset of the estimation grid so dominance is exact
    for (int i = 0; i <= 100; ++i) {
        double t = horizon * i / 100.0;
        double cn = 0.0, sn = 0.0;
        for (double ev : gen.eigenvalues) {
            cn = std::max(cn, std::abs(cosine_scalar(alpha, t, ev)));
            sn = std::max(sn, std::abs(sine_scalar(alpha, t, ev)));
        }
        CHECK(cn <= b.M_c + 1e-9);
        if (t > 0.0) CHECK(sn <= b.M * t + 1e-6);
    }
}

TEST_CASE("exponential envelope fit dominates the samples and detects decay") {
    SpectralGenerator gen = SpectralGenerator::laplacian(8);
    double alpha = 1.5, horizon = 3.0;
    FamilyBounds b = estimate_exponential_bounds(gen, alpha, horizon, 300);
    CHECK(b.exponential_decay);
    CHECK(b.a1 > 0.0);
    CHECK(b.a2 > 0.0);
    for (int i = 0; i <= 100; ++i) {
        double t = horizon * i / 100.0;
        double cn = 0.0, sn = 0.0;
        for (double ev : gen.eigenvalues) {
            cn = std::max(cn, std::abs(cosine_scalar(alpha, t, ev)));
            sn = std::max(sn, std::abs(sine_scalar(alpha, t, ev)));
        }
        CHECK(cn <= b.D1 * std::exp(-b.a1 * t) + 1e-6);
        CHECK(sn <= b.D2 * std::exp(-b.a2 * t) + 1e-6);
    }
}

TEST_CASE("undamped classical cosine reports no exponential decay") {
    // over one full period |cos| is symmetric about the midpoint, so the
    // fitted log-slope vanishes and no decay can be claimed
    SpectralGenerator gen(std::vector<double>{-1.0});
    FamilyBounds b = estimate_exponential_bounds(gen, 2.0, 2.0 * 3.14159265358979323846, 600);
    CHECK_FALSE(b.exponential_decay);
    CHECK_FALSE(b.exponential_note.empty());
}

TEST_CASE("envelope fitter separates genuine decay from flat tails") {
    std::vector<double> times(101), flat(101), shallow(101), steep(101);
    for (int i = 0; i <= 100; ++i) {
        double t = 0.05 * i;
        times[i] = t;
        flat[i] = 1.0;
        shallow[i] = std::exp(-0.002 * t);  // 1 percent total decay: below resolution
        steep[i] = 3.0 * std::exp(-2.0 * t);
    }
    ExponentialFit f1 = fit_exponential_envelope(times, flat);
    CHECK_FALSE(f1.decays);
    CHECK(f1.a == 0.0);
    CHECK(f1.d >= 1.0);

    ExponentialFit f2 = fit_exponential_envelope(times, shallow);
    CHECK_FALSE(f2.decays);
    CHECK(f2.a == 0.0);

    ExponentialFit f3 = fit_exponential_envelope(times, steep);
    CHECK(f3.decays);
    CHECK(f3.a == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(f3.d == doctest::Approx(3.0).epsilon(1e-10));
    for (int i = 0; i <= 100; ++i) {
        CHECK(steep[i] <= f3.d * std::exp(-f3.a * times[i]) + 1e-12);
    }
}

TEST_CASE("envelope fitter rejects malformed samples") {
    CHECK_THROWS_AS(fit_exponential_envelope({0.0}, {1.0}), domain_error);
    CHECK_THROWS_AS(fit_exponential_envelope({0.0, 1.0}, {1.0}), domain_error);
}

}  // TEST_SUITE
