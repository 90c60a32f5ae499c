#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fracsde/stability_analysis.hpp"

using namespace fracsde;

TEST_SUITE("stability") {

TEST_CASE("normal quantile inverts the gaussian distribution function") {
    CHECK(std::fabs(normal_quantile(0.5)) <= 1e-12);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
    CHECK(normal_quantile(0.84134474606854293) == doctest::Approx(1.0).epsilon(1e-10));
    for (double q : {0.01, 0.2, 0.6, 0.999}) {
        double x = normal_quantile(q);
        CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(q).epsilon(1e-12));
    }
    CHECK_THROWS_AS(normal_quantile(0.0), domain_error);
    CHECK_THROWS_AS(normal_quantile(1.0), domain_error);
}

TEST_CASE("pure exponential samples are fitted exactly") {
    std::vector<double> ts, vs;
    for (int i = 0; i <= 40; ++i) {
        double t = 0.05 * i;
        ts.push_back(t);
        vs.push_back(3.0 * std::exp(-2.0 * t));
    }
    DecayFit fit = fit_decay(ts, vs);
    CHECK(std::fabs(fit.mu_hat - 2.0) <= 1e-10);
    CHECK(std::fabs(fit.n_hat - 3.0) <= 1e-10);
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.mu_se <= 1e-10);
    CHECK(fit.mu_ci_low == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.mu_ci_high == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.points == 41);
    CHECK(fit.t_lo == 0.0);
    CHECK(fit.t_hi == doctest::Approx(2.0));
}

TEST_CASE("flat and growing samples clamp the decay rate at zero") {
    std::vector<double> ts{0.0, 1.0, 2.0, 3.0};
    DecayFit flat = fit_decay(ts, {2.0, 2.0, 2.0, 2.0});
    CHECK(flat.mu_hat == 0.0);
    CHECK(std::fabs(flat.rate_raw) <= 1e-14);
    CHECK(flat.r_squared == 1.0);  // zero total variation is a perfect flat fit

    std::vector<double> grow;
    for (double t : ts) grow.push_back(std::exp(t));
    DecayFit g = fit_decay(ts, grow);
    CHECK(g.mu_hat == 0.0);
    CHECK(g.rate_raw == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("decay fitting rejects unusable samples") {
    CHECK_THROWS_AS(fit_decay({0.0, 1.0}, {1.0, 0.5}), fit_domain_error);
    CHECK_THROWS_WITH_AS(fit_decay({0.0, 1.0}, {1.0, 0.5}),
                         "fit_decay: needs at least 3 points, got 2", fit_domain_error);
    CHECK_THROWS_AS(fit_decay({0.0, 1.0, 2.0}, {1.0, 0.0, 0.5}), fit_domain_error);
    CHECK_THROWS_AS(fit_decay({0.0, 1.0, 2.0}, {1.0, -0.1, 0.5}), fit_domain_error);
    CHECK_THROWS_AS(fit_decay({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}), fit_domain_error);
    CHECK_THROWS_AS(fit_decay({0.0, 1.0, 2.0}, {1.0, 0.5}), domain_error);
    CHECK_THROWS_AS(fit_decay({0.0, 1.0, 2.0}, {1.0, 0.5, 0.25}, 1.0), domain_error);
}

TEST_CASE("windowed fitting selects nodes inside the interval") {
    MomentCurve c;
    c.grid = TimeGrid(0.25, 8);
    c.mean.resize(9);
    for (int i = 0; i <= 8; ++i) c.mean[i] = 5.0 * std::exp(-1.5 * c.grid.time(i));
    DecayFit fit = fit_decay(c, 0.5, 2.0);
    CHECK(std::fabs(fit.mu_hat - 1.5) <= 1e-10);
    CHECK(fit.points == 7);
    CHECK(fit.t_lo == 0.5);
    CHECK(fit.t_hi == 2.0);
    CHECK_THROWS_AS(fit_decay(c, 0.5, 0.6), fit_domain_error);
}

TEST_CASE("moment curves carry clamped confidence bands") {
    TimeGrid grid(0.5, 2);
    std::vector<Trajectory> identical(4, Trajectory(grid, 1));
    for (auto& x : identical) {
        for (int i = 0; i <= 2; ++i) x.states[i][0] = 2.0 - 0.5 * grid.time(i);
    }
    MomentCurve same = estimate_moment(identical, 2.0);
    for (int i = 0; i <= 2; ++i) {
        double v = identical[0].states[i][0];
        CHECK(same.mean[i] == doctest::Approx(v * v).epsilon(1e-15));
        CHECK(same.std_err[i] == 0.0);
        CHECK(same.ci_low[i] == same.ci_high[i]);
    }

    // a single path has no variance estimate and a zero-width band
    MomentCurve solo = estimate_moment({identical[0]}, 2.0);
    CHECK(solo.paths == 1);
    CHECK(solo.std_err[0] == 0.0);

    // tiny mean with a huge spread clamps the lower band at zero
    MomentAccumulation acc;
    acc.grid = TimeGrid(1.0, 1);
    acc.paths = 2;
    acc.p = 2.0;
    acc.sum_p = {0.2, 0.2};
    acc.sum_p_sq = {10.0, 10.0};
    MomentCurve clamped = estimate_moment(acc);
    CHECK(clamped.ci_low[0] == 0.0);
    CHECK(clamped.ci_high[0] > clamped.mean[0]);

    MomentAccumulation empty;
    empty.paths = 0;
    CHECK_THROWS_AS(estimate_moment(empty), domain_error);
    CHECK_THROWS_AS(estimate_moment(acc, 1.5), domain_error);

    std::vector<Trajectory> mixed{Trajectory(TimeGrid(0.5, 2), 1), Trajectory(TimeGrid(0.25, 4), 1)};
    CHECK_THROWS_AS(estimate_moment(mixed, 2.0), domain_error);
}

TEST_CASE("moment csv lists one full-precision row per node") {
    MomentCurve c;
    c.grid = TimeGrid(0.5, 1);
    c.mean = {1.0, 0.1};
    c.ci_low = {1.0, 0.05};
    c.ci_high = {1.0, 0.15};
    c.std_err = {0.0, 0.02};
    std::string csv = moment_csv(c);
    CHECK(csv ==
          "t,mean,ci_low,ci_high\n"
          "0,1,1,1\n"
          "0.5,0.10000000000000001,0.050000000000000003,0.14999999999999999\n");
}

TEST_CASE("full verification pipeline certifies the damped preset") {
    ProblemSpec spec = damped_problem();
    TimeGrid grid = TimeGrid::from_horizon(spec.horizon, 0.03);
    StabilityReport rep = verify_stability(spec, grid, 96, 20240818);

    CHECK(rep.criterion.pass);
    CHECK_FALSE(rep.advisory);
    CHECK(rep.a1_hat + rep.a2_hat == doctest::Approx(rep.criterion.theta).epsilon(1e-14));
    CHECK(rep.uniqueness.applicable);

    CHECK(rep.envelope_built);
    CHECK(rep.envelope.xi[3] == 0.0);
    CHECK(rep.envelope.xi[2] == doctest::Approx(rep.a1_hat));
    CHECK(rep.envelope.xi[4] == doctest::Approx(rep.a2_hat * rep.envelope.eta2));
    CHECK(rep.envelope.theta_delay == doctest::Approx(spec.delay));
    CHECK(rep.certified);
    CHECK(rep.mu_certified > 0.0);
    CHECK(rep.n_certified > 0.0);

    CHECK(rep.moments.paths == 96);
    CHECK(rep.moments.mean.size() == static_cast<std::size_t>(grid.nodes()));
    CHECK(rep.moments.nonconverged_paths == 0);

    CHECK(rep.fitted);
    CHECK(rep.fit_t_lo == doctest::Approx(0.2 * grid.horizon()));
    CHECK(rep.fit_t_hi == doctest::Approx(grid.horizon()));
    CHECK(rep.empirical_decay);
    CHECK(rep.fit.mu_ci_low > 0.0);

    CHECK(rep.envelope_checked);
    CHECK(rep.envelope_holds);
    CHECK(rep.note.find("t_eval") != std::string::npos);
}

TEST_CASE("reference preset is certified with its supplied constants") {
    ProblemSpec spec = example_problem();
    TimeGrid grid = TimeGrid::from_horizon(spec.horizon, 0.01);
    StabilityReport rep = verify_stability(spec, grid, 64, 7);
    CHECK(rep.criterion.pass);
    CHECK(rep.envelope_built);
    CHECK(rep.certified);
    CHECK(rep.mu_certified > 0.0);
    CHECK(rep.mu_certified < std::min(rep.envelope.eta1, rep.envelope.eta2));
    CHECK(rep.moments.mean.size() == static_cast<std::size_t>(grid.nodes()));
}

TEST_CASE("failing criterion downgrades the report to advisory without throwing") {
    ProblemSpec spec = damped_problem();
    spec.coefficients.a_hat = {2.0, 2.0, 2.0, 2.0, 2.0};
    TimeGrid grid = TimeGrid::from_horizon(spec.horizon, 0.1);
    StabilityReport rep;
    CHECK_NOTHROW(rep = verify_stability(spec, grid, 8, 5));
    CHECK(rep.advisory);
    CHECK_FALSE(rep.criterion.pass);
    CHECK_FALSE(rep.certified);
    CHECK(rep.note.find("advisory") != std::string::npos);
}

TEST_CASE("missing family decay disables the envelope but not the monte carlo") {
    ProblemSpec spec = damped_problem();
    spec.bounds.exponential_decay = false;
    TimeGrid grid = TimeGrid::from_horizon(spec.horizon, 0.1);
    StabilityReport rep = verify_stability(spec, grid, 8, 5);
    CHECK_FALSE(rep.envelope_built);
    CHECK_FALSE(rep.certified);
    CHECK_FALSE(rep.envelope_checked);
    CHECK(rep.moments.paths == 8);
    CHECK(rep.note.find("envelope cannot be assembled") != std::string::npos);
}

}  // TEST_SUITE
