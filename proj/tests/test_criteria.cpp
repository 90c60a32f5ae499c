#include <doctest.h>

#include <cmath>
#include <random>

#include "criterion_reference.hpp"
#include "fracsde/criteria.hpp"

using namespace fracsde;
using namespace fracsde_test;

TEST_SUITE("criteria") {

TEST_CASE("martingale moment constant") {
    CHECK(burkholder_constant(2.0) == 1.0);
    CHECK(burkholder_constant(4.0) == doctest::Approx(36.0).epsilon(1e-15));
    CHECK(burkholder_constant(3.0) == doctest::Approx(std::pow(3.0, 1.5)).epsilon(1e-15));
    CHECK_THROWS_AS(burkholder_constant(1.99), domain_error);
}

TEST_CASE("criterion values match the frozen reference arithmetic") {
    ProblemSpec spec = example_problem();
    CHECK(spec.bounds.inv_power_norm == doctest::Approx(kInvNormOverride).epsilon(1e-15));

    CriterionResult e = existence_criterion(spec);
    CHECK(e.theta == doctest::Approx(kThetaExistOverride).epsilon(1e-12));
    CHECK(e.pass);
    CHECK(e.inv_norm_source == "override");
    for (int i = 0; i < 5; ++i) {
        CHECK(e.addends[i] == doctest::Approx(kExistAddendsOverride[i]).epsilon(1e-12));
    }

    CriterionResult s = stability_criterion(spec);
    CHECK(s.theta == doctest::Approx(kThetaStabOverride).epsilon(1e-12));
    CHECK(s.pass);
    CHECK(s.p2_convention_applied);
    CHECK(s.tail_factor == 1.0);
    for (int i = 0; i < 5; ++i) {
        CHECK(s.addends[i] == doctest::Approx(kStabAddendsOverride[i]).epsilon(1e-12));
    }

    CriterionOptions computed;
    computed.use_overridden_norm = false;
    CHECK(existence_criterion(spec, computed).theta ==
          doctest::Approx(kThetaExistComputed).epsilon(1e-12));
    CHECK(stability_criterion(spec, computed).theta ==
          doctest::Approx(kThetaStabComputed).epsilon(1e-12));
    CHECK(existence_criterion(spec, computed).inv_norm_source == "computed");
}

TEST_CASE("theta equals the left-to-right sum of its addends") {
    for (CriterionResult r :
         {existence_criterion(example_problem()), stability_criterion(example_problem()),
          existence_criterion(damped_problem()), stability_criterion(damped_problem())}) {
        double sum = ((r.addends[0] + r.addends[1]) + r.addends[2]) + r.addends[3];
        sum += r.addends[4];
        CHECK(r.theta == sum);
        CHECK(r.prefactor == doctest::Approx(std::pow(5.0, r.burkholder > 1.0 ? 3.0 : 1.0)));
    }
}

TEST_CASE("uniqueness constants split the existence addends") {
    ProblemSpec spec = example_problem();
    UniquenessConstants u = uniqueness_constants(spec);
    CHECK(u.oplus1 == doctest::Approx(kOplus1Override).epsilon(1e-12));
    CHECK(u.oplus2 == doctest::Approx(kOplus2Override).epsilon(1e-12));
    CHECK(u.applicable);
    CHECK(u.gronwall_rate == doctest::Approx(u.oplus2 / (1.0 - u.oplus1)).epsilon(1e-15));
}

TEST_CASE("pinned previously reported values") {
    CHECK(kReportedExistenceValue == 0.007436);
    CHECK(kReportedStabilityValue == 0.00874);
}

TEST_CASE("criteria grow monotonically in every declared constant") {
    std::mt19937 rng(20240818);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        ProblemSpec spec = example_problem();
        for (double& a : spec.coefficients.a_hat) a = 0.4 * unif(rng);
        spec.bounds.M = 0.001 + 0.05 * unif(rng);
        spec.bounds.D2 = 0.001 + 0.1 * unif(rng);
        spec.bounds.a2 = 0.2 + 1.8 * unif(rng);
        spec.t_eval = 0.25 + unif(rng);

        double base_e = existence_criterion(spec).theta;
        double base_s = stability_criterion(spec).theta;
        for (int i = 0; i < 5; ++i) {
            ProblemSpec bumped = spec;
            bumped.coefficients.a_hat[i] = spec.coefficients.a_hat[i] * 1.1 + 0.01;
            CHECK(existence_criterion(bumped).theta >= base_e);
            CHECK(stability_criterion(bumped).theta >= base_s);
        }
        ProblemSpec bigger_m = spec;
        bigger_m.bounds.M *= 1.5;
        CHECK(existence_criterion(bigger_m).theta >= base_e);
        ProblemSpec bigger_d2 = spec;
        bigger_d2.bounds.D2 *= 1.5;
        CHECK(stability_criterion(bigger_d2).theta >= base_s);
    }
}

TEST_CASE("p = 2 limit convention for the stability tail factor") {
    ProblemSpec spec = example_problem();
    CriterionOptions strict;
    strict.p2_limit_convention = false;
    CHECK_THROWS_AS(stability_criterion(spec, strict), singular_exponent_error);

    CriterionResult s = stability_criterion(spec);
    CHECK(s.tail_factor == 1.0);
    CHECK(s.p2_convention_applied);
}

TEST_CASE("tail factor above p = 2 follows the closed form") {
    ProblemSpec spec = example_problem();
    spec.p = 4.0;
    CriterionResult s = stability_criterion(spec);
    // (2 a2 (p-1)/(p-2))^{1 - p/2} = 3^{-1} with a2 = 1, p = 4
    CHECK(s.tail_factor == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_FALSE(s.p2_convention_applied);
    CHECK(s.burkholder == doctest::Approx(36.0));
    CHECK(s.prefactor == doctest::Approx(125.0));
}

TEST_CASE("formal-stability note when the families do not decay") {
    ProblemSpec spec = example_problem();
    spec.bounds.exponential_decay = false;
    CriterionResult s = stability_criterion(spec);
    CHECK_FALSE(s.note.empty());
    CHECK(stability_criterion(example_problem()).note.empty());
}

TEST_CASE("decay root solves single-channel equations exactly") {
    // xi4/(eta1 - mu) = 1 gives mu = eta1 - xi4
    InequalityParams prm;
    prm.xi = {1.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0};
    prm.eta1 = 2.0;
    prm.eta2 = 5.0;
    prm.theta_delay = 0.0;
    DecayRootResult r = decay_root(prm);
    CHECK(r.mu == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.residual <= 1e-12);
}

TEST_CASE("decay root reproduces the frozen transcendental sample") {
    InequalityParams prm;
    prm.xi = {0.0, 0.0, 0.2, 0.3, 0.0, 0.0, 0.0};
    prm.eta1 = 1.0;
    prm.eta2 = 1.0;
    prm.theta_delay = 0.1;
    DecayRootResult r = decay_root(prm);
    CHECK(r.mu == doctest::Approx(kDecayRootSample).epsilon(1e-12));
    CHECK(r.residual <= 1e-12);
}

TEST_CASE("decay root stays admissible on random feasible parameters") {
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        InequalityParams prm;
        prm.eta1 = 0.5 + 2.5 * unif(rng);
        prm.eta2 = 0.5 + 2.5 * unif(rng);
        prm.theta_delay = unif(rng);
        // draw coefficients and rescale so the subcritical mass is < 1
        double x3 = unif(rng), x4 = unif(rng), x5 = unif(rng);
        double mass = x3 + x4 / prm.eta1 + x5 / prm.eta2;
        double target = 0.05 + 0.9 * unif(rng);
        double scale = target / mass;
        prm.xi = {unif(rng), unif(rng), x3 * scale, x4 * scale, x5 * scale, 0.0, 0.0};
        DecayRootResult r = decay_root(prm);
        CHECK(r.mu > 0.0);
        CHECK(r.mu < std::min(prm.eta1, prm.eta2));
        CHECK(r.residual <= 1e-10);
        double n = n_epsilon(prm, r.mu);
        CHECK(n >= prm.xi[0] + prm.xi[1]);
    }
}

TEST_CASE("absent channels do not cap the decay root") {
    InequalityParams prm;
    prm.xi = {0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0};
    prm.eta1 = 0.1;  // channel 1 carries no coefficient, so eta1 is no cap
    prm.eta2 = 2.0;
    prm.theta_delay = 0.0;
    DecayRootResult r = decay_root(prm);
    CHECK(r.mu == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.mu > prm.eta1);
}

TEST_CASE("decay root refuses supercritical or channel-free inequalities") {
    InequalityParams super;
    super.xi = {0.0, 0.0, 1.2, 0.0, 0.0, 0.0, 0.0};
    super.eta1 = super.eta2 = 1.0;
    CHECK_THROWS_AS(decay_root(super), no_root_error);

    InequalityParams inst;
    inst.xi = {1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0};
    inst.eta1 = inst.eta2 = 1.0;
    CHECK_THROWS_AS(decay_root(inst), no_root_error);

    InequalityParams bad;
    bad.xi = {0.0, 0.0, -0.1, 0.0, 0.0, 0.0, 0.0};
    bad.eta1 = bad.eta2 = 1.0;
    CHECK_THROWS_AS(decay_root(bad), domain_error);
}

TEST_CASE("envelope amplitude takes the worst channel") {
    InequalityParams prm;
    prm.xi = {2.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0};
    prm.eta1 = 2.0;
    prm.eta2 = 1.0;
    prm.theta_delay = 0.0;
    // mu = 1.5: channel term (2 - 1.5)/0.5 = 1 loses to xi1 + xi2 = 3
    CHECK(n_epsilon(prm, 1.5) == doctest::Approx(3.0).epsilon(1e-15));

    InequalityParams prm2 = prm;
    prm2.xi[0] = 0.1;
    prm2.xi[1] = 0.0;
    // now the channel term (2 - 0.5)/0.5 = 3 dominates
    CHECK(n_epsilon(prm2, 0.5) == doctest::Approx(3.0).epsilon(1e-15));

    CHECK_THROWS_AS(n_epsilon(prm, 0.0), domain_error);

    InequalityParams degen;
    degen.xi = {1.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0};
    degen.eta1 = 2.0;
    degen.eta2 = 1.0;
    degen.theta_delay = 0.0;  // xi4 e^{mu theta} - xi6 = 0.5 - 0.5
    CHECK_THROWS_AS(n_epsilon(degen, 0.5), degenerate_denominator_error);
}

}  // TEST_SUITE
