#include <doctest.h>

#include <string>

#include "fracsde/config.hpp"

using namespace fracsde;

namespace {

const char* kCustomProblem = R"json({
  "alpha": 1.4,
  "p": 2.0,
  "horizon": 2.0,
  "delay": 0.5,
  "t_eval": 2.0,
  "generator": {"eigenvalues": [-1.0, -4.0], "labels": "custom basis"},
  "wiener": {"q_eigenvalues": [1.0, 0.25]},
  "jumps": {"total_rate": 0.75, "marks": {"kind": "point_mass", "point": 0.3}},
  "coefficients": {
    "g": "zero",
    "f": {"name": "linear_delayed", "params": {"gain": 0.1}},
    "G": {"name": "constant_profile", "params": {"amp": 0.05, "profile": [1.0, 1.0]}},
    "sigma": {"name": "constant_mark_profile", "params": {"amp": 0.02}},
    "a_hat": [0.0, 0.1, 0.05, 0.02, 0.02]
  },
  "contractors": {"martingale_jump_correction": true},
  "phi": {"name": "exp_profile", "params": {"rate": 2.0, "profile": [0.5, 0.25]}},
  "eta": [0.5, 0.25],
  "bounds": {"M": 0.4, "D2": 0.4, "a2": 0.9, "gamma": 0.5, "exponential_decay": true},
  "k_p": 1.0
})json";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("saving, loading, and saving again is the identity on presets") {
    for (const char* name : {"builtin_example", "damped"}) {
        ProblemSpec spec = make_preset(name);
        std::string first = save_problem(spec);
        ProblemSpec reloaded = load_problem_text(first, "memory");
        CHECK(save_problem(reloaded) == first);
        CHECK(reloaded.preset_name == name);
    }
}

TEST_CASE("round trip preserves a hand-written problem") {
    ProblemSpec spec = load_problem_text(kCustomProblem, "inline");
    CHECK(spec.alpha == 1.4);
    CHECK(spec.delay == 0.5);
    CHECK(spec.generator.mode_labels == "custom basis");
    CHECK(spec.jumps.marks.kind == MarkDistribution::Kind::point_mass);
    CHECK(spec.jumps.marks.point == 0.3);
    CHECK(spec.contractors.use_martingale_jump_correction);
    CHECK(spec.eta == State{0.5, 0.25});
    CHECK(spec.bounds.M == 0.4);
    CHECK(spec.coefficients.f_spec.name == "linear_delayed");
    CHECK(spec.preset_name.empty());
    // computed diagonal norm is recomputed on load, not stored
    CHECK(spec.inv_power_norm_computed == doctest::Approx(1.0));

    std::string saved = save_problem(spec);
    CHECK(save_problem(load_problem_text(saved, "memory")) == saved);
    CHECK(saved.find("preset_name") == std::string::npos);
    CHECK(saved.find("custom basis") != std::string::npos);
}

TEST_CASE("preset shorthand replaces the whole object") {
    ProblemSpec spec = load_problem_text(R"({"preset": "damped"})", "inline");
    CHECK(save_problem(spec) == save_problem(damped_problem()));
    CHECK_THROWS_AS(load_problem_text(R"({"preset": "no_such"})", "inline"), config_error);
}

TEST_CASE("generator shorthand and validation") {
    ProblemSpec spec = load_problem_text(
        R"({"generator": {"type": "laplacian", "modes": 3}})", "inline");
    CHECK(spec.generator.eigenvalues == std::vector<double>{-1.0, -4.0, -9.0});
    CHECK_THROWS_AS(load_problem_text(R"({"generator": {"type": "laplacian"}})", "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(R"({"generator": {"type": "fourier", "modes": 3}})", "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(R"({"generator": {}})", "inline"), config_error);
    // strictly negative spectrum enforced on load
    CHECK_THROWS_AS(load_problem_text(R"({"generator": {"eigenvalues": [1.0]}})", "inline"), error);
}

TEST_CASE("malformed documents are rejected with config errors") {
    CHECK_THROWS_AS(load_problem_text("{not json", "inline"), config_error);
    CHECK_THROWS_AS(load_problem_text("[1, 2]", "inline"), config_error);
    CHECK_THROWS_AS(load_problem_text("{}", "inline"), config_error);  // missing generator
    CHECK_THROWS_AS(load_problem_text(
                        R"({"generator": {"type": "laplacian", "modes": 2},
                            "coefficients": {"a_hat": [0.1, 0.1]}})",
                        "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(
                        R"({"generator": {"type": "laplacian", "modes": 2},
                            "coefficients": {"f": {"name": "no_such_shape"}}})",
                        "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(
                        R"({"generator": {"type": "laplacian", "modes": 2}, "alpha": 2.5})",
                        "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(
                        R"({"generator": {"type": "laplacian", "modes": 2},
                            "coefficients": {"f": {"name": "constant_profile",
                                                   "params": {"amp": "big"}}}})",
                        "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(
                        R"({"generator": {"type": "laplacian", "modes": 2},
                            "coefficients": {"f": {"params": {}}}})",
                        "inline"),
                    config_error);
    CHECK_THROWS_AS(load_problem_text(
                        R"({"generator": {"type": "laplacian", "modes": 2}, "alpha": "wide"})",
                        "inline"),
                    config_error);
}

TEST_CASE("function descriptors accept scalars, arrays, and name strings") {
    json scalar = json::parse(R"({"name": "constant_profile", "params": {"amp": 2.0}})");
    json array = json::parse(R"({"name": "constant_profile", "params": {"amp": [2.0]}})");
    FnSpec a = fn_spec_from_json(scalar, "test");
    FnSpec b = fn_spec_from_json(array, "test");
    CHECK(a.params.at("amp") == b.params.at("amp"));
    FnSpec c = fn_spec_from_json(json("zero"), "test");
    CHECK(c.name == "zero");
    CHECK(c.params.empty());
    CHECK_THROWS_AS(fn_spec_from_json(json(3.0), "test"), config_error);
}

TEST_CASE("run block parsing with full override bookkeeping") {
    json none = json::parse(R"({"alpha": 1.5})");
    RunOptions off = run_options_from_json(none);
    CHECK_FALSE(off.seed_set);
    CHECK_FALSE(off.paths_set);
    CHECK_FALSE(off.dt_set);
    CHECK_FALSE(off.tol_set);
    CHECK_FALSE(off.max_iter_set);
    CHECK_FALSE(off.threads_set);

    json full = json::parse(
        R"({"run": {"seed": 42, "paths": 500, "dt": 0.01, "tol": 1e-9, "max_iter": 32, "threads": 2}})");
    RunOptions on = run_options_from_json(full);
    CHECK(on.seed == 42);
    CHECK(on.seed_set);
    CHECK(on.paths == 500);
    CHECK(on.dt == 0.01);
    CHECK(on.tol == 1e-9);
    CHECK(on.max_iter == 32);
    CHECK(on.threads == 2);
    CHECK(on.threads_set);

    CHECK_THROWS_AS(run_options_from_json(json::parse(R"({"run": 3})")), config_error);
    CHECK_THROWS_AS(run_options_from_json(json::parse(R"({"run": {"seed": "abc"}})")), config_error);
}

TEST_CASE("check report embeds the reference deviation only for the reference preset") {
    ProblemSpec ex = example_problem();
    CriterionResult e = existence_criterion(ex);
    CriterionResult s = stability_criterion(ex);
    UniquenessConstants u = uniqueness_constants(ex);
    ContractorCheckReport c = check_contractor_conditions(ex, 4, 1);
    json j = check_report_to_json(ex, e, s, u, c);
    CHECK(j.at("preset") == "builtin_example");
    CHECK(j.contains("reported_reference"));
    CHECK(j.at("reported_reference").at("existence_deviation").get<double>() ==
          doctest::Approx(e.theta - kReportedExistenceValue).epsilon(1e-15));
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("existence").at("kind") == "existence");
    CHECK_FALSE(j.at("existence").contains("note"));

    ProblemSpec dp = damped_problem();
    json jd = check_report_to_json(dp, existence_criterion(dp), stability_criterion(dp),
                                   uniqueness_constants(dp), check_contractor_conditions(dp, 4, 1));
    CHECK_FALSE(jd.contains("reported_reference"));
    CHECK(jd.at("preset") == "damped");
}

TEST_CASE("stability report serialization tracks optional sections") {
    ProblemSpec dp = damped_problem();
    TimeGrid grid = TimeGrid::from_horizon(dp.horizon, 0.1);
    StabilityReport rep = verify_stability(dp, grid, 8, 3);
    json j = stability_report_to_json(rep);
    CHECK(j.at("criterion").at("pass").get<bool>());
    CHECK(j.contains("envelope"));
    CHECK(j.at("envelope").at("margin").get<double>() ==
          doctest::Approx(rep.a1_hat + rep.a2_hat).epsilon(1e-12));
    CHECK(j.contains("mu_certified"));
    CHECK(j.at("paths") == 8);

    ProblemSpec nodecay = damped_problem();
    nodecay.bounds.exponential_decay = false;
    StabilityReport rep2 = verify_stability(nodecay, grid, 4, 3);
    json j2 = stability_report_to_json(rep2);
    CHECK_FALSE(j2.contains("envelope"));
    CHECK_FALSE(j2.contains("mu_certified"));
}

TEST_CASE("reports flatten to two-column csv") {
    json j = json::parse(R"({"a": {"b": 1.5}, "c": [true, "x"], "d": null})");
    std::string csv = report_csv(j);
    CHECK(csv ==
          "key,value\n"
          "a.b,1.5\n"
          "c.0,true\n"
          "c.1,\"x\"\n"
          "d,null\n");
}

TEST_CASE("reading a missing file is a config error") {
    CHECK_THROWS_AS(read_text_file("/nonexistent/fracsde.json"), config_error);
}

}  // TEST_SUITE
