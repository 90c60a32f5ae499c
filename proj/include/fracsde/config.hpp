#pragma once

// JSON serialization of problem specifications and analysis reports, plus
// file loading for the command line tools. The JSON layout round-trips:
// saving a loaded configuration reproduces the same bytes.

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "criteria.hpp"
#include "errors.hpp"
#include "mild_solver.hpp"
#include "problem_model.hpp"
#include "stability_analysis.hpp"

namespace fracsde {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Problem specification <-> JSON.

inline json fn_spec_to_json(const FnSpec& fn) {
    json j;
    j["name"] = fn.name;
    json params = json::object();
    for (const auto& [key, values] : fn.params) params[key] = values;
    j["params"] = params;
    return j;
}

inline FnSpec fn_spec_from_json(const json& j, const std::string& where) {
    FnSpec fn;
    if (j.is_string()) {
        fn.name = j.get<std::string>();
        return fn;
    }
    if (!j.is_object()) {
        throw config_error("config: " + where + " must be an object or a name string");
    }
    if (!j.contains("name")) throw config_error("config: " + where + " is missing \"name\"");
    fn.name = j.at("name").get<std::string>();
    if (j.contains("params")) {
        for (const auto& [key, value] : j.at("params").items()) {
            if (value.is_number()) {
                fn.params[key] = {value.get<double>()};
            } else if (value.is_array()) {
                fn.params[key] = value.get<std::vector<double>>();
            } else {
                throw config_error("config: " + where + " parameter \"" + key +
                                   "\" must be a number or an array of numbers");
            }
        }
    }
    return fn;
}

inline json generator_to_json(const SpectralGenerator& gen) {
    json j;
    j["eigenvalues"] = gen.eigenvalues;
    if (!gen.mode_labels.empty()) j["labels"] = gen.mode_labels;
    return j;
}

inline SpectralGenerator generator_from_json(const json& j) {
    if (!j.is_object()) throw config_error("config: generator must be an object");
    SpectralGenerator gen;
    if (j.contains("type")) {
        std::string type = j.at("type").get<std::string>();
        if (type != "laplacian") {
            throw config_error("config: unknown generator type \"" + type +
                               "\"; supported shorthand: laplacian");
        }
        if (!j.contains("modes")) throw config_error("config: laplacian generator needs \"modes\"");
        return SpectralGenerator::laplacian(j.at("modes").get<int>());
    }
    if (!j.contains("eigenvalues")) {
        throw config_error("config: generator needs \"eigenvalues\" or a \"type\" shorthand");
    }
    gen.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    if (j.contains("labels")) gen.mode_labels = j.at("labels").get<std::string>();
    gen.validate();
    return gen;
}

inline json bounds_to_json(const FamilyBounds& b) {
    json j;
    j["M_c"] = b.M_c;
    j["M"] = b.M;
    j["c_mu"] = b.c_mu;
    j["mu_smoothing"] = b.mu_smoothing;
    j["gamma"] = b.gamma;
    j["inv_power_norm"] = b.inv_power_norm;
    j["inv_norm_source"] = b.inv_norm_source;
    j["D1"] = b.D1;
    j["a1"] = b.a1;
    j["D2"] = b.D2;
    j["a2"] = b.a2;
    j["exponential_decay"] = b.exponential_decay;
    if (!b.exponential_note.empty()) j["exponential_note"] = b.exponential_note;
    return j;
}

inline FamilyBounds bounds_from_json(const json& j) {
    FamilyBounds b;
    if (!j.is_object()) throw config_error("config: bounds must be an object");
    auto get = [&](const char* key, double& out) {
        if (j.contains(key)) out = j.at(key).get<double>();
    };
    get("M_c", b.M_c);
    get("M", b.M);
    get("c_mu", b.c_mu);
    get("mu_smoothing", b.mu_smoothing);
    get("gamma", b.gamma);
    get("inv_power_norm", b.inv_power_norm);
    get("D1", b.D1);
    get("a1", b.a1);
    get("D2", b.D2);
    get("a2", b.a2);
    if (j.contains("inv_norm_source")) b.inv_norm_source = j.at("inv_norm_source").get<std::string>();
    if (j.contains("exponential_decay")) b.exponential_decay = j.at("exponential_decay").get<bool>();
    if (j.contains("exponential_note")) b.exponential_note = j.at("exponential_note").get<std::string>();
    return b;
}

inline json problem_to_json(const ProblemSpec& spec) {
    json j;
    j["alpha"] = spec.alpha;
    j["p"] = spec.p;
    j["horizon"] = spec.horizon;
    j["delay"] = spec.delay;
    j["t_eval"] = spec.t_eval;
    j["generator"] = generator_to_json(spec.generator);
    j["wiener"] = json{{"q_eigenvalues", spec.wiener.q_eigenvalues}};
    json marks;
    marks["kind"] = spec.jumps.marks.kind == MarkDistribution::Kind::point_mass ? "point_mass"
                                                                                : "uniform";
    if (spec.jumps.marks.kind == MarkDistribution::Kind::point_mass) {
        marks["point"] = spec.jumps.marks.point;
    } else {
        marks["lo"] = spec.jumps.marks.lo;
        marks["hi"] = spec.jumps.marks.hi;
    }
    j["jumps"] = json{{"total_rate", spec.jumps.total_rate}, {"marks", marks}};
    json co;
    co["g"] = fn_spec_to_json(spec.coefficients.g_spec);
    co["f"] = fn_spec_to_json(spec.coefficients.f_spec);
    co["G"] = fn_spec_to_json(spec.coefficients.G_spec);
    co["sigma"] = fn_spec_to_json(spec.coefficients.sigma_spec);
    co["a_hat"] = spec.coefficients.a_hat;
    j["coefficients"] = co;
    json ct;
    ct["gamma1"] = fn_spec_to_json(spec.contractors.gamma1_spec);
    ct["gamma2"] = fn_spec_to_json(spec.contractors.gamma2_spec);
    ct["gamma3"] = fn_spec_to_json(spec.contractors.gamma3_spec);
    ct["gamma4"] = fn_spec_to_json(spec.contractors.gamma4_spec);
    ct["c1"] = spec.contractors.c1;
    ct["c2"] = spec.contractors.c2;
    ct["c3"] = spec.contractors.c3;
    ct["c4"] = spec.contractors.c4;
    ct["c4_hat"] = spec.contractors.c4_hat;
    ct["martingale_jump_correction"] = spec.contractors.use_martingale_jump_correction;
    j["contractors"] = ct;
    j["phi"] = fn_spec_to_json(spec.phi_spec);
    j["eta"] = spec.eta;
    j["bounds"] = bounds_to_json(spec.bounds);
    j["k_p"] = spec.k_p;
    if (!spec.preset_name.empty()) j["preset_name"] = spec.preset_name;
    return j;
}

inline ProblemSpec make_preset(const std::string& name) {
    if (name == "builtin_example") return example_problem();
    if (name == "damped") return damped_problem();
    throw config_error("config: unknown preset \"" + name +
                       "\"; available: builtin_example, damped");
}

inline ProblemSpec problem_from_json(const json& j) {
    if (!j.is_object()) throw config_error("config: top level must be a JSON object");
    if (j.contains("preset")) return make_preset(j.at("preset").get<std::string>());

    ProblemSpec spec;
    try {
        auto getd = [&](const char* key, double& out) {
            if (j.contains(key)) out = j.at(key).get<double>();
        };
        getd("alpha", spec.alpha);
        getd("p", spec.p);
        getd("horizon", spec.horizon);
        getd("delay", spec.delay);
        getd("t_eval", spec.t_eval);
        getd("k_p", spec.k_p);
        if (!j.contains("generator")) throw config_error("config: missing \"generator\"");
        spec.generator = generator_from_json(j.at("generator"));
        if (j.contains("wiener")) {
            spec.wiener.q_eigenvalues =
                j.at("wiener").at("q_eigenvalues").get<std::vector<double>>();
        }
        if (j.contains("jumps")) {
            const json& jj = j.at("jumps");
            if (jj.contains("total_rate")) spec.jumps.total_rate = jj.at("total_rate").get<double>();
            if (jj.contains("marks")) {
                const json& mk = jj.at("marks");
                std::string kind = mk.contains("kind") ? mk.at("kind").get<std::string>() : "uniform";
                if (kind == "point_mass") {
                    spec.jumps.marks.kind = MarkDistribution::Kind::point_mass;
                    if (mk.contains("point")) spec.jumps.marks.point = mk.at("point").get<double>();
                } else if (kind == "uniform") {
                    spec.jumps.marks.kind = MarkDistribution::Kind::uniform;
                    if (mk.contains("lo")) spec.jumps.marks.lo = mk.at("lo").get<double>();
                    if (mk.contains("hi")) spec.jumps.marks.hi = mk.at("hi").get<double>();
                } else {
                    throw config_error("config: unknown mark kind \"" + kind +
                                       "\"; supported: point_mass, uniform");
                }
            }
        }
        if (j.contains("coefficients")) {
            const json& co = j.at("coefficients");
            if (co.contains("g")) spec.coefficients.g_spec = fn_spec_from_json(co.at("g"), "coefficients.g");
            if (co.contains("f")) spec.coefficients.f_spec = fn_spec_from_json(co.at("f"), "coefficients.f");
            if (co.contains("G")) spec.coefficients.G_spec = fn_spec_from_json(co.at("G"), "coefficients.G");
            if (co.contains("sigma")) {
                spec.coefficients.sigma_spec = fn_spec_from_json(co.at("sigma"), "coefficients.sigma");
            }
            if (co.contains("a_hat")) {
                auto v = co.at("a_hat").get<std::vector<double>>();
                if (v.size() != 5) {
                    std::ostringstream os;
                    os << "config: a_hat needs exactly 5 entries, got " << v.size();
                    throw config_error(os.str());
                }
                for (std::size_t i = 0; i < 5; ++i) spec.coefficients.a_hat[i] = v[i];
            }
        }
        if (j.contains("contractors")) {
            const json& ct = j.at("contractors");
            if (ct.contains("gamma1")) spec.contractors.gamma1_spec = fn_spec_from_json(ct.at("gamma1"), "contractors.gamma1");
            if (ct.contains("gamma2")) spec.contractors.gamma2_spec = fn_spec_from_json(ct.at("gamma2"), "contractors.gamma2");
            if (ct.contains("gamma3")) spec.contractors.gamma3_spec = fn_spec_from_json(ct.at("gamma3"), "contractors.gamma3");
            if (ct.contains("gamma4")) spec.contractors.gamma4_spec = fn_spec_from_json(ct.at("gamma4"), "contractors.gamma4");
            auto getc = [&](const char* key, double& out) {
                if (ct.contains(key)) out = ct.at(key).get<double>();
            };
            getc("c1", spec.contractors.c1);
            getc("c2", spec.contractors.c2);
            getc("c3", spec.contractors.c3);
            getc("c4", spec.contractors.c4);
            getc("c4_hat", spec.contractors.c4_hat);
            if (ct.contains("martingale_jump_correction")) {
                spec.contractors.use_martingale_jump_correction =
                    ct.at("martingale_jump_correction").get<bool>();
            }
        }
        if (j.contains("phi")) spec.phi_spec = fn_spec_from_json(j.at("phi"), "phi");
        if (j.contains("eta")) spec.eta = j.at("eta").get<std::vector<double>>();
        if (j.contains("bounds")) spec.bounds = bounds_from_json(j.at("bounds"));
        if (j.contains("preset_name")) spec.preset_name = j.at("preset_name").get<std::string>();
    } catch (const json::exception& e) {
        throw config_error(std::string("config: malformed problem object: ") + e.what());
    }
    spec.inv_power_norm_computed = frac_power_norm(spec.generator, spec.bounds.gamma);
    try {
        rebuild_functions(spec);
        spec.validate();
    } catch (const error& e) {
        throw config_error(std::string("config: invalid problem: ") + e.what());
    }
    return spec;
}

inline std::string save_problem(const ProblemSpec& spec) {
    return problem_to_json(spec).dump(2) + "\n";
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw config_error("config: " + origin + " is not valid JSON: " + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("config: cannot open file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline ProblemSpec load_problem_text(const std::string& text, const std::string& origin) {
    return problem_from_json(parse_json_text(text, origin));
}

inline ProblemSpec load_problem_file(const std::string& path) {
    return load_problem_text(read_text_file(path), path);
}

// Optional run block of a configuration file; command line flags and the
// FRACSDE_SEED environment variable override these in that order.
struct RunOptions {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int paths = 0;
    bool paths_set = false;
    double dt = 0.0;
    bool dt_set = false;
    double tol = 0.0;
    bool tol_set = false;
    int max_iter = 0;
    bool max_iter_set = false;
    int threads = 0;
    bool threads_set = false;
};

inline RunOptions run_options_from_json(const json& j) {
    RunOptions opt;
    if (!j.contains("run")) return opt;
    const json& r = j.at("run");
    if (!r.is_object()) throw config_error("config: \"run\" must be an object");
    try {
        if (r.contains("seed")) {
            opt.seed = r.at("seed").get<std::uint64_t>();
            opt.seed_set = true;
        }
        if (r.contains("paths")) {
            opt.paths = r.at("paths").get<int>();
            opt.paths_set = true;
        }
        if (r.contains("dt")) {
            opt.dt = r.at("dt").get<double>();
            opt.dt_set = true;
        }
        if (r.contains("tol")) {
            opt.tol = r.at("tol").get<double>();
            opt.tol_set = true;
        }
        if (r.contains("max_iter")) {
            opt.max_iter = r.at("max_iter").get<int>();
            opt.max_iter_set = true;
        }
        if (r.contains("threads")) {
            opt.threads = r.at("threads").get<int>();
            opt.threads_set = true;
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("config: malformed run block: ") + e.what());
    }
    return opt;
}

// ---------------------------------------------------------------------------
// Report serialization. Every report embeds the resolved constants and the
// conventions that produced them, so numbers are traceable without rerunning.

inline json criterion_to_json(const CriterionResult& r, const std::string& kind) {
    json j;
    j["kind"] = kind;
    j["theta"] = r.theta;
    j["pass"] = r.pass;
    j["addends"] = r.addends;
    j["prefactor"] = r.prefactor;
    j["burkholder_constant"] = r.burkholder;
    j["inv_power_norm"] = r.inv_power_norm;
    j["inv_norm_source"] = r.inv_norm_source;
    j["tail_factor"] = r.tail_factor;
    j["p2_limit_convention_applied"] = r.p2_convention_applied;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline json uniqueness_to_json(const UniquenessConstants& u) {
    json j;
    j["instantaneous"] = u.oplus1;
    j["convolution"] = u.oplus2;
    j["applicable"] = u.applicable;
    if (u.applicable) j["gronwall_rate"] = u.gronwall_rate;
    return j;
}

inline json contractor_report_to_json(const ContractorCheckReport& r) {
    json j;
    j["ratio_f"] = r.ratio_f;
    j["ratio_g"] = r.ratio_g;
    j["ratio_G"] = r.ratio_G;
    j["ratio_jump_sq"] = r.ratio_jump_sq;
    j["ratio_jump_2p"] = r.ratio_jump_2p;
    j["max_ratio"] = r.max_ratio();
    j["tolerance"] = r.tolerance;
    j["samples"] = r.samples;
    j["pass"] = r.pass;
    return j;
}

inline json picard_to_json(const PicardResult& r) {
    json j;
    j["converged"] = r.converged;
    j["diverged"] = r.diverged;
    j["iterations"] = r.iterations;
    j["residuals"] = r.residuals;
    j["theta_exist"] = r.theta_exist;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline json fit_to_json(const DecayFit& f) {
    json j;
    j["mu_hat"] = f.mu_hat;
    j["n_hat"] = f.n_hat;
    j["rate_raw"] = f.rate_raw;
    j["r_squared"] = f.r_squared;
    j["mu_se"] = f.mu_se;
    j["mu_ci_low"] = f.mu_ci_low;
    j["mu_ci_high"] = f.mu_ci_high;
    j["points"] = f.points;
    j["t_lo"] = f.t_lo;
    j["t_hi"] = f.t_hi;
    j["confidence"] = f.confidence;
    return j;
}

inline json envelope_to_json(const InequalityParams& prm) {
    json j;
    j["xi"] = prm.xi;
    j["eta1"] = prm.eta1;
    j["eta2"] = prm.eta2;
    j["theta_delay"] = prm.theta_delay;
    j["margin"] = decay_margin(prm);
    return j;
}

inline json stability_report_to_json(const StabilityReport& r) {
    json j;
    j["criterion"] = criterion_to_json(r.criterion, "stability");
    j["advisory"] = r.advisory;
    j["a1_hat"] = r.a1_hat;
    j["a2_hat"] = r.a2_hat;
    j["uniqueness"] = uniqueness_to_json(r.uniqueness);
    if (r.envelope_built) j["envelope"] = envelope_to_json(r.envelope);
    j["certified"] = r.certified;
    if (r.certified) {
        j["mu_certified"] = r.mu_certified;
        j["n_certified"] = r.n_certified;
    }
    j["paths"] = r.moments.paths;
    j["nonconverged_paths"] = r.moments.nonconverged_paths;
    if (r.fitted) {
        j["fit"] = fit_to_json(r.fit);
        j["fit_window"] = json{{"t_lo", r.fit_t_lo}, {"t_hi", r.fit_t_hi}};
        j["empirical_decay"] = r.empirical_decay;
    }
    if (r.envelope_checked) j["envelope_holds"] = r.envelope_holds;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

// Full check report for one problem: both criteria, uniqueness constants,
// and the numerical contractor verification. For the reference preset the
// report also carries the deviation from the previously reported values.
inline json check_report_to_json(const ProblemSpec& spec, const CriterionResult& exist,
                                 const CriterionResult& stab, const UniquenessConstants& uniq,
                                 const ContractorCheckReport& contractor) {
    json j;
    if (!spec.preset_name.empty()) j["preset"] = spec.preset_name;
    j["existence"] = criterion_to_json(exist, "existence");
    j["stability"] = criterion_to_json(stab, "stability");
    j["uniqueness"] = uniqueness_to_json(uniq);
    j["contractor_check"] = contractor_report_to_json(contractor);
    j["k_p"] = spec.k_p;
    j["inv_power_norm_computed"] = spec.inv_power_norm_computed;
    if (spec.preset_name == "builtin_example") {
        j["reported_reference"] = json{
            {"existence_value", kReportedExistenceValue},
            {"stability_value", kReportedStabilityValue},
            {"existence_deviation", exist.theta - kReportedExistenceValue},
            {"stability_deviation", stab.theta - kReportedStabilityValue},
            {"note", "reported values are not reproducible term by term from the printed "
                     "displays; deviations are informational"},
        };
    }
    j["pass"] = exist.pass && stab.pass && contractor.pass;
    return j;
}

// Flat key,value rendering of a report for --format csv. Nested objects are
// flattened with dotted keys; arrays are indexed.
inline void flatten_json(const json& j, const std::string& prefix, std::string& out) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items()) {
            flatten_json(value, prefix.empty() ? key : prefix + "." + key, out);
        }
    } else if (j.is_array()) {
        std::size_t idx = 0;
        for (const auto& value : j) {
            flatten_json(value, prefix + "." + std::to_string(idx), out);
            ++idx;
        }
    } else {
        out += prefix;
        out += ",";
        out += j.dump();
        out += "\n";
    }
}

inline std::string report_csv(const json& j) {
    std::string out = "key,value\n";
    flatten_json(j, "", out);
    return out;
}

}  // namespace fracsde
