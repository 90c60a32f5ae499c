// Command line front end: criterion checks, Monte Carlo simulation, single
// path successive approximation, decay fitting, and preset export.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 criterion failure,
// 3 divergence or failed convergence.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracsde/config.hpp"

namespace {

using namespace fracsde;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCriterion = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
    std::string config_path;
    std::string preset;
    std::string out_dir = ".";
    std::string format = "json";
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_seed = true) {
    cmd->add_option("--config", args.config_path, "problem configuration JSON file");
    cmd->add_option("--preset", args.preset,
                    "bundled preset name (builtin_example or damped); ignored when --config is given");
    cmd->add_option("--out", args.out_dir, "output directory for report and data files");
    cmd->add_option("--format", args.format, "report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    if (with_seed) {
        cmd->add_option("--seed", args.seed, "master seed; overrides config and FRACSDE_SEED")
            ->trigger_on_parse()
            ->each([&args](const std::string&) { args.seed_given = true; });
    }
}

// Loads the problem plus the optional run block. Precedence for the seed:
// config run block, then FRACSDE_SEED, then the --seed flag.
struct LoadedConfig {
    ProblemSpec spec;
    RunOptions run;
    std::uint64_t seed = 0;
};

LoadedConfig load_config(const CommonArgs& args) {
    LoadedConfig out;
    if (!args.config_path.empty()) {
        json j = parse_json_text(read_text_file(args.config_path), args.config_path);
        out.spec = problem_from_json(j);
        out.run = run_options_from_json(j);
    } else {
        out.spec = make_preset(args.preset.empty() ? "builtin_example" : args.preset);
    }
    if (out.run.seed_set) out.seed = out.run.seed;
    if (const char* env = std::getenv("FRACSDE_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') {
            throw config_error(std::string("FRACSDE_SEED must be an unsigned integer, got \"") +
                               env + "\"");
        }
        out.seed = static_cast<std::uint64_t>(v);
    }
    if (args.seed_given) out.seed = args.seed;
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw config_error("cannot write file " + path);
    outf << content;
}

std::string report_path(const CommonArgs& args, const std::string& stem) {
    return args.out_dir + "/" + stem + (args.format == "json" ? ".json" : ".csv");
}

void write_report(const CommonArgs& args, const std::string& stem, const json& j) {
    std::string path = report_path(args, stem);
    write_file(path, args.format == "json" ? j.dump(2) + "\n" : report_csv(j));
    std::printf("wrote %s\n", path.c_str());
}

// ---------------------------------------------------------------------------

int cmd_check(const CommonArgs& args, int samples, double tol) {
    LoadedConfig cfg = load_config(args);
    CriterionResult exist = existence_criterion(cfg.spec);
    CriterionResult stab = stability_criterion(cfg.spec);
    UniquenessConstants uniq = uniqueness_constants(cfg.spec);
    ContractorCheckReport contractor =
        check_contractor_conditions(cfg.spec, samples, cfg.seed, tol);
    json rep = check_report_to_json(cfg.spec, exist, stab, uniq, contractor);
    std::printf("existence:  theta = %.12g  %s\n", exist.theta, exist.pass ? "PASS" : "FAIL");
    std::printf("stability:  theta = %.12g  %s\n", stab.theta, stab.pass ? "PASS" : "FAIL");
    std::printf("uniqueness: instantaneous = %.12g, convolution = %.12g, applicable = %s\n",
                uniq.oplus1, uniq.oplus2, uniq.applicable ? "yes" : "no");
    std::printf("contractor: max ratio = %.12g  %s\n", contractor.max_ratio(),
                contractor.pass ? "PASS" : "FAIL");
    write_report(args, "check_report", rep);
    bool pass = exist.pass && stab.pass && contractor.pass;
    return pass ? kExitOk : kExitCriterion;
}

int cmd_simulate(const CommonArgs& args, int paths_flag, double dt_flag, double tol_flag,
                 int max_iter_flag, int threads_flag, const std::string& method_name) {
    LoadedConfig cfg = load_config(args);
    int paths = paths_flag > 0 ? paths_flag : (cfg.run.paths_set ? cfg.run.paths : 100);
    double dt = dt_flag > 0.0 ? dt_flag : (cfg.run.dt_set ? cfg.run.dt : cfg.spec.horizon / 200.0);
    double tol = tol_flag > 0.0 ? tol_flag : (cfg.run.tol_set ? cfg.run.tol : 1e-10);
    int max_iter = max_iter_flag > 0 ? max_iter_flag : (cfg.run.max_iter_set ? cfg.run.max_iter : 64);
    int threads = threads_flag >= 0 ? threads_flag : (cfg.run.threads_set ? cfg.run.threads : 0);
    SolveMethod method = SolveMethod::automatic;
    if (method_name == "successive") method = SolveMethod::successive;
    if (method_name == "single_pass") method = SolveMethod::single_pass;

    TimeGrid grid = TimeGrid::from_horizon(cfg.spec.horizon, dt);
    std::printf("simulating %d paths with %s worker threads\n", paths,
                threads == 0 ? "hardware" : std::to_string(threads).c_str());
    MomentAccumulation acc =
        simulate_ensemble(cfg.spec, grid, paths, cfg.seed, threads, method, tol, max_iter);
    MomentCurve curve = estimate_moment(acc);
    std::string moments_path = args.out_dir + "/moments.csv";
    write_file(moments_path, moment_csv(curve));
    std::printf("wrote %s\n", moments_path.c_str());

    // the report describes the result, which does not depend on the worker
    // count, so the report stays byte for byte reproducible across thread
    // settings
    json rep;
    if (!cfg.spec.preset_name.empty()) rep["preset"] = cfg.spec.preset_name;
    rep["paths"] = paths;
    rep["dt"] = grid.dt;
    rep["steps"] = grid.steps;
    rep["seed"] = cfg.seed;
    rep["method"] = method == SolveMethod::single_pass
                        ? "single_pass"
                        : (method == SolveMethod::successive ? "successive" : "automatic");
    rep["nonconverged_paths"] = acc.nonconverged_paths;
    rep["moment_mean_first"] = curve.mean.front();
    rep["moment_mean_last"] = curve.mean.back();

    if (paths == 1) {
        NoiseRealization noise = sample_noise(cfg.spec.wiener, cfg.spec.jumps, grid, cfg.seed, 0);
        Trajectory x;
        if (cfg.spec.contractors.all_zero()) {
            x = direct_scheme(cfg.spec, grid, noise);
        } else {
            x = picard_solve(cfg.spec, grid, noise, tol, max_iter).x;
        }
        std::string traj_path = args.out_dir + "/trajectory.csv";
        write_file(traj_path, trajectory_csv(x));
        std::printf("wrote %s\n", traj_path.c_str());
    }

    if (acc.nonconverged_paths > 0) {
        // rerun the first path to capture a residual history for the report
        NoiseRealization noise = sample_noise(cfg.spec.wiener, cfg.spec.jumps, grid, cfg.seed, 0);
        PicardResult pr = picard_solve(cfg.spec, grid, noise, tol, max_iter);
        rep["first_path_iteration"] = picard_to_json(pr);
        write_report(args, "sim_report", rep);
        std::fprintf(stderr, "%d of %d paths missed the iteration tolerance\n",
                     acc.nonconverged_paths, paths);
        return kExitDivergence;
    }
    write_report(args, "sim_report", rep);
    return kExitOk;
}

int cmd_picard(const CommonArgs& args, double dt_flag, double tol_flag, int max_iter_flag,
               int path_index) {
    LoadedConfig cfg = load_config(args);
    double dt = dt_flag > 0.0 ? dt_flag : (cfg.run.dt_set ? cfg.run.dt : cfg.spec.horizon / 200.0);
    double tol = tol_flag > 0.0 ? tol_flag : (cfg.run.tol_set ? cfg.run.tol : 1e-10);
    int max_iter = max_iter_flag > 0 ? max_iter_flag : (cfg.run.max_iter_set ? cfg.run.max_iter : 64);

    TimeGrid grid = TimeGrid::from_horizon(cfg.spec.horizon, dt);
    NoiseRealization noise = sample_noise(cfg.spec.wiener, cfg.spec.jumps, grid, cfg.seed,
                                          static_cast<std::uint64_t>(path_index));
    PicardResult pr = picard_solve(cfg.spec, grid, noise, tol, max_iter);

    write_file(args.out_dir + "/residuals.csv", residual_csv(pr.residuals));
    write_file(args.out_dir + "/trajectory.csv", trajectory_csv(pr.x));
    std::printf("wrote %s/residuals.csv and %s/trajectory.csv\n", args.out_dir.c_str(),
                args.out_dir.c_str());
    write_report(args, "picard_report", picard_to_json(pr));
    std::printf("iterations = %d, converged = %s, theta = %.12g\n", pr.iterations,
                pr.converged ? "yes" : "no", pr.theta_exist);
    if (pr.diverged) {
        std::fprintf(stderr, "iteration diverged; see residuals.csv\n");
        return kExitDivergence;
    }
    if (!pr.converged) {
        std::fprintf(stderr, "iteration did not reach tolerance %g in %d steps\n", tol, max_iter);
        return kExitDivergence;
    }
    return kExitOk;
}

// Reads a moment curve CSV and returns the requested columns. The file must
// have a header line naming every column.
void read_curve_csv(const std::string& path, std::vector<double>& times,
                    std::vector<double>& values) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw config_error("curve file " + path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    int t_col = -1, v_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t") t_col = static_cast<int>(i);
        if (header[i] == "mean") v_col = static_cast<int>(i);
    }
    if (t_col < 0) throw config_error("curve file " + path + " lacks required column \"t\"");
    if (v_col < 0) throw config_error("curve file " + path + " lacks required column \"mean\"");
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) <= std::max(t_col, v_col)) {
            std::ostringstream os;
            os << "curve file " << path << " row " << row << " has " << cells.size()
               << " cells; expected at least " << std::max(t_col, v_col) + 1;
            throw config_error(os.str());
        }
        try {
            times.push_back(std::stod(cells[t_col]));
            values.push_back(std::stod(cells[v_col]));
        } catch (const std::exception&) {
            std::ostringstream os;
            os << "curve file " << path << " row " << row << " holds a non-numeric cell";
            throw config_error(os.str());
        }
    }
}

int cmd_fit(const CommonArgs& args, const std::string& curve_path, double window_lo,
            double window_hi, double confidence) {
    std::vector<double> times, values;
    read_curve_csv(curve_path, times, values);
    std::vector<double> ts, vs;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= window_lo && (window_hi <= 0.0 || times[i] <= window_hi)) {
            ts.push_back(times[i]);
            vs.push_back(values[i]);
        }
    }
    DecayFit fit = fit_decay(ts, vs, confidence);
    std::printf("mu_hat = %.12g, n_hat = %.12g, r_squared = %.6g, ci = [%.12g, %.12g]\n",
                fit.mu_hat, fit.n_hat, fit.r_squared, fit.mu_ci_low, fit.mu_ci_high);
    write_report(args, "fit_report", fit_to_json(fit));
    return kExitOk;
}

int cmd_example(const CommonArgs& args, bool to_file) {
    ProblemSpec spec = make_preset(args.preset.empty() ? "builtin_example" : args.preset);
    std::string text = save_problem(spec);
    if (to_file) {
        std::string path = args.out_dir + "/" + spec.preset_name + ".json";
        write_file(path, text);
        std::printf("wrote %s\n", path.c_str());
    } else {
        std::fputs(text.c_str(), stdout);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracsde: simulation and verification toolkit for fractional neutral "
                 "stochastic systems with delay and jumps"};
    app.require_subcommand(1);

    CommonArgs check_args;
    int check_samples = 32;
    double check_tol = 1e-6;
    CLI::App* check = app.add_subcommand("check", "evaluate the closed-form criteria and the "
                                                  "numerical contractor conditions");
    add_common(check, check_args);
    check->add_option("--samples", check_samples, "Monte Carlo samples for the contractor check");
    check->add_option("--tol", check_tol, "relative slack allowed in the contractor ratios");

    CommonArgs sim_args;
    int sim_paths = 0, sim_max_iter = 0, sim_threads = -1;
    double sim_dt = 0.0, sim_tol = 0.0;
    std::string sim_method = "automatic";
    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo ensemble and moment curve");
    add_common(sim, sim_args);
    sim->add_option("--paths", sim_paths, "number of sample paths");
    sim->add_option("--dt", sim_dt, "time step");
    sim->add_option("--tol", sim_tol, "iteration tolerance (successive method)");
    sim->add_option("--max-iter", sim_max_iter, "iteration cap (successive method)");
    sim->add_option("--threads", sim_threads, "worker threads; 0 uses the hardware count");
    sim->add_option("--method", sim_method, "solver: automatic, successive, or single_pass")
        ->check(CLI::IsMember({"automatic", "successive", "single_pass"}));

    CommonArgs pic_args;
    int pic_max_iter = 0, pic_path = 0;
    double pic_dt = 0.0, pic_tol = 0.0;
    CLI::App* pic = app.add_subcommand("picard", "single path successive approximation with "
                                                 "residual history");
    add_common(pic, pic_args);
    pic->add_option("--dt", pic_dt, "time step");
    pic->add_option("--tol", pic_tol, "iteration tolerance");
    pic->add_option("--max-iter", pic_max_iter, "iteration cap");
    pic->add_option("--path", pic_path, "path index of the noise realization");

    CommonArgs fit_args;
    std::string fit_curve;
    double fit_lo = 0.0, fit_hi = 0.0, fit_conf = 0.95;
    CLI::App* fit = app.add_subcommand("fit", "exponential decay fit of a moment curve CSV");
    add_common(fit, fit_args, false);
    fit->add_option("--curve", fit_curve, "moment curve CSV with columns t and mean")->required();
    fit->add_option("--window-lo", fit_lo, "left end of the fit window");
    fit->add_option("--window-hi", fit_hi, "right end of the fit window; 0 means unbounded");
    fit->add_option("--confidence", fit_conf, "confidence level of the rate interval");

    CommonArgs ex_args;
    bool ex_to_file = false;
    CLI::App* ex = app.add_subcommand("example", "print a bundled preset configuration");
    add_common(ex, ex_args, false);
    ex->add_flag("--write", ex_to_file, "write <out>/<preset>.json instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (check->parsed()) return cmd_check(check_args, check_samples, check_tol);
        if (sim->parsed()) {
            return cmd_simulate(sim_args, sim_paths, sim_dt, sim_tol, sim_max_iter, sim_threads,
                                sim_method);
        }
        if (pic->parsed()) return cmd_picard(pic_args, pic_dt, pic_tol, pic_max_iter, pic_path);
        if (fit->parsed()) return cmd_fit(fit_args, fit_curve, fit_lo, fit_hi, fit_conf);
        if (ex->parsed()) return cmd_example(ex_args, ex_to_file);
    } catch (const fracsde::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
