#include "squeezesim/cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "squeezesim/config.hpp"
#include "squeezesim/experiments.hpp"
#include "squeezesim/records_io.hpp"

namespace squeeze {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string out;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "config file (sectioned key = value)");
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--trials", c.trials, "trials per point")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (c.seed) cfg.master_seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (cfg.experiment.excess_target_w_inv > 0)
        cfg.sim.model.excess_dephasing = calibrate_excess_dephasing(cfg.sim, cfg.experiment.excess_target_w_inv);
    fs::create_directories(cfg.output_dir);
    return cfg;
}

std::string path_in(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.output_dir) / name).string(); }

void emit(const RunConfig& cfg, const std::string& name, const std::string& csv, const json& extra,
          std::ostream& out) {
    if (!csv.empty()) write_text(path_in(cfg, name + ".csv"), csv);
    write_text(path_in(cfg, name + ".json"), sidecar_json(name, cfg, extra.dump()));
    out << "wrote " << path_in(cfg, name + (csv.empty() ? ".json" : ".csv")) << "\n";
}

int cmd_sweep(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto& e = cfg.experiment;
    const int trials = c.trials.value_or(e.trials);
    const auto res = squeezing_sweep(cfg.sim, log_grid(e.sweep_mt_min, e.sweep_mt_max, e.sweep_points), trials,
                                     cfg.master_seed, cfg.threads);
    size_t br = 0, bw = 0;
    for (size_t i = 0; i < res.rows.size(); ++i) {
        if (res.rows[i].r < res.rows[br].r) br = i;
        if (res.rows[i].w_inv > res.rows[bw].w_inv) bw = i;
    }
    const Optimum pred = max_predicted_w_inv(cfg.sim);
    json x = {{"n", res.n},
              {"trials_per_point", trials},
              {"point_seeds", res.point_seeds},
              {"excess_dephasing", cfg.sim.model.excess_dephasing},
              {"max_r_inv", {{"mt", res.rows[br].m_t}, {"value", 1 / res.rows[br].r}}},
              {"max_w_inv", {{"mt", res.rows[bw].m_t}, {"value", res.rows[bw].w_inv}}},
              {"predicted_max_w_inv", {{"mt", pred.m_t}, {"value", pred.value}}}};
    emit(cfg, "sweep", sweep_to_csv(res), x, out);
    out << "max R^-1 = " << 1 / res.rows[br].r << " at M_t = " << res.rows[br].m_t << "; max W^-1 = "
        << res.rows[bw].w_inv << " at M_t = " << res.rows[bw].m_t << "\n";
    return 0;
}

int cmd_phase(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto& e = cfg.experiment;
    SimParams sim = cfg.sim;
    sim.ensemble.set_n(e.phase_n);
    const int trials = c.trials.value_or(e.phase_trials);
    const auto css = phase_detection(sim, e.phase_psi, false, trials, derive_seed(cfg.master_seed, 0), 0,
                                     e.phase_target_w_inv, cfg.threads);
    const auto sq = phase_detection(sim, e.phase_psi, true, trials, derive_seed(cfg.master_seed, 1), 0,
                                    e.phase_target_w_inv, cfg.threads);
    auto summary = [](const PhaseDetectionResult& r) {
        return json{{"premeasure", r.premeasure}, {"psi", r.psi},       {"m_t", r.m_t},
                    {"n", r.n},                   {"trials", r.trials}, {"threshold", r.threshold},
                    {"error_rate", r.error_rate}, {"mean_applied", r.mean_applied},
                    {"mean_reference", r.mean_reference}};
    };
    emit(cfg, "phase_detect", phase_histograms_to_csv({css, sq}), {{"css", summary(css)}, {"squeezed", summary(sq)}},
         out);
    out << "error rate: css " << css.error_rate << ", squeezed " << sq.error_rate << " (M_t = " << sq.m_t << ")\n";
    return 0;
}

int cmd_scaling(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto& e = cfg.experiment;
    const auto res = n_scaling(cfg.sim, e.scaling_n, c.trials.value_or(e.scaling_trials), cfg.master_seed,
                               e.scaling_points_per_decade, e.sweep_mt_min, e.sweep_mt_max, cfg.threads);
    emit(cfg, "scaling", scaling_to_csv(res), {{"squeezed_slope", res.squeezed_slope}, {"sql_slope", res.sql_slope}},
         out);
    out << "slope dtheta^2 vs N: " << res.squeezed_slope << "; SQL dtheta vs N: " << res.sql_slope << "\n";
    return 0;
}

int cmd_fringe(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto& e = cfg.experiment;
    std::vector<double> theta;
    for (int i = 0; i < e.fringe_points; ++i) theta.push_back(kTwoPi * i / e.fringe_points);
    std::vector<double> mts = {0};
    if (e.fringe_mt > 0) mts.push_back(e.fringe_mt);
    std::string csv = "# schema=1\nmt,C,C_err,C_model\n";
    json rows = json::array();
    for (size_t i = 0; i < mts.size(); ++i) {
        const auto r = contrast_fringe(cfg.sim, mts[i], theta, c.trials.value_or(e.fringe_trials),
                                       derive_seed(cfg.master_seed, i), e.fringe_readout_mt, cfg.threads);
        const double model = mts[i] > 0 ? contrast_model(cfg.sim, mts[i]) : cfg.sim.ensemble.initial_contrast;
        csv += format_double(mts[i]) + "," + format_double(r.contrast) + "," + format_double(r.error) + "," +
               format_double(model) + "\n";
        rows.push_back({{"mt", mts[i]}, {"contrast", r.contrast}, {"error", r.error}, {"model", model}});
        out << "M_t = " << mts[i] << ": C = " << r.contrast << " +- " << r.error << "\n";
    }
    emit(cfg, "fringe", csv, {{"rows", rows}}, out);
    return 0;
}

int cmd_budget(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto rep = budget_report(cfg.sim, cfg.experiment.budget_mt);
    json rows = json::object();
    for (const auto& r : rep.rows) rows[r.term] = r.r_inv;
    emit(cfg, "budget", "# schema=1\n" + rep.to_table(), {{"m_t", rep.m_t}, {"n", rep.n}, {"r_inv", rows}}, out);
    out << rep.to_table();
    return 0;
}

int cmd_calibrate(const Common& c, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto& e = cfg.experiment;
    SimParams sim = cfg.sim;
    sim.ensemble.set_n(e.calibration_n);
    const auto res = raman_calibration(sim, e.calibration_mt, c.trials.value_or(e.calibration_trials),
                                       cfg.master_seed, cfg.sim.probe.m_t, cfg.threads);
    emit(cfg, "calibrate_raman", calibration_to_csv(res),
         {{"n", res.n}, {"down_slope_hz_per_photon", res.down_slope}, {"up_slope_hz_per_photon", res.up_slope}}, out);
    out << "down-prep slope " << res.down_slope << " Hz/photon, up-prep slope " << res.up_slope << " Hz/photon\n";
    return 0;
}

int cmd_fit(const Common& c, const std::string& in, int bootstrap, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const auto pts = read_r_points(in);
    const auto fit = fit_r(pts, bootstrap >= 0 ? bootstrap : cfg.experiment.bootstrap, cfg.master_seed);
    const char* names[] = {"r_psn", "r_tf", "r_q", "r_c"};
    const double vals[] = {fit.coeffs.r_psn, fit.coeffs.r_tf, fit.coeffs.r_q, fit.coeffs.r_c};
    json coeffs = json::object();
    for (int k = 0; k < 4; ++k) {
        coeffs[names[k]] = {{"value", vals[k]}, {"lower95", fit.lower[k]}, {"upper95", fit.upper[k]}};
        out << names[k] << " = " << vals[k] << " [" << fit.lower[k] << ", " << fit.upper[k] << "]\n";
    }
    emit(cfg, "fit", "", {{"input", in}, {"points", pts.size()}, {"resamples", fit.resamples}, {"coefficients", coeffs}},
         out);
    return 0;
}

int cmd_run(const Common& c, const std::string& protocol_path, std::ostream& out) {
    const RunConfig cfg = resolve(c);
    const Protocol proto = parse_protocol(read_text(protocol_path));
    const RecordSet rs = run_trials(proto, cfg.sim, c.trials.value_or(cfg.experiment.trials), cfg.master_seed,
                                    cfg.threads);
    json x = {{"protocol", proto.to_text()}, {"trials", rs.trials.size()}, {"labels", rs.labels}};
    const auto has = [&](const char* l) { return std::find(rs.labels.begin(), rs.labels.end(), l) != rs.labels.end(); };
    if (has("Nf") && has("Np") && rs.trials.size() >= 2) x["R"] = spin_noise_reduction(rs, "Nf", "Np");
    emit(cfg, "records", records_to_csv(rs), x, out);
    return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte Carlo simulator of cavity-QND conditional spin squeezing", "squeeze_sim"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand all help");

    Common common;
    std::string fit_in, protocol_path;
    int bootstrap = -1;
    auto* sweep = app.add_subcommand("sweep", "R, contrast and W^-1 versus probe photon number");
    auto* phase = app.add_subcommand("phase-detect", "single-shot detection of a small rotation, CSS vs squeezed");
    auto* scaling = app.add_subcommand("scaling", "optimized phase variance versus atom number");
    auto* fringe = app.add_subcommand("fringe", "contrast from a rotation fringe");
    auto* budget = app.add_subcommand("budget", "R^-1 budget table at a probe strength");
    auto* calib = app.add_subcommand("calibrate-raman", "Raman transition slopes for two preparations");
    auto* fit = app.add_subcommand("fit", "fit the four-term R(M_t) model to a CSV");
    auto* run = app.add_subcommand("run", "run an arbitrary protocol file");
    for (auto* s : {sweep, phase, scaling, fringe, budget, calib, fit, run}) add_common(s, common);
    fit->add_option("--in", fit_in, "CSV with mt and R columns")->required();
    fit->add_option("--bootstrap", bootstrap, "bootstrap resamples (default from config)");
    run->add_option("--protocol", protocol_path, "protocol text file")->required();

    if (argc <= 1) {
        err << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (sweep->parsed()) return cmd_sweep(common, out);
        if (phase->parsed()) return cmd_phase(common, out);
        if (scaling->parsed()) return cmd_scaling(common, out);
        if (fringe->parsed()) return cmd_fringe(common, out);
        if (budget->parsed()) return cmd_budget(common, out);
        if (calib->parsed()) return cmd_calibrate(common, out);
        if (fit->parsed()) return cmd_fit(common, fit_in, bootstrap, out);
        if (run->parsed()) return cmd_run(common, protocol_path, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace squeeze
