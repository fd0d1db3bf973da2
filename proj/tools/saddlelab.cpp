// saddlelab: numerical laboratory for rounding-error randomness in fixed-step
// ODE solvers near a planar saddle point.
//
// Subcommands:
//   theory           print the closed-form predictions as JSON
//   sweep            run the step-size-sweep experiment and fit the family
//   precision-scan   sweep over a list of h (or emulated p) values and
//                    regress the power law
//   validate-oracle  compare native rounding against the injected-noise model
//   trajectory       dump a single trajectory as CSV
//
// Exit codes: 0 success, 2 config rejection, 3 runtime failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "saddle/config.hpp"
#include "saddle/experiment.hpp"
#include "saddle/io.hpp"
#include "saddle/steppers.hpp"
#include "saddle/theory.hpp"
#include "saddle/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CliState {
    saddle::RunConfig cfg;
    std::string config_path;
    std::string out_dir{"."};
    std::string phi_text, theta_text;
    // captured raw so "given or not" is known per flag
    CLI::App* sub{nullptr};
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Registers the shared configuration options on a subcommand.  Option
// callbacks write through to the RunConfig, so precedence is simply
// defaults < --config file < explicit flags (CLI11 runs file loading first
// because --config is parsed in a pre-callback).
void add_common_options(CLI::App* sub, CliState& st) {
    st.sub = sub;
    sub->set_help_flag("--help", "print help");  // keep --h free for the step size
    sub->add_option("--config", st.config_path, "config file (key = value, or a manifest.json)");
    sub->add_option("--out-dir", st.out_dir, "output directory (created if missing)");
    sub->add_option("--workers", st.cfg.workers, "sweep fan-out; 0 = all cores");
    sub->add_option("--seed", st.cfg.seed, "master seed (NoiseInjection streams)");
    sub->add_option("--stepper", st.cfg.stepper, "euler | rk4 | inject");
    sub->add_option("--precision", st.cfg.precision, "single | double | emulated:<p>");
    sub->add_option("--lambda", st.cfg.lambda, "unstable eigenvalue");
    sub->add_option("--mu", st.cfg.mu, "stable eigenvalue magnitude");
    sub->add_option("--phi", st.phi_text, "rotation angle (e.g. pi/5)");
    sub->add_option("--x0", st.cfg.x0, "initial distance from the origin");
    sub->add_option("--h", st.cfg.h, "base step size");
    sub->add_option("--delta-h", st.cfg.delta_h, "step-size increment of the schedule");
    sub->add_option("--k", st.cfg.k, "schedule half-width; L = 2k+1 repetitions");
    sub->add_option("--theta", st.theta_text, "detection-line angle (e.g. pi/4)");
    sub->add_option("--bins", st.cfg.bins, "histogram bins on [0,1]");
    sub->add_option("--inject-p", st.cfg.inject_p, "injected-noise precision (fractional ok)");
    sub->add_option("--t-max", st.cfg.t_max, "per-trajectory time cap");
    sub->add_option("--max-steps", st.cfg.max_steps, "per-trajectory step budget");
}

// Resolves precedence after parsing: reload from file, then re-apply every
// flag the user actually passed.
void finalize_config(CliState& st) {
    saddle::RunConfig resolved;
    if (!st.config_path.empty())
        resolved = saddle::load_config_file(st.config_path, resolved);

    auto reapply = [&](const char* name, auto member) {
        if (st.sub->count(name) > 0) resolved.*member = st.cfg.*member;
    };
    reapply("--workers", &saddle::RunConfig::workers);
    reapply("--seed", &saddle::RunConfig::seed);
    reapply("--lambda", &saddle::RunConfig::lambda);
    reapply("--mu", &saddle::RunConfig::mu);
    reapply("--x0", &saddle::RunConfig::x0);
    reapply("--h", &saddle::RunConfig::h);
    reapply("--delta-h", &saddle::RunConfig::delta_h);
    reapply("--k", &saddle::RunConfig::k);
    reapply("--bins", &saddle::RunConfig::bins);
    reapply("--inject-p", &saddle::RunConfig::inject_p);
    reapply("--t-max", &saddle::RunConfig::t_max);
    reapply("--max-steps", &saddle::RunConfig::max_steps);
    if (st.sub->count("--stepper") > 0) resolved.stepper = st.cfg.stepper;
    if (st.sub->count("--precision") > 0) resolved.precision = st.cfg.precision;
    if (st.sub->count("--phi") > 0) resolved.phi = saddle::parse_angle(st.phi_text);
    if (st.sub->count("--theta") > 0) resolved.theta = saddle::parse_angle(st.theta_text);
    st.cfg = resolved;
}

int effective_p_floor(const saddle::PrecisionPolicy& policy) {
    return policy.fraction_bits();
}

fs::path prepare_out_dir(const CliState& st) {
    fs::path dir(st.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec && !fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory: " + dir.string());
    return dir;
}

// ---------------------------------------------------------------------------
// theory

int cmd_theory(CliState& st, const std::string& p_list_text) {
    finalize_config(st);
    const saddle::SaddleSpec spec{st.cfg.lambda, st.cfg.mu, st.cfg.phi, st.cfg.x0};
    spec.validate();

    std::vector<double> ps;
    if (p_list_text.empty()) {
        const auto policy = saddle::parse_precision(st.cfg.precision);
        ps = {static_cast<double>(policy.fraction_bits()),
              static_cast<double>(policy.fraction_bits() + 1)};
    } else {
        for (const auto& item : split_list(p_list_text))
            ps.push_back(std::stod(item));
    }

    json out;
    out["inputs"] = {{"lambda", spec.lambda}, {"mu", spec.mu},     {"phi", spec.phi},
                     {"x0", spec.x0_magnitude}, {"h", st.cfg.h}};
    out["predictions"] = json::array();
    bool degenerate = false;
    for (double p : ps) {
        const auto t = saddle::predict(spec, st.cfg.h, p);
        json jt = saddle::theory_to_json(t);
        jt["p"] = p;
        if (std::isfinite(t.a_predicted)) jt["a_h_invsqrt"] = t.a_predicted / std::sqrt(st.cfg.h);
        out["predictions"].push_back(jt);
        if (t.sigma_sq == 0.0) degenerate = true;
    }
    if (degenerate)
        out["warning"] = "sigma_sq = 0 for this angle: no randomness is predicted";
    std::cout << out.dump(2) << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

json theory_bracket_json(const saddle::SweepConfig& sc) {
    json j;
    if (sc.stepper == saddle::StepperKind::NoiseInjection) {
        j["p"] = sc.inject_p;
        j["at_p"] = saddle::theory_to_json(saddle::predict(sc.spec, sc.base_h, sc.inject_p));
    } else {
        const int lo = sc.policy.fraction_bits();
        j["p_low"] = lo;
        j["p_high"] = lo + 1;
        j["at_p_low"] = saddle::theory_to_json(saddle::predict(sc.spec, sc.base_h, lo));
        j["at_p_high"] = saddle::theory_to_json(saddle::predict(sc.spec, sc.base_h, lo + 1));
    }
    return j;
}

int cmd_sweep(CliState& st) {
    finalize_config(st);
    const saddle::SweepConfig sc = saddle::to_sweep_config(st.cfg);
    sc.validate();  // reject before touching the filesystem
    const fs::path dir = prepare_out_dir(st);

    const saddle::SweepResult res = saddle::run_sweep(sc, st.cfg.workers);
    saddle::write_manifest(dir, st.cfg, "sweep");
    saddle::write_hits_csv(dir / "hits.csv", res.hits);

    json out{{"sweep", saddle::sweep_stats_to_json(res)},
             {"theory", theory_bracket_json(sc)}};
    int code = kExitOk;
    try {
        const auto hist = saddle::build_histogram(res.hits, sc.bins);
        const auto fit = saddle::fit_a(res.hits, hist, res.n_no_hit);
        saddle::write_histogram_csv(dir / "histogram.csv", hist, fit.a_mle);
        out["fit"] = saddle::fit_to_json(fit);
        out["fit"]["a_h_invsqrt"] = fit.a_mle / std::sqrt(sc.base_h);
    } catch (const std::exception& e) {
        out["fit_error"] = e.what();
        code = kExitRuntime;
    }
    if (res.aggregate_error) code = kExitRuntime;
    saddle::write_json(dir / "fit.json", out);
    std::cout << out.dump(2) << std::endl;
    return code;
}

// ---------------------------------------------------------------------------
// precision-scan

int cmd_precision_scan(CliState& st, const std::string& h_list_text,
                       const std::string& p_list_text) {
    finalize_config(st);
    if (h_list_text.empty() == p_list_text.empty())
        throw saddle::config_error("precision-scan: give exactly one of --h-list / --p-list");

    const bool h_scan = !h_list_text.empty();
    const auto items = split_list(h_scan ? h_list_text : p_list_text);
    if (items.size() < 4 && h_scan)
        throw saddle::config_error("precision-scan: need at least 4 scan points");
    if (items.size() < 2 && !h_scan)
        throw saddle::config_error("precision-scan: need at least 2 p values");

    // Validate every point before any computation.
    std::vector<saddle::RunConfig> points;
    for (const auto& item : items) {
        saddle::RunConfig pc = st.cfg;
        if (h_scan)
            pc.h = std::stod(item);
        else
            pc.precision = "emulated:" + item;
        saddle::to_sweep_config(pc).validate();
        points.push_back(pc);
    }
    const fs::path dir = prepare_out_dir(st);
    saddle::write_manifest(dir, st.cfg, h_scan ? "precision-scan --h-list " + h_list_text
                                               : "precision-scan --p-list " + p_list_text);

    std::ofstream table(dir / "scan.csv");
    table << (h_scan ? "h" : "p") << ",a_mle,a_stderr,n_hits\n";

    std::vector<std::pair<double, double>> ha;     // (h, a) for the regression
    std::vector<std::pair<double, double>> pa;     // (p, a)
    json gaps = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pc = points[i];
        const double coord = h_scan ? pc.h : std::stod(items[i]);
        try {
            const auto sc = saddle::to_sweep_config(pc);
            const auto res = saddle::run_sweep(sc, st.cfg.workers);
            const auto hist = saddle::build_histogram(res.hits, sc.bins);
            const auto fit = saddle::fit_a(res.hits, hist, res.n_no_hit);
            table << saddle::format_real(coord) << ',' << saddle::format_real(fit.a_mle) << ','
                  << saddle::format_real(fit.a_stderr) << ',' << fit.n_hits << '\n';
            if (h_scan)
                ha.emplace_back(pc.h, fit.a_mle);
            else
                pa.emplace_back(coord, fit.a_mle);
        } catch (const std::exception& e) {
            gaps.push_back({{"point", coord}, {"error", e.what()}});
            table << saddle::format_real(coord) << ",,,0\n";
        }
    }

    json out;
    out["gaps"] = gaps;
    int code = gaps.empty() ? kExitOk : kExitRuntime;
    try {
        if (h_scan) {
            const auto reg = saddle::exponent_regression(ha);
            out["regression"] = {{"slope", reg.slope},
                                 {"intercept", reg.intercept},
                                 {"exp_intercept", std::exp(reg.intercept)},
                                 {"r_sq", reg.r_sq}};
        } else {
            // log2(a) against p; the model predicts one doubling per bit.
            std::vector<double> xs, ys;
            json ratios = json::array();
            for (const auto& [p, a] : pa) {
                xs.push_back(p);
                ys.push_back(std::log2(a));
            }
            for (std::size_t i = 1; i < pa.size(); ++i) {
                const double dp = pa[i].first - pa[i - 1].first;
                ratios.push_back({{"delta_p", dp},
                                  {"a_ratio", pa[i].second / pa[i - 1].second},
                                  {"expected", std::exp2(dp)}});
            }
            out["ratios"] = ratios;
            if (xs.size() >= 2) {
                const auto fit = saddle::least_squares(xs, ys);
                out["regression"] = {{"slope_per_bit", fit.slope}, {"r_sq", fit.r_sq}};
            }
        }
    } catch (const std::exception& e) {
        out["regression_error"] = e.what();
        code = kExitRuntime;
    }
    saddle::write_json(dir / "regression.json", out);
    std::cout << out.dump(2) << std::endl;
    return code;
}

// ---------------------------------------------------------------------------
// validate-oracle

int cmd_validate_oracle(CliState& st) {
    finalize_config(st);
    saddle::RunConfig native_cfg = st.cfg;
    saddle::RunConfig injected_cfg = st.cfg;
    injected_cfg.stepper = "inject";

    const auto sc_native = saddle::to_sweep_config(native_cfg);
    const auto sc_injected = saddle::to_sweep_config(injected_cfg);
    sc_native.validate();
    sc_injected.validate();
    const fs::path dir = prepare_out_dir(st);
    saddle::write_manifest(dir, st.cfg, "validate-oracle");

    const auto rep = saddle::validate_oracle(sc_native, sc_injected, st.cfg.workers);
    json out = saddle::ks_to_json(rep);
    out["native_precision"] = native_cfg.precision;
    out["inject_p"] = st.cfg.inject_p;
    out["verdict"] = rep.agree_at_1pct ? "model agrees at the 1% level"
                                       : "model rejected at the 1% level";
    saddle::write_json(dir / "ks_report.json", out);
    std::cout << out.dump(2) << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// trajectory

int cmd_trajectory(CliState& st, long stride, long long max_rows, bool no_detect) {
    finalize_config(st);
    if (stride < 1) throw saddle::config_error("trajectory: --stride must be >= 1");
    const saddle::SweepConfig sc = saddle::to_sweep_config(st.cfg);
    sc.spec.validate();
    const double expected_steps = sc.t_max / sc.base_h;
    if (expected_steps / static_cast<double>(stride) > static_cast<double>(max_rows))
        throw saddle::config_error(
            "trajectory: would emit more than max-rows rows; raise --stride");
    const fs::path dir = prepare_out_dir(st);
    saddle::write_manifest(dir, st.cfg, "trajectory");

    saddle::TrajectoryConfig tc;
    tc.stepper = sc.stepper;
    tc.policy = sc.policy;
    tc.h = sc.base_h;
    tc.t_max = sc.t_max;
    tc.max_steps = sc.max_steps;
    tc.spec = sc.spec;
    tc.inject_p = sc.inject_p;
    tc.stream_seed = saddle::SplitMix64::derive(sc.master_seed, 1);

    std::ofstream csv(dir / "trajectory.csv");
    csv << "step_index,t,c1,c2\n";
    const auto stop = no_detect ? saddle::StopCondition::none()
                                : saddle::StopCondition::line(sc.theta);
    const auto out = saddle::run_trajectory(
        tc, stop, [&](long long n, double t, const saddle::Vec2& x) {
            if (n % stride == 0)
                csv << n << ',' << saddle::format_real(t) << ','
                    << saddle::format_real(x.c1) << ',' << saddle::format_real(x.c2) << '\n';
        });

    json summary{{"steps", out.steps},
                 {"t_end", out.t_end},
                 {"final", {out.final_state.c1, out.final_state.c2}}};
    switch (out.reason) {
        case saddle::StopReason::LineHit:
            summary["outcome"] = "hit";
            summary["hit"] = {{"y", out.hit->y},
                              {"t_hit", out.hit->t_hit},
                              {"branch", out.hit->branch}};
            break;
        case saddle::StopReason::TimeLimit: summary["outcome"] = "t_max"; break;
        case saddle::StopReason::StepBudget: summary["outcome"] = "step_budget"; break;
        case saddle::StopReason::Diverged: summary["outcome"] = "diverged"; break;
    }
    std::cout << summary.dump(2) << std::endl;
    return out.reason == saddle::StopReason::Diverged ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("saddlelab ") + saddle::kVersion +
                 " - rounding-error randomness near a saddle point"};
    app.require_subcommand(1);

    CliState st_theory, st_sweep, st_scan, st_oracle, st_traj;
    std::string p_list, h_list, scan_p_list;
    long stride = 1;
    long long max_rows = 2000000;
    bool no_detect = false;

    auto* theory = app.add_subcommand("theory", "print closed-form predictions as JSON");
    add_common_options(theory, st_theory);
    theory->add_option("--p", p_list, "precision bits; comma list emits brackets (e.g. 52,53)");

    auto* sweep = app.add_subcommand("sweep", "run the step-size sweep and fit the family");
    add_common_options(sweep, st_sweep);

    auto* scan = app.add_subcommand("precision-scan",
                                    "sweep per h (or emulated p) and regress the power law");
    add_common_options(scan, st_scan);
    scan->add_option("--h-list", h_list, "comma list of base step sizes");
    scan->add_option("--p-list", scan_p_list, "comma list of emulated precisions");

    auto* oracle = app.add_subcommand("validate-oracle",
                                      "compare native rounding with the injected-noise model");
    add_common_options(oracle, st_oracle);

    auto* traj = app.add_subcommand("trajectory", "dump a single trajectory as CSV");
    add_common_options(traj, st_traj);
    traj->add_option("--stride", stride, "emit every Nth step");
    traj->add_option("--max-rows", max_rows, "row-count guard");
    traj->add_flag("--no-detect", no_detect, "integrate to t_max without hit detection");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (theory->parsed()) return cmd_theory(st_theory, p_list);
        if (sweep->parsed()) return cmd_sweep(st_sweep);
        if (scan->parsed()) return cmd_precision_scan(st_scan, h_list, scan_p_list);
        if (oracle->parsed()) return cmd_validate_oracle(st_oracle);
        if (traj->parsed()) return cmd_trajectory(st_traj, stride, max_rows, no_detect);
    } catch (const saddle::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
