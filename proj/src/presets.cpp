#include "ergo/presets.hpp"

#include "ergo/report.hpp"

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace ergo {

namespace {

constexpr std::uint64_t kReproduceSeed = 1;

int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

FiniteActionAgent bench_agent(bool activating) {
    // Binary agent; transition law depends smoothly on the signal, bounded
    // away from 0 so every joint action stays reachable.
    const double rate = 100.0;
    ProbabilityFunction p1, p0;
    if (activating) { // switches on as the signal approaches 5
        p1 = ProbabilityFunction::logistic(0.02, 0.95, rate, 5.0, 0.02);
        p0 = ProbabilityFunction::logistic(0.98, -0.95, rate, 5.0, 0.03);
    } else { // switches off once the signal passes 1
        p1 = ProbabilityFunction::logistic(0.98, -0.95, rate, 1.0, 0.03);
        p0 = ProbabilityFunction::logistic(0.02, 0.95, rate, 1.0, 0.02);
    }
    return FiniteActionAgent::make({Rational(0), Rational(1)}, {p0, p1});
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

struct Emitter {
    std::string dir;
    RunManifest manifest;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit Emitter(std::string out_dir, std::string digest) : dir(std::move(out_dir)) {
        std::filesystem::create_directories(dir);
        manifest.config_digest = std::move(digest);
    }
    std::string file(const std::string& name) {
        manifest.files.push_back(name);
        return join_path(dir, name);
    }
    void finish() {
        manifest.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        manifest.files.push_back("manifest.json");
        write_manifest(join_path(dir, "manifest.json"), manifest);
    }
};

std::vector<double> iota_steps(long n) {
    std::vector<double> k(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) k[static_cast<std::size_t>(i)] = static_cast<double>(i);
    return k;
}

std::vector<double> band(const std::vector<double>& mean, const std::vector<double>& std_,
                         double sign) {
    std::vector<double> out(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] + sign * std_[i];
    return out;
}

const char* kPalette[4] = {"#1f6feb", "#d73a49", "#28a745", "#6f42c1"};

std::string evidence_str(const VerdictEvidence& e) {
    std::ostringstream os;
    bool first = true;
    auto sep = [&] {
        if (!first) os << ", ";
        first = false;
    };
    if (e.delta) { sep(); os << "delta=" << *e.delta; }
    if (e.delta_prime) { sep(); os << "delta'=" << *e.delta_prime; }
    if (e.max_lipschitz) { sep(); os << "max_l=" << *e.max_lipschitz; }
    if (e.contraction_index) { sep(); os << "m=" << *e.contraction_index; }
    if (e.contractivity_margin) { sep(); os << "margin=" << *e.contractivity_margin; }
    if (e.primitivity_exponent) { sep(); os << "exponent=" << *e.primitivity_exponent; }
    if (e.group_gcd) { sep(); os << "gcd=" << e.group_gcd->to_string(); }
    if (e.pole) {
        sep();
        os << "pole=" << e.pole->value.real();
        if (std::abs(e.pole->value.imag()) > 1e-12) os << "+" << e.pole->value.imag() << "i";
    }
    if (e.invariant_measure_exists) {
        sep();
        os << "invariant_measure_exists=" << (*e.invariant_measure_exists ? "yes" : "no");
    }
    return first ? std::string("-") : os.str();
}

MonteCarloSummary bench_mc(BenchController c, double xc0, const std::string& obs, long horizon,
                           long paths, std::uint64_t seed, int workers) {
    const ClosedLoopSystem sys = bench_system(c, xc0);
    return monte_carlo(sys, initial_state(sys), horizon, paths, seed, {obs}, workers);
}

} // namespace

LinearBlock pi_controller(const Rational& kappa, const Rational& alpha) {
    // kappa (z - alpha) / (z - 1)
    return tf_to_ss({kappa, -(kappa * alpha)}, {Rational(1), Rational(-1)});
}

LinearBlock lag_controller(const Rational& kappa, const Rational& alpha, const Rational& beta) {
    // kappa (z - alpha) / (z - beta)
    return tf_to_ss({kappa, -(kappa * alpha)}, {Rational(1), -beta});
}

LinearBlock fir_filter(const std::vector<Rational>& taps) {
    return tf_to_ss(taps, {Rational(1)});
}

ClosedLoopSystem bench_system(BenchController controller, double xc0) {
    ClosedLoopSystem sys;
    for (int i = 0; i < 10; ++i) {
        const bool activating = i < 5;
        sys.agents.emplace_back(bench_agent(activating));
        Vector x0(1);
        x0(0) = activating ? 1.0 : 0.0; // activating agents start on
        sys.agent_init.push_back(x0);
    }
    sys.filter = fir_filter({Rational(1, 2), Rational(1, 2)});
    sys.filter_init = Vector::Zero(1);
    if (controller == BenchController::pi)
        sys.controller = pi_controller(Rational(1, 10), Rational(-4));
    else
        sys.controller = lag_controller(Rational(1, 10), Rational(-401, 100), Rational(99, 100));
    sys.controller_init = Vector::Constant(1, xc0);
    sys.r = 5.0;
    sys.r_exact = Rational(5);
    return sys;
}

int run_simulate(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
    Emitter em(out_dir, cfg.digest);
    const SimState init = initial_state(cfg.system);
    const auto mc = monte_carlo(cfg.system, init, cfg.horizon, cfg.n_paths, cfg.seed,
                                cfg.observables, cfg.workers);

    const auto ks = iota_steps(cfg.horizon);
    {
        std::vector<std::string> header{"k"};
        std::vector<std::vector<double>> cols{ks};
        for (std::size_t o = 0; o < cfg.observables.size(); ++o) {
            header.push_back("mean_" + cfg.observables[o]);
            header.push_back("std_" + cfg.observables[o]);
            cols.push_back(mc.mean[o]);
            cols.push_back(mc.stddev[o]);
        }
        write_csv(em.file("summary.csv"), header, cols);
    }
    {
        const Trajectory traj =
            simulate_path(cfg.system, init, cfg.horizon, cfg.seed, 0);
        std::vector<std::string> header{"k", "y", "yhat", "e", "pi"};
        const std::size_t n_agents = cfg.system.agents.size();
        for (std::size_t i = 1; i <= n_agents; ++i) header.push_back("x" + std::to_string(i));
        std::vector<std::vector<double>> cols(header.size());
        for (const auto& rec : traj.records) {
            std::size_t c = 0;
            cols[c++].push_back(static_cast<double>(rec.k));
            cols[c++].push_back(rec.y);
            cols[c++].push_back(rec.yhat);
            cols[c++].push_back(rec.e);
            cols[c++].push_back(rec.pi);
            for (std::size_t i = 0; i < n_agents; ++i) cols[c++].push_back(rec.agent_x[i]);
        }
        write_csv(em.file("path0.csv"), header, cols);
    }
    for (std::size_t o = 0; o < cfg.observables.size(); ++o) {
        SvgSeries s;
        s.x = ks;
        s.y = mc.mean[o];
        s.band_lo = band(mc.mean[o], mc.stddev[o], -1.0);
        s.band_hi = band(mc.mean[o], mc.stddev[o], 1.0);
        s.label = "mean " + cfg.observables[o];
        write_svg_chart(em.file(cfg.observables[o] + ".svg"),
                        "mean of " + cfg.observables[o] + " across paths", "step k",
                        cfg.observables[o], {s});
    }
    em.finish();

    log << "paths: " << mc.n_paths << " (diverged " << mc.n_diverged << ")\n";
    log << "infeasible fraction (y > r): " << mc.infeasible_fraction << "\n";
    log << "wrote " << em.manifest.files.size() << " files to " << out_dir << "\n";
    return 0;
}

int run_certify(const ExperimentConfig& cfg, std::ostream& out) {
    struct Row {
        const char* name;
        ErgodicityVerdict (*fn)(const ClosedLoopSystem&);
    };
    const Row rows[] = {
        {"thm4_linear", certify_thm4_linear},
        {"thm5_lipschitz", certify_thm5_lipschitz},
        {"thm6_finite", certify_thm6_finite},
        {"thm3_unit_pole", certify_thm3_negative},
    };

    bool any_positive = false, any_negative = false;
    out << std::left << std::setw(16) << "certificate" << std::setw(22) << "status"
        << "evidence\n";
    for (const auto& row : rows) {
        out << std::left << std::setw(16) << row.name;
        try {
            const ErgodicityVerdict v = row.fn(cfg.system);
            any_positive = any_positive || v.status == VerdictStatus::uniquely_ergodic;
            any_negative = any_negative || v.status == VerdictStatus::not_uniquely_ergodic;
            out << std::setw(22) << to_string(v.status) << evidence_str(v.evidence) << "\n";
            for (const auto& r : v.reasons) out << std::setw(38) << "" << "- " << r << "\n";
        } catch (const std::exception& e) {
            out << std::setw(22) << "n/a" << e.what() << "\n";
        }
    }

    const int code = any_positive ? 0 : any_negative ? 2 : 3;
    out << "overall: "
        << (code == 0 ? "uniquely ergodic (positive certificate)"
                      : code == 2 ? "not uniquely ergodic (negative certificate)"
                                  : "inconclusive")
        << "\n";
    return code;
}

namespace {

int reproduce_fig2(Emitter& em, long /*paths*/, std::ostream& log) {
    // a single path regardless of the requested count
    const ClosedLoopSystem sys = bench_system(BenchController::pi, 50.0);
    const long horizon = 1000;
    const Trajectory traj =
        simulate_path(sys, initial_state(sys), horizon, kReproduceSeed, 0);

    std::vector<std::vector<double>> cols(4);
    for (const auto& rec : traj.records) {
        cols[0].push_back(static_cast<double>(rec.k));
        cols[1].push_back(rec.yhat);
        cols[2].push_back(rec.y);
        cols[3].push_back(rec.pi);
    }
    write_csv(em.file("fig2_trace.csv"), {"k", "yhat", "y", "pi"}, cols);

    const auto alphabet = filter_output_alphabet(sys);
    std::vector<std::vector<std::string>> rows;
    std::vector<double> hlines;
    for (const auto& q : alphabet) {
        rows.push_back({q.to_string(), format_shortest(q.to_double())});
        hlines.push_back(q.to_double());
    }
    write_csv_rows(em.file("fig2_alphabet.csv"), {"value_exact", "value"}, rows);

    SvgSeries s;
    s.x = cols[0];
    s.y = cols[1];
    s.label = "yhat";
    write_svg_chart(em.file("fig2_yhat.svg"), "filtered output vs the finite alphabet", "step k",
                    "yhat", {s}, hlines);
    log << "alphabet size: " << alphabet.size() << "\n";
    return 0;
}

int reproduce_fig3(Emitter& em, long paths, std::ostream& log) {
    const long horizon = 1001;
    const int workers = default_workers();
    const auto pi = bench_mc(BenchController::pi, 50.0, "y", horizon, paths, kReproduceSeed, workers);
    const auto lag = bench_mc(BenchController::lag, 50.0, "y", horizon, paths, kReproduceSeed, workers);

    const auto ks = iota_steps(horizon);
    write_csv(em.file("fig3_mean_y.csv"),
              {"k", "mean_y_pi", "std_y_pi", "mean_y_lag", "std_y_lag"},
              {ks, pi.mean[0], pi.stddev[0], lag.mean[0], lag.stddev[0]});

    std::vector<SvgSeries> series(2);
    series[0] = {ks, pi.mean[0], band(pi.mean[0], pi.stddev[0], -1), band(pi.mean[0], pi.stddev[0], 1),
                 kPalette[0], "y (pi)"};
    series[1] = {ks, lag.mean[0], band(lag.mean[0], lag.stddev[0], -1),
                 band(lag.mean[0], lag.stddev[0], 1), kPalette[1], "y (lag)"};
    write_svg_chart(em.file("fig3_mean_y.svg"), "aggregate output: mean and std band", "step k",
                    "y", series, {5.0});
    log << "final mean y: pi=" << pi.mean[0].back() << " lag=" << lag.mean[0].back() << "\n";
    return 0;
}

int reproduce_fig4(Emitter& em, long paths, std::ostream& log) {
    const long horizon = 1001;
    const int workers = default_workers();
    const auto pi_p = bench_mc(BenchController::pi, 50.0, "x1", horizon, paths, kReproduceSeed, workers);
    const auto pi_m = bench_mc(BenchController::pi, -50.0, "x1", horizon, paths, kReproduceSeed, workers);
    const auto lag_p = bench_mc(BenchController::lag, 50.0, "x1", horizon, paths, kReproduceSeed, workers);
    const auto lag_m = bench_mc(BenchController::lag, -50.0, "x1", horizon, paths, kReproduceSeed, workers);

    const auto ks = iota_steps(horizon);
    write_csv(em.file("fig4_mean_x1.csv"),
              {"k", "mean_x1_pi_p50", "std_x1_pi_p50", "mean_x1_pi_m50", "std_x1_pi_m50",
               "mean_x1_lag_p50", "std_x1_lag_p50", "mean_x1_lag_m50", "std_x1_lag_m50"},
              {ks, pi_p.mean[0], pi_p.stddev[0], pi_m.mean[0], pi_m.stddev[0], lag_p.mean[0],
               lag_p.stddev[0], lag_m.mean[0], lag_m.stddev[0]});

    std::vector<SvgSeries> series(4);
    series[0] = {ks, pi_p.mean[0], {}, {}, kPalette[0], "x1 (pi, xc0=+50)"};
    series[1] = {ks, pi_m.mean[0], {}, {}, kPalette[1], "x1 (pi, xc0=-50)"};
    series[2] = {ks, lag_p.mean[0], {}, {}, kPalette[2], "x1 (lag, xc0=+50)"};
    series[3] = {ks, lag_m.mean[0], {}, {}, kPalette[3], "x1 (lag, xc0=-50)"};
    write_svg_chart(em.file("fig4_mean_x1.svg"),
                    "mean of x1: initial-condition dependence", "step k", "x1", series);
    log << "pi gap at k=1000: "
        << std::abs(pi_p.mean[0].back() - pi_m.mean[0].back()) << "\n";
    return 0;
}

int reproduce_fig5(Emitter& em, long paths, std::ostream& log) {
    const long horizon = 1001;
    const int workers = default_workers();
    std::vector<double> xc0s, pi_mean, pi_std, lag_mean, lag_std;
    for (int i = 0; i <= 20; ++i) {
        const double xc0 = -50.0 + 5.0 * i;
        const auto pi = bench_mc(BenchController::pi, xc0, "x1", horizon, paths, kReproduceSeed, workers);
        const auto lag = bench_mc(BenchController::lag, xc0, "x1", horizon, paths, kReproduceSeed, workers);
        xc0s.push_back(xc0);
        pi_mean.push_back(pi.mean[0].back());
        pi_std.push_back(pi.stddev[0].back());
        lag_mean.push_back(lag.mean[0].back());
        lag_std.push_back(lag.stddev[0].back());
        log << "xc0=" << xc0 << " pi=" << pi_mean.back() << " lag=" << lag_mean.back() << "\n";
    }
    write_csv(em.file("fig5_sweep.csv"),
              {"xc0", "mean_x1_final_pi", "std_x1_final_pi", "mean_x1_final_lag",
               "std_x1_final_lag"},
              {xc0s, pi_mean, pi_std, lag_mean, lag_std});

    std::vector<SvgSeries> series(2);
    series[0] = {xc0s, pi_mean, {}, {}, kPalette[0], "x1(1000) (pi)"};
    series[1] = {xc0s, lag_mean, {}, {}, kPalette[1], "x1(1000) (lag)"};
    write_svg_chart(em.file("fig5_sweep.svg"),
                    "long-run mean of x1 vs initial controller state", "xc0", "mean x1(1000)",
                    series);
    return 0;
}

int reproduce_fig6(Emitter& em, long paths, std::ostream& log) {
    const long horizon = 1001;
    const int workers = default_workers();
    const auto pi_p = bench_mc(BenchController::pi, 50.0, "pi", horizon, paths, kReproduceSeed, workers);
    const auto pi_m = bench_mc(BenchController::pi, -50.0, "pi", horizon, paths, kReproduceSeed, workers);
    const auto lag_p = bench_mc(BenchController::lag, 50.0, "pi", horizon, paths, kReproduceSeed, workers);
    const auto lag_m = bench_mc(BenchController::lag, -50.0, "pi", horizon, paths, kReproduceSeed, workers);

    const auto ks = iota_steps(horizon);
    write_csv(em.file("fig6_mean_pi.csv"),
              {"k", "mean_pi_pi_p50", "std_pi_pi_p50", "mean_pi_pi_m50", "std_pi_pi_m50",
               "mean_pi_lag_p50", "std_pi_lag_p50", "mean_pi_lag_m50", "std_pi_lag_m50"},
              {ks, pi_p.mean[0], pi_p.stddev[0], pi_m.mean[0], pi_m.stddev[0], lag_p.mean[0],
               lag_p.stddev[0], lag_m.mean[0], lag_m.stddev[0]});

    std::vector<SvgSeries> series(4);
    series[0] = {ks, pi_p.mean[0], {}, {}, kPalette[0], "pi (pi ctrl, +50)"};
    series[1] = {ks, pi_m.mean[0], {}, {}, kPalette[1], "pi (pi ctrl, -50)"};
    series[2] = {ks, lag_p.mean[0], {}, {}, kPalette[2], "pi (lag ctrl, +50)"};
    series[3] = {ks, lag_m.mean[0], {}, {}, kPalette[3], "pi (lag ctrl, -50)"};
    write_svg_chart(em.file("fig6_mean_pi.svg"), "mean broadcast signal", "step k", "pi", series);
    log << "lag signal settles near " << lag_p.mean[0].back() << "\n";
    return 0;
}

} // namespace

int run_reproduce(int figure, const std::string& out_dir, bool fast, std::ostream& log,
                  long paths_override) {
    const long paths = paths_override > 0 ? paths_override : (fast ? 200 : 2000);
    nlohmann::json meta{{"preset", "bench"}, {"figure", figure}, {"paths", paths},
                        {"seed", kReproduceSeed}};
    Emitter em(out_dir, config_digest(meta));
    int rc = 0;
    switch (figure) {
        case 2: rc = reproduce_fig2(em, paths, log); break;
        case 3: rc = reproduce_fig3(em, paths, log); break;
        case 4: rc = reproduce_fig4(em, paths, log); break;
        case 5: rc = reproduce_fig5(em, paths, log); break;
        case 6: rc = reproduce_fig6(em, paths, log); break;
        default: throw std::invalid_argument("unknown figure id (expected 2..6)");
    }
    em.finish();
    log << "wrote " << em.manifest.files.size() << " files to " << out_dir << "\n";
    return rc;
}

int run_sweep(const nlohmann::json& base_config, const std::string& param_path,
              const std::vector<std::string>& values, const std::string& out_dir,
              std::ostream& log) {
    Emitter em(out_dir, config_digest(base_config));

    std::vector<std::string> header{"value"};
    std::vector<std::vector<double>> cols;
    std::vector<double> xs;
    std::vector<std::vector<double>> finals, final_stds, timeavgs;
    std::vector<std::string> obs_names;

    if (values.empty()) {
        log << "warning: empty value list; emitting header-only CSV\n";
        write_csv(em.file("sweep.csv"), header, {std::vector<double>{}});
        em.finish();
        return 0;
    }

    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        nlohmann::json patched = base_config;
        apply_override(patched, param_path, values[vi]);
        const ExperimentConfig cfg = config_from_json(patched);
        if (vi == 0) {
            obs_names = cfg.observables;
            finals.assign(obs_names.size(), {});
            final_stds.assign(obs_names.size(), {});
            timeavgs.assign(obs_names.size(), {});
        }
        const auto mc = monte_carlo(cfg.system, initial_state(cfg.system), cfg.horizon,
                                    cfg.n_paths, cfg.seed, cfg.observables, cfg.workers);
        double x;
        try {
            x = std::stod(values[vi]);
        } catch (...) {
            x = static_cast<double>(vi);
        }
        xs.push_back(x);
        for (std::size_t o = 0; o < obs_names.size(); ++o) {
            finals[o].push_back(mc.mean[o].back());
            final_stds[o].push_back(mc.stddev[o].back());
            double acc = 0.0;
            long n = 0;
            for (long k = cfg.burn_in; k < cfg.horizon; ++k) {
                acc += mc.mean[o][static_cast<std::size_t>(k)];
                ++n;
            }
            timeavgs[o].push_back(n ? acc / static_cast<double>(n) : 0.0);
        }
        log << param_path << "=" << values[vi] << " done\n";
    }

    cols.push_back(xs);
    for (std::size_t o = 0; o < obs_names.size(); ++o) {
        header.push_back("final_mean_" + obs_names[o]);
        header.push_back("final_std_" + obs_names[o]);
        header.push_back("timeavg_" + obs_names[o]);
        cols.push_back(finals[o]);
        cols.push_back(final_stds[o]);
        cols.push_back(timeavgs[o]);
    }
    write_csv(em.file("sweep.csv"), header, cols);

    SvgSeries s;
    s.x = xs;
    s.y = finals[0];
    s.label = "final mean " + obs_names[0];
    write_svg_chart(em.file("sweep.svg"), "sweep of " + param_path, param_path,
                    "final mean " + obs_names[0], {s});
    em.finish();
    return 0;
}

} // namespace ergo
