// Acceptance gate for the benchmark ensemble: nine end-to-end criteria, one
// pass/fail line each, nonzero exit when any fails. Tolerances are pinned
// here; the Monte Carlo bands come from a ten-seed pilot at 2000 paths x
// 1001 steps (seeds 1..10, window k in [200, 1000]):
//   pi:  window means 4.99948 +/- 0.00029 across seeds, max |mean - 5| 0.000998
//   lag: window mean 4.86335, cross-seed standard error 1.26e-4
#include "ergo/ergodicity.hpp"
#include "ergo/presets.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ergo;
namespace fs = std::filesystem;

namespace {

constexpr double kRegulationBand = 0.3;  // |window mean - 5| allowance, pi
constexpr double kPilotLagSE = 1.260e-4; // pilot standard error of the lag window mean
constexpr int kWorkers = 8;              // results are worker-count invariant

std::string config_path(const char* name) {
    return std::string(ERGO_CONFIG_DIR) + "/" + name;
}

struct Result {
    bool ok = false;
    std::string detail;
};

double window_mean(const std::vector<double>& series, long lo, long hi) {
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) acc += series[static_cast<std::size_t>(k)];
    return acc / static_cast<double>(hi - lo + 1);
}

std::string fmt(double x, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

// --- 1, 2: window mean of y under the shipped presets ---------------------

double preset_window_mean(const char* cfg_name) {
    const ExperimentConfig cfg = load_config(config_path(cfg_name));
    const auto mc = monte_carlo(cfg.system, initial_state(cfg.system), cfg.horizon, cfg.n_paths,
                                cfg.seed, {"y"}, kWorkers);
    return window_mean(mc.mean[0], 200, 1000);
}

Result criterion_regulation() {
    const double m = preset_window_mean("bench_pi.json");
    return {std::abs(m - 5.0) <= kRegulationBand,
            "pi window mean y = " + fmt(m, 8) + ", band 5 +/- " + fmt(kRegulationBand)};
}

Result criterion_lag_offset() {
    const double m = preset_window_mean("bench_lag.json");
    const double threshold = 3.0 * kPilotLagSE;
    return {std::abs(m - 5.0) > threshold,
            "lag window mean y = " + fmt(m, 8) + ", |offset| = " + fmt(std::abs(m - 5.0)) +
                " vs 3 SE = " + fmt(threshold)};
}

// --- 3: mean x1 must depend on the controller IC under pi, not under lag ---

Result criterion_ic_sensitivity() {
    auto gap = [](BenchController c) {
        const ClosedLoopSystem sys = bench_system(c, 50.0);
        SimState a = initial_state(sys);
        SimState b = a;
        b.controller_state[0] = -50.0;
        return ic_sensitivity(sys, {a, b}, 1001, 2000, 1, "x1", kWorkers);
    };
    const ICSensitivity pi = gap(BenchController::pi);
    const ICSensitivity lag = gap(BenchController::lag);
    const bool ok = pi.max_gap > pi.gap_ci_half && lag.max_gap <= lag.gap_ci_half;
    return {ok, "pi gap " + fmt(pi.max_gap) + " vs ci " + fmt(pi.gap_ci_half) +
                    " (must exceed); lag gap " + fmt(lag.max_gap) + " vs ci " +
                    fmt(lag.gap_ci_half) + " (must not)"};
}

// --- 4: every simulated yhat lies exactly in the reachable alphabet -------

Result criterion_finite_alphabet() {
    const ClosedLoopSystem sys = bench_system(BenchController::pi, 50.0);
    const auto alphabet = filter_output_alphabet(sys);
    if (alphabet.size() != 21) return {false, "alphabet size " + std::to_string(alphabet.size())};
    std::vector<double> values;
    for (std::size_t j = 0; j < alphabet.size(); ++j) {
        if (!(alphabet[j] == Rational(static_cast<long>(j), 2)))
            return {false, "alphabet entry " + std::to_string(j) + " is " + alphabet[j].to_string()};
        values.push_back(alphabet[j].to_double());
    }
    const long horizon = 100000;
    const Trajectory traj = simulate_path(sys, initial_state(sys), horizon, 1, 0, false);
    if (traj.diverged) return {false, "path diverged"};
    long hits = 0;
    for (const auto& rec : traj.records) {
        if (!std::binary_search(values.begin(), values.end(), rec.yhat))
            return {false, "yhat = " + fmt(rec.yhat, 17) + " at k = " + std::to_string(rec.k) +
                               " is outside the alphabet"};
        ++hits;
    }
    return {true, std::to_string(hits) + " samples, all exactly in {j/2 : j = 0..20}"};
}

// --- 5: certify exits 2 with gcd 1/2 for pi, 0 via the finite-chain route for lag

std::string line_starting_with(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) == 0) return line;
    return {};
}

Result criterion_certificates() {
    std::ostringstream pi_out, lag_out;
    const int pi_code = run_certify(load_config(config_path("bench_pi.json")), pi_out);
    const int lag_code = run_certify(load_config(config_path("bench_lag.json")), lag_out);

    const bool pi_ok = pi_code == 2 && pi_out.str().find("gcd=1/2") != std::string::npos;
    const std::string thm6 = line_starting_with(lag_out.str(), "thm6_finite");
    const bool lag_ok = lag_code == 0 && thm6.find("uniquely_ergodic") != std::string::npos &&
                        thm6.find("not_uniquely") == std::string::npos;
    return {pi_ok && lag_ok, "pi exit " + std::to_string(pi_code) + " (gcd=1/2 " +
                                 (pi_ok ? "reported" : "missing") + "), lag exit " +
                                 std::to_string(lag_code)};
}

// --- 6: empirical law of the frozen open-loop chain vs the exact invariant

Result criterion_invariant_oracle() {
    const ClosedLoopSystem sys = bench_system(BenchController::pi, 50.0);
    const double pi_fixed = 3.0;
    const StationaryDistribution mu = open_loop_invariant(sys.agents, pi_fixed);
    if (!mu.unique || mu.prob.size() != 1024)
        return {false, "invariant law not unique or wrong support"};

    std::mt19937_64 gen(2026);
    auto uniform = [&] { return std::ldexp(static_cast<double>(gen() >> 11), -53); };
    std::vector<Vector> state = sys.agent_init;
    std::vector<double> freq(mu.prob.size(), 0.0);
    const long n_steps = 100000;
    for (long k = 0; k < n_steps; ++k) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < sys.agents.size(); ++i) {
            state[i] = agent_transition(sys.agents[i], state[i], pi_fixed, uniform());
            if (state[i][0] > 0.5) idx |= std::size_t(1) << i;
        }
        freq[idx] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t v = 0; v < freq.size(); ++v)
        tv += std::abs(freq[v] / static_cast<double>(n_steps) - mu.prob[v]);
    tv *= 0.5;
    return {tv < 0.02, "total variation " + fmt(tv) + " after " + std::to_string(n_steps) +
                           " steps at pi = 3 (limit 0.02)"};
}

// --- 7: shared-draw coupling of {x/2, x/2 + 1} and its contractivity margin

ProbabilityFunction const_prob(double p, double lb) {
    ProbabilityFunction f = ProbabilityFunction::constant(p);
    f.lower_bound = lb;
    return f;
}

Result criterion_coupling() {
    LipschitzAgent agent;
    agent.dim = 1;
    agent.transitions = {[](const Vector& x) { return Vector(0.5 * x); },
                         [](const Vector& x) { return Vector(0.5 * x + Vector::Ones(1)); }};
    agent.transition_lipschitz = {0.5, 0.5};
    agent.transition_probs = {const_prob(0.5, 0.5), const_prob(0.5, 0.5)};
    agent.outputs = {[](const Vector&) { return 0.0; }};
    agent.output_lipschitz = {0.0};
    agent.output_probs = {const_prob(1.0, 1.0)};

    ClosedLoopSystem sys;
    sys.agents = {agent};
    sys.filter = tf_to_ss(std::vector<double>{1.0}, std::vector<double>{1.0});
    sys.controller = tf_to_ss(std::vector<double>{0.0}, std::vector<double>{1.0});
    sys.agent_init = {Vector::Zero(1)};
    sys.validate();

    const long horizon = 50;
    SimState a = initial_state(sys);
    SimState b = a;
    b.agent_state[0][0] = 8.0;
    const CouplingProbe probe = coupling_probe(sys, a, b, horizon, 7);
    for (long k = 0; k <= horizon; ++k)
        if (probe.distance[static_cast<std::size_t>(k)] != std::ldexp(8.0, -static_cast<int>(k)))
            return {false, "distance at k = " + std::to_string(k) + " is " +
                               fmt(probe.distance[static_cast<std::size_t>(k)], 17) +
                               ", expected 8*2^-k"};
    if (!probe.converged) return {false, "coupling did not converge"};

    const double margin =
        barnsley_margin({0.5, 0.5}, {const_prob(0.5, 0.5), const_prob(0.5, 0.5)}, {0.0});
    if (std::abs(margin - std::log(0.5)) > 1e-12)
        return {false, "margin " + fmt(margin, 17) + " vs log(1/2)"};
    return {true, "distance = 8*2^-k exactly for k <= 50; margin - log(1/2) = " +
                      fmt(margin - std::log(0.5), 3)};
}

// --- 8: is_primitive vs brute force on every digraph with <= 4 vertices ---

Result criterion_primitivity_oracle() {
    long checked = 0;
    for (int n = 1; n <= 4; ++n) {
        const int bits = n * n;
        const long cap = static_cast<long>(n - 1) * (n - 1) + 1;
        for (std::uint32_t mask = 0; mask < (1u << bits); ++mask) {
            std::vector<std::vector<int>> a(static_cast<std::size_t>(n),
                                            std::vector<int>(static_cast<std::size_t>(n), 0));
            for (int u = 0; u < n; ++u)
                for (int v = 0; v < n; ++v)
                    a[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] =
                        (mask >> (u * n + v)) & 1u;

            // reachability closure (empty paths included) for strong connectivity
            auto reach = a;
            for (int u = 0; u < n; ++u) reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(u)] = 1;
            for (int w = 0; w < n; ++w)
                for (int u = 0; u < n; ++u)
                    for (int v = 0; v < n; ++v)
                        if (reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(w)] &&
                            reach[static_cast<std::size_t>(w)][static_cast<std::size_t>(v)])
                            reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
            bool sc = true;
            for (const auto& row : reach)
                for (int r : row) sc = sc && r == 1;

            // first boolean power with every entry positive, if any
            std::optional<long> exponent;
            auto power = a;
            for (long k = 1; k <= cap && !exponent; ++k) {
                bool all = true;
                for (const auto& row : power)
                    for (int r : row) all = all && r == 1;
                if (all) {
                    exponent = k;
                    break;
                }
                std::vector<std::vector<int>> next(static_cast<std::size_t>(n),
                                                   std::vector<int>(static_cast<std::size_t>(n), 0));
                for (int u = 0; u < n; ++u)
                    for (int w = 0; w < n; ++w)
                        if (power[static_cast<std::size_t>(u)][static_cast<std::size_t>(w)])
                            for (int v = 0; v < n; ++v)
                                if (a[static_cast<std::size_t>(w)][static_cast<std::size_t>(v)])
                                    next[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
                power = next;
            }

            const PrimitivityReport rep = is_primitive(TransitionGraph::from_adjacency(a));
            const bool match = rep.strongly_connected == sc &&
                               rep.primitive == exponent.has_value() &&
                               rep.exponent.has_value() == exponent.has_value() &&
                               (!exponent || *rep.exponent == *exponent);
            if (!match) {
                std::ostringstream os;
                os << "mismatch at n = " << n << ", mask = " << mask << " (sc " << sc << "/"
                   << rep.strongly_connected << ", primitive " << exponent.has_value() << "/"
                   << rep.primitive << ")";
                return {false, os.str()};
            }
            ++checked;
        }
    }
    return {true, std::to_string(checked) + " digraphs, no mismatches"};
}

// --- 9: byte-identical emissions and worker-count invariance --------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Result criterion_determinism() {
    const ExperimentConfig cfg = load_config(config_path("bench_pi.json"));
    const fs::path base = fs::temp_directory_path() / "ergo_acceptance";
    fs::remove_all(base);
    std::ostringstream log;
    run_simulate(cfg, (base / "a").string(), log);
    run_simulate(cfg, (base / "b").string(), log);
    for (const char* name : {"summary.csv", "path0.csv"})
        if (slurp(base / "a" / name) != slurp(base / "b" / name))
            return {false, std::string(name) + " differs between identical runs"};

    const SimState init = initial_state(cfg.system);
    const auto one = monte_carlo(cfg.system, init, cfg.horizon, cfg.n_paths, cfg.seed, {"y"}, 1);
    const auto eight = monte_carlo(cfg.system, init, cfg.horizon, cfg.n_paths, cfg.seed, {"y"}, 8);
    const bool same = one.n_included == eight.n_included &&
                      one.infeasible_fraction == eight.infeasible_fraction &&
                      one.mean[0] == eight.mean[0] && one.stddev[0] == eight.stddev[0];
    if (!same) return {false, "1-worker and 8-worker summaries differ"};
    return {true, "two runs byte-identical; 1 vs 8 workers bit-identical"};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        Result (*fn)();
    };
    const Criterion criteria[] = {
        {"regulation", criterion_regulation},
        {"lag steady-state offset", criterion_lag_offset},
        {"initial-condition sensitivity", criterion_ic_sensitivity},
        {"finite filter alphabet", criterion_finite_alphabet},
        {"benchmark certificates", criterion_certificates},
        {"open-loop invariant oracle", criterion_invariant_oracle},
        {"coupling analytics", criterion_coupling},
        {"primitivity oracle", criterion_primitivity_oracle},
        {"determinism", criterion_determinism},
    };

    int failed = 0, index = 0;
    for (const auto& c : criteria) {
        ++index;
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = c.fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += r.ok ? 0 : 1;
        std::cout << (r.ok ? "PASS" : "FAIL") << "  [" << index << "] " << c.name << ": "
                  << r.detail << " (" << fmt(secs, 3) << " s)\n";
    }
    std::cout << "acceptance: " << (9 - failed) << "/9 criteria passed\n";
    return failed == 0 ? 0 : 1;
}
