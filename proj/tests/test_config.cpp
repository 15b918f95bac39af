#include "ergo/config.hpp"
#include "ergo/presets.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace ergo;
using nlohmann::json;

namespace {

json minimal_config() {
    return parse_config_text(R"({
      "system": {
        "reference": 5,
        "controller": { "type": "pi", "kappa": 0.1, "alpha": -4, "init": [50] },
        "filter": { "type": "fir", "taps": ["1/2", "1/2"], "init": [0] },
        "agents": [
          { "type": "finite", "actions": [0, 1], "init": 0,
            "probs": [ { "kind": "constant", "p0": 0.5 },
                       { "kind": "constant", "p0": 0.5 } ] }
        ]
      },
      "run": { "seed": 7 }
    })");
}

std::vector<std::string> errors_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.errors;
    }
    return {};
}

bool any_contains(const std::vector<std::string>& errs, const std::string& needle) {
    for (const auto& e : errs)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

bool same_prob(const ProbabilityFunction& a, const ProbabilityFunction& b) {
    return a.kind == b.kind && a.base == b.base && a.scale == b.scale && a.rate == b.rate &&
           a.center == b.center && a.p0 == b.p0 && a.lower_bound == b.lower_bound &&
           a.dini == b.dini;
}

} // namespace

TEST_CASE("shipped benchmark config reproduces the built-in system") {
    ExperimentConfig cfg = load_config(std::string(ERGO_CONFIG_DIR) + "/bench_pi.json");
    ClosedLoopSystem want = bench_system(BenchController::pi, 50.0);

    CHECK(cfg.horizon == 1001);
    CHECK(cfg.n_paths == 2000);
    CHECK(cfg.seed == 1);
    CHECK(cfg.workers == 4);
    CHECK(cfg.observables == std::vector<std::string>{"y", "yhat", "e", "pi", "x1"});
    CHECK(cfg.digest.size() == 16);

    CHECK(cfg.system.r == want.r);
    REQUIRE(cfg.system.r_exact.has_value());
    CHECK(*cfg.system.r_exact == *want.r_exact);

    const auto& ctrl = std::get<LinearBlock>(cfg.system.controller);
    const auto& wctrl = std::get<LinearBlock>(want.controller);
    CHECK(ctrl.rational);
    CHECK(ctrl.A == wctrl.A);
    CHECK(ctrl.B == wctrl.B);
    CHECK(ctrl.C == wctrl.C);
    CHECK(ctrl.D == wctrl.D);
    CHECK(ctrl.D_exact == Rational(1, 10));
    CHECK(ctrl.A_exact[0][0] == Rational(1));
    CHECK(cfg.system.controller_init == want.controller_init);
    CHECK(cfg.system.controller_init(0) == 50.0);

    const auto& filt = std::get<LinearBlock>(cfg.system.filter);
    const auto& wfilt = std::get<LinearBlock>(want.filter);
    CHECK(filt.A == wfilt.A);
    CHECK(filt.D == 0.5);
    CHECK(filt.D_exact == Rational(1, 2));
    CHECK(cfg.system.filter_init == want.filter_init);

    REQUIRE(cfg.system.agents.size() == 10);
    REQUIRE(cfg.system.agent_init.size() == 10);
    for (int i = 0; i < 10; ++i) {
        const auto& got = std::get<FiniteActionAgent>(cfg.system.agents[i]);
        const auto& ref = std::get<FiniteActionAgent>(want.agents[i]);
        REQUIRE(got.actions.size() == 2);
        CHECK(got.actions[0] == ref.actions[0]);
        CHECK(got.actions[1] == ref.actions[1]);
        CHECK(got.action_values == ref.action_values);
        REQUIRE(got.transition_probs.size() == 2);
        CHECK(same_prob(got.transition_probs[0], ref.transition_probs[0]));
        CHECK(same_prob(got.transition_probs[1], ref.transition_probs[1]));
        CHECK(cfg.system.agent_init[i] == want.agent_init[i]);
    }
    CHECK(cfg.system.agent_init[0](0) == 1.0);
    CHECK(cfg.system.agent_init[9](0) == 0.0);

    ExperimentConfig lag = load_config(std::string(ERGO_CONFIG_DIR) + "/bench_lag.json");
    const auto& lctrl = std::get<LinearBlock>(lag.system.controller);
    CHECK(lctrl.A(0, 0) == 0.99);
    CHECK(lctrl.A_exact[0][0] == Rational(99, 100));
    CHECK(lctrl.C(0) == 0.5);
    CHECK(lag.digest != cfg.digest);
}

TEST_CASE("digest ignores formatting and key order, tracks values") {
    json a = parse_config_text(R"({"run": {"seed": 1, "paths": 10}, "system": {"reference": 5}})");
    json b = parse_config_text(R"(
      // a comment, different whitespace, reordered keys
      { "system": { "reference": 5 },
        "run": { "paths": 10, "seed": 1 } }
    )");
    CHECK(config_digest(a) == config_digest(b));

    json c = a;
    c["run"]["seed"] = 2;
    CHECK(config_digest(a) != config_digest(c));

    // The stored digest covers the whole document as parsed.
    json full = minimal_config();
    ExperimentConfig cfg = config_from_json(full);
    CHECK(cfg.digest == config_digest(full));
    json tweaked = full;
    tweaked["run"]["horizon"] = 50;
    CHECK(config_from_json(tweaked).digest != cfg.digest);
}

TEST_CASE("numbers mean their decimal literals") {
    json j = minimal_config();
    j["system"]["reference"] = 5.5;
    ExperimentConfig cfg = config_from_json(j);
    CHECK(*cfg.system.r_exact == Rational(11, 2));
    CHECK(cfg.system.r == 5.5);

    j["system"]["reference"] = "1/3";
    cfg = config_from_json(j);
    CHECK(*cfg.system.r_exact == Rational(1, 3));
    CHECK(cfg.system.r == Rational(1, 3).to_double());

    // kappa written as 0.1 lands exactly on 1/10 in the realization.
    j = minimal_config();
    ExperimentConfig base = config_from_json(j);
    CHECK(std::get<LinearBlock>(base.system.controller).D_exact == Rational(1, 10));
}

TEST_CASE("probability families are validated where they are declared") {
    json j = minimal_config();
    j["system"]["agents"][0]["probs"][1] =
        parse_config_text(R"({ "kind": "logistic", "base": 0.1, "scale": 0.99,
                               "rate": 1, "center": 0 })");
    auto errs = errors_of(j);
    REQUIRE(!errs.empty());
    CHECK(any_contains(errs, "system.agents[0].probs[1]"));

    json bad_kind = minimal_config();
    bad_kind["system"]["agents"][0]["probs"][0]["kind"] = "wavelet";
    errs = errors_of(bad_kind);
    CHECK(any_contains(errs, "unknown probability kind 'wavelet'"));
}

TEST_CASE("declared signal limits widen the admissible laws") {
    // lower_bound 0.4 only holds on [5, 10], not on the whole line.
    const char* text = R"({
      "system": {
        "reference": 5,
        "pi_limits": { "lo": 5, "hi": 10 },
        "controller": { "type": "pi", "kappa": 0.1, "alpha": -4, "init": [50] },
        "agents": [
          { "type": "finite", "actions": [0, 1], "init": 0,
            "probs": [ { "kind": "logistic", "base": 0.98, "scale": -0.95,
                         "rate": 100, "center": 5, "lower_bound": 0.02 },
                       { "kind": "logistic", "base": 0.02, "scale": 0.95,
                         "rate": 100, "center": 5, "lower_bound": 0.4 } ] }
        ]
      },
      "run": { "seed": 7 }
    })";
    json bounded = parse_config_text(text);
    ExperimentConfig cfg = config_from_json(bounded);
    CHECK(cfg.system.pi_limits.bounded());
    CHECK(cfg.system.pi_limits.lo == 5.0);
    CHECK(cfg.system.pi_limits.hi == 10.0);

    json unbounded = bounded;
    unbounded["system"].erase("pi_limits");
    auto errs = errors_of(unbounded);
    REQUIRE(!errs.empty());
    CHECK(any_contains(errs, "system.agents[0].probs[1]"));
    CHECK(any_contains(errs, "lower bound"));
}

TEST_CASE("seed must be stated explicitly") {
    json j = minimal_config();
    j["run"].erase("seed");
    auto errs = errors_of(j);
    REQUIRE(!errs.empty());
    CHECK(any_contains(errs, "run.seed: seed required (no implicit entropy)"));

    j = minimal_config();
    j["run"]["seed"] = 1.5;
    errs = errors_of(j);
    CHECK(any_contains(errs, "run.seed: seed required (integer)"));

    j = minimal_config();
    j["run"]["seed"] = 0;
    CHECK(config_from_json(j).seed == 0);
}

TEST_CASE("overrides address scalar fields by dotted path") {
    json j = minimal_config();
    apply_override(j, "run.seed", "9");
    CHECK(j["run"]["seed"] == 9);
    apply_override(j, "system.controller.init[0]", "25");
    CHECK(j["system"]["controller"]["init"][0] == 25);
    apply_override(j, "system.controller.type", "lag");
    CHECK(j["system"]["controller"]["type"] == "lag");
    apply_override(j, "system.reference", "4.5");
    CHECK(j["system"]["reference"] == 4.5);

    // Absent fields are rejected by default (typo protection for sweeps)...
    CHECK_THROWS_WITH_AS(apply_override(j, "run.paths", "500"),
                         doctest::Contains("unknown parameter path"), std::invalid_argument);
    // ...but canonical CLI flags may create a fresh leaf under "run".
    apply_override(j, "run.paths", "500", true);
    CHECK(j["run"]["paths"] == 500);
    CHECK_THROWS_WITH_AS(apply_override(j, "orbit.paths", "1", true),
                         doctest::Contains("unknown parameter path"), std::invalid_argument);

    CHECK_THROWS_WITH_AS(apply_override(j, "system.controller", "9"),
                         doctest::Contains("scalar field"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(apply_override(j, "run.seed", "[1,2]"),
                         doctest::Contains("scalar field"), std::invalid_argument);
    CHECK_THROWS_AS(apply_override(j, "", "1"), std::invalid_argument);
}

TEST_CASE("file loading reports parse and io failures") {
    const auto bad =
        (std::filesystem::temp_directory_path() / "ergo_test_config_broken.json").string();
    {
        std::ofstream out(bad);
        out << "{ \"system\": { \"reference\": 5, }\n";
    }
    try {
        load_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(e.errors.size() == 1);
        CHECK(e.errors[0].find("parse error") != std::string::npos);
    }
    std::filesystem::remove(bad);

    try {
        load_config("no_such_config.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.errors[0].find("cannot open config file") != std::string::npos);
    }
}

TEST_CASE("structural faults are reported with their paths") {
    json j = minimal_config();
    j["system"]["controller"]["init"] = {50, 1};
    auto errs = errors_of(j);
    CHECK(any_contains(errs, "system.controller.init: wrong length"));

    j = minimal_config();
    j["run"]["observables"] = {"y", "x11"};
    errs = errors_of(j);
    CHECK(any_contains(errs, "x11"));
    CHECK(any_contains(errs, "agent index out of range"));

    j = minimal_config();
    j["system"]["controller"]["type"] = "pid";
    errs = errors_of(j);
    CHECK(any_contains(errs, "unknown block type 'pid'"));

    j = minimal_config();
    j["system"]["agents"][0]["type"] = "hybrid";
    errs = errors_of(j);
    CHECK(any_contains(errs, "unknown agent type 'hybrid'"));

    j = minimal_config();
    j["system"]["agents"][0]["count"] = 0;
    errs = errors_of(j);
    CHECK(any_contains(errs, "count"));

    j = minimal_config();
    j["system"]["agents"][0]["init"] = 2;
    errs = errors_of(j);
    CHECK(any_contains(errs, "must be one of the actions"));

    j = minimal_config();
    j["system"]["agents"][0]["probs"].erase(1);
    errs = errors_of(j);
    CHECK(any_contains(errs, "needs one probability per action"));

    j = minimal_config();
    j["system"]["filter"] = parse_config_text(R"({ "type": "fir" })");
    errs = errors_of(j);
    CHECK(any_contains(errs, "taps"));
}

TEST_CASE("run section bounds are enforced and faults accumulate") {
    json j = minimal_config();
    j["run"]["horizon"] = 0;
    j["run"]["workers"] = 0;
    j["run"].erase("seed");
    auto errs = errors_of(j);
    CHECK(errs.size() >= 3);
    CHECK(any_contains(errs, "run.horizon"));
    CHECK(any_contains(errs, "run.workers"));
    CHECK(any_contains(errs, "run.seed"));

    try {
        config_from_json(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("config validation failed") != std::string::npos);
        CHECK(what.find("run.horizon") != std::string::npos);
        CHECK(what.find("run.seed") != std::string::npos);
    }

    j = minimal_config();
    j["run"]["burn_in"] = 2000; // beyond the default horizon
    errs = errors_of(j);
    CHECK(any_contains(errs, "run.burn_in"));
}

TEST_CASE("defaults fill the optional pieces") {
    json j = parse_config_text(R"({
      "system": {
        "reference": 0,
        "controller": { "type": "lag", "kappa": "1/10", "alpha": "-401/100",
                        "beta": "99/100" },
        "agents": [
          { "type": "finite", "actions": [0, 1], "init": 0,
            "probs": [ { "kind": "constant", "p0": 0.5 },
                       { "kind": "constant", "p0": 0.5 } ] }
        ]
      },
      "run": { "seed": 42 }
    })");
    ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.horizon == 1001);
    CHECK(cfg.n_paths == 2000);
    CHECK(cfg.burn_in == 0);
    CHECK(cfg.workers == 1);
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.observables == std::vector<std::string>{"y", "yhat", "e", "pi"});

    // Omitted filter defaults to the identity (no state).
    CHECK(block_dim(cfg.system.filter) == 0);
    CHECK(std::get<LinearBlock>(cfg.system.filter).D == 1.0);
    CHECK(cfg.system.filter_init.size() == 0);

    // Missing controller init defaults to zero.
    CHECK(cfg.system.controller_init.size() == 1);
    CHECK(cfg.system.controller_init(0) == 0.0);

    const auto& ctrl = std::get<LinearBlock>(cfg.system.controller);
    CHECK(ctrl.A(0, 0) == 0.99);

    // Constant laws inherit their own value as the bound unless overridden.
    const auto& fa = std::get<FiniteActionAgent>(cfg.system.agents[0]);
    CHECK(fa.transition_probs[0].lower_bound == 0.5);
    json k = j;
    k["system"]["agents"][0]["probs"][0]["lower_bound"] = 0.2;
    k["system"]["agents"][0]["probs"][1]["lower_bound"] = 0.2;
    ExperimentConfig loose = config_from_json(k);
    CHECK(std::get<FiniteActionAgent>(loose.system.agents[0]).transition_probs[0].lower_bound ==
          0.2);
}

TEST_CASE("other block and law kinds round-trip through parsing") {
    json j = minimal_config();
    j["system"]["controller"] = parse_config_text(
        R"({ "type": "ss", "A": [[0.5]], "B": [1], "C": [0.5], "D": 0 })");
    ExperimentConfig cfg = config_from_json(j);
    const auto& ss = std::get<LinearBlock>(cfg.system.controller);
    CHECK(!ss.rational);
    CHECK(ss.A(0, 0) == 0.5);
    CHECK(ss.C(0) == 0.5);

    j = minimal_config();
    j["system"]["controller"] = parse_config_text(
        R"({ "type": "tf", "num": ["1", "0"], "den": ["1", "-1/2"] })");
    cfg = config_from_json(j);
    const auto& tf = std::get<LinearBlock>(cfg.system.controller);
    CHECK(tf.rational);
    CHECK(tf.A_exact[0][0] == Rational(1, 2));

    j = minimal_config();
    j["system"]["agents"][0]["probs"] = parse_config_text(R"([
      { "kind": "table", "points": [[0, 0.5], [10, 0.5]] },
      { "kind": "table", "points": [[0, 0.5], [10, 0.5]] }
    ])");
    cfg = config_from_json(j);
    const auto& fa = std::get<FiniteActionAgent>(cfg.system.agents[0]);
    CHECK(fa.transition_probs[0].kind == ProbabilityFunction::Kind::table);
    CHECK(fa.transition_probs[0](5.0) == 0.5);

    j = minimal_config();
    j["system"]["agents"][0] = parse_config_text(R"({
      "type": "affine", "A": [[0.5]], "c": [1], "init": [0],
      "offsets": [[0], [1]],
      "probs": [ { "kind": "constant", "p0": 0.5 },
                 { "kind": "constant", "p0": 0.5 } ],
      "output_offsets": [0],
      "output_probs": [ { "kind": "constant", "p0": 1 } ]
    })");
    cfg = config_from_json(j);
    const auto& aff = std::get<AffineAgent>(cfg.system.agents[0]);
    CHECK(aff.A(0, 0) == 0.5);
    REQUIRE(aff.offsets.size() == 2);
    CHECK(aff.offsets[1](0) == 1.0);
    CHECK(cfg.system.agent_init[0](0) == 0.0);
}

TEST_CASE("agent groups expand by count") {
    json j = minimal_config();
    j["system"]["agents"][0]["count"] = 4;
    ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.system.agents.size() == 4);
    CHECK(cfg.system.agent_init.size() == 4);
    // x4 resolves once the group is expanded
    j["run"]["observables"] = {"y", "x4"};
    CHECK_NOTHROW(config_from_json(j));
    j["run"]["observables"] = {"y", "x5"};
    CHECK(any_contains(errors_of(j), "agent index out of range"));
}
