#include "ergo/agents.hpp"
#include "ergo/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

using namespace ergo;

namespace {

// The benchmark binary laws: activating agents switch on as the signal
// approaches 5, deactivating ones switch off past 1. Family order is
// [p -> action 0, p -> action 1].
std::vector<ProbabilityFunction> activating_family() {
    return {ProbabilityFunction::logistic(0.98, -0.95, 100.0, 5.0, 0.03),
            ProbabilityFunction::logistic(0.02, 0.95, 100.0, 5.0, 0.02)};
}

std::vector<ProbabilityFunction> deactivating_family() {
    return {ProbabilityFunction::logistic(0.02, 0.95, 100.0, 1.0, 0.02),
            ProbabilityFunction::logistic(0.98, -0.95, 100.0, 1.0, 0.03)};
}

FiniteActionAgent binary_agent(std::vector<ProbabilityFunction> family) {
    return FiniteActionAgent::make({Rational(0), Rational(1)}, std::move(family));
}

Vector vec1(double x) {
    Vector v(1);
    v(0) = x;
    return v;
}

} // namespace

TEST_CASE("finite-action agent construction and validation") {
    auto a = binary_agent(activating_family());
    REQUIRE(a.actions.size() == 2);
    CHECK(a.action_values[0] == 0.0);
    CHECK(a.action_values[1] == 1.0);
    CHECK_NOTHROW(a.validate({}));
    CHECK_NOTHROW(a.validate({-100.0, 100.0}));

    auto dup = FiniteActionAgent::make({Rational(1, 2), Rational(2, 4)},
                                       activating_family());
    CHECK_THROWS_WITH_AS(dup.validate({}), doctest::Contains("duplicate action"),
                         std::invalid_argument);

    auto mismatch = binary_agent(activating_family());
    mismatch.transition_probs.pop_back();
    CHECK_THROWS_WITH_AS(mismatch.validate({}), doctest::Contains("size mismatch"),
                         std::invalid_argument);

    auto empty = FiniteActionAgent::make({}, {});
    CHECK_THROWS_WITH_AS(empty.validate({}), doctest::Contains("empty action set"),
                         std::invalid_argument);

    // Laws must sum to one across the probed signal range.
    auto leaky = FiniteActionAgent::make(
        {Rational(0), Rational(1)},
        {ProbabilityFunction::constant(0.6), ProbabilityFunction::constant(0.3)});
    CHECK_THROWS_WITH_AS(leaky.validate({}), doctest::Contains("sum to"),
                         std::invalid_argument);
}

TEST_CASE("finite-action transitions ignore the current action") {
    AgentModel sure = FiniteActionAgent::make(
        {Rational(0), Rational(1)},
        {ProbabilityFunction::constant(0.0), ProbabilityFunction::constant(1.0)});
    for (double u : {0.0, 0.25, 0.5, 0.9999}) {
        CHECK(agent_transition(sure, vec1(0.0), -3.0, u)(0) == 1.0);
        CHECK(agent_transition(sure, vec1(1.0), 42.0, u)(0) == 1.0);
    }

    // Activating law far past its center: p0 ~ 0.03, p1 ~ 0.97.
    AgentModel act = binary_agent(activating_family());
    const auto& p0 = agent_transition_prob(act, 0);
    const auto& p1 = agent_transition_prob(act, 1);
    CHECK(p0(10.0) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(p1(10.0) == doctest::Approx(0.97).epsilon(1e-12));
    CHECK(sample_transition_index(act, 10.0, 0.5) == 1);
    CHECK(sample_transition_index(act, 10.0, 0.01) == 0);
    CHECK(agent_transition(act, vec1(0.0), 10.0, 0.5)(0) == 1.0);
    // Transitions depend on the signal alone, not on the held action.
    for (double u : {0.1, 0.4, 0.77}) {
        CHECK(sample_transition_index(act, 2.0, u) ==
              sample_transition_index(act, 2.0, u));
        CHECK(agent_transition(act, vec1(0.0), 2.0, u)(0) ==
              agent_transition(act, vec1(1.0), 2.0, u)(0));
    }
}

TEST_CASE("agent outputs by model kind") {
    AgentModel fin = binary_agent(activating_family());
    CHECK(agent_output(fin, vec1(1.0), 0.0, 0.123) == 1.0);
    CHECK(agent_output(fin, vec1(0.0), 99.0, 0.9) == 0.0);
    CHECK(agent_apply_output(fin, 0, vec1(1.0)) == 1.0);
    CHECK_THROWS_AS(agent_apply_output(fin, 1, vec1(1.0)), std::out_of_range);
    CHECK(agent_output_choices(fin) == 1);
    CHECK(agent_output_prob(fin, 0)(7.0) == 1.0);

    AffineAgent aff;
    aff.A = Matrix::Zero(1, 1);
    aff.c = RowVector(1);
    aff.c(0) = 2.0;
    aff.offsets = {vec1(3.0)};
    aff.transition_probs = {ProbabilityFunction::constant(1.0)};
    aff.output_offsets = {0.5};
    aff.output_probs = {ProbabilityFunction::constant(1.0)};
    AgentModel am = aff;
    CHECK_NOTHROW(agent_validate(am, {}));
    CHECK(agent_output(am, vec1(3.0), 0.0, 0.5) == 6.5);
    // A = 0 makes the next state independent of the current one.
    CHECK(agent_transition(am, vec1(-17.0), 0.0, 0.5)(0) == 3.0);
    CHECK(agent_transition(am, vec1(8.0), 5.0, 0.99)(0) == 3.0);

    LipschitzAgent lip;
    lip.dim = 1;
    lip.transitions = {[](const Vector& x) { return Vector(0.5 * x); }};
    lip.transition_lipschitz = {0.5};
    lip.transition_probs = {ProbabilityFunction::constant(1.0)};
    lip.outputs = {[](const Vector& x) { return x(0) / 2.0; }};
    lip.output_lipschitz = {0.5};
    lip.output_probs = {ProbabilityFunction::constant(1.0)};
    AgentModel lm = lip;
    CHECK_NOTHROW(agent_validate(lm, {}));
    CHECK(agent_output(lm, vec1(4.0), 0.0, 0.5) == 2.0);
    CHECK(agent_transition(lm, vec1(4.0), 0.0, 0.5)(0) == 2.0);
    CHECK(agent_dim(lm) == 1);
}

TEST_CASE("affine agent validation rejects malformed pieces") {
    AffineAgent a;
    a.A = Matrix::Zero(1, 2);
    a.c = RowVector::Zero(1);
    a.offsets = {vec1(0.0)};
    a.transition_probs = {ProbabilityFunction::constant(1.0)};
    a.output_offsets = {0.0};
    a.output_probs = {ProbabilityFunction::constant(1.0)};
    CHECK_THROWS_WITH_AS(a.validate({}), doctest::Contains("square"),
                         std::invalid_argument);

    a.A = Matrix::Zero(1, 1);
    a.c = RowVector::Zero(2);
    CHECK_THROWS_WITH_AS(a.validate({}), doctest::Contains("c has wrong size"),
                         std::invalid_argument);

    a.c = RowVector::Zero(1);
    a.offsets = {Vector::Zero(2)};
    CHECK_THROWS_WITH_AS(a.validate({}), doctest::Contains("bad offset"),
                         std::invalid_argument);

    a.offsets = {vec1(0.0), vec1(1.0)};
    CHECK_THROWS_WITH_AS(a.validate({}), doctest::Contains("size mismatch"),
                         std::invalid_argument);

    a.offsets = {vec1(0.0)};
    a.output_probs.clear();
    CHECK_THROWS_WITH_AS(a.validate({}),
                         doctest::Contains("output offsets/probabilities"),
                         std::invalid_argument);
}

TEST_CASE("lipschitz agent finite_states must be closed under every map") {
    LipschitzAgent flip;
    flip.dim = 1;
    flip.transitions = {[](const Vector& x) { return Vector(Vector::Ones(1) - x); }};
    flip.transition_lipschitz = {1.0};
    flip.transition_probs = {ProbabilityFunction::constant(1.0)};
    flip.outputs = {[](const Vector& x) { return x(0); }};
    flip.output_lipschitz = {1.0};
    flip.output_probs = {ProbabilityFunction::constant(1.0)};
    flip.finite_states = std::vector<Rational>{Rational(0), Rational(1)};
    CHECK_NOTHROW(flip.validate({}));

    auto escape = flip;
    escape.transitions = {[](const Vector& x) { return Vector(x + Vector::Ones(1)); }};
    CHECK_THROWS_WITH_AS(escape.validate({}), doctest::Contains("leaves finite_states"),
                         std::invalid_argument);

    auto planar = flip;
    planar.dim = 2;
    CHECK_THROWS_WITH_AS(planar.validate({}), doctest::Contains("requires dim 1"),
                         std::invalid_argument);

    auto hollow = flip;
    hollow.finite_states = std::vector<Rational>{};
    CHECK_THROWS_WITH_AS(hollow.validate({}), doctest::Contains("empty finite_states"),
                         std::invalid_argument);
}

TEST_CASE("memoryless affine agent matches the finite-action one it encodes") {
    // A = 0 with offsets {0, 1} and identity readout is the binary agent.
    AffineAgent aff;
    aff.A = Matrix::Zero(1, 1);
    aff.c = RowVector::Ones(1);
    aff.offsets = {vec1(0.0), vec1(1.0)};
    aff.transition_probs = activating_family();
    aff.output_offsets = {0.0};
    aff.output_probs = {ProbabilityFunction::constant(1.0)};
    AgentModel affine = aff;
    AgentModel finite = binary_agent(activating_family());

    RngStream rs{2024, 7, 0};
    for (double pi = -2.0; pi <= 12.0; pi += 0.5) {
        for (int t = 0; t < 32; ++t) {
            const double u = rs.next_uniform();
            CHECK(sample_transition_index(affine, pi, u) ==
                  sample_transition_index(finite, pi, u));
            const Vector prev = vec1(t % 2 ? 1.0 : 0.0);
            const Vector na = agent_transition(affine, prev, pi, u);
            const Vector nf = agent_transition(finite, prev, pi, u);
            CHECK(na(0) == nf(0));
            CHECK(agent_output(affine, na, pi, 0.0) == agent_output(finite, nf, pi, 0.0));
        }
    }
}

TEST_CASE("lipschitz bounds per transition map") {
    AffineAgent diag;
    diag.A = Matrix::Zero(2, 2);
    diag.A(0, 0) = 0.5;
    diag.A(1, 1) = 0.2;
    diag.c = RowVector::Ones(2);
    diag.offsets = {Vector::Zero(2), Vector::Ones(2), 2.0 * Vector::Ones(2)};
    auto got = lipschitz_bound(AgentModel(diag));
    REQUIRE(got.size() == 3);
    for (double L : got) CHECK(L == doctest::Approx(0.5).epsilon(1e-12));

    AffineAgent shear;
    shear.A = Matrix::Zero(2, 2);
    shear.A(0, 1) = 2.0; // nilpotent but expansive in one step
    shear.c = RowVector::Ones(2);
    shear.offsets = {Vector::Zero(2)};
    CHECK(lipschitz_bound(AgentModel(shear))[0] == doctest::Approx(2.0).epsilon(1e-12));

    LipschitzAgent lip;
    lip.dim = 1;
    lip.transitions = {[](const Vector& x) { return Vector(0.3 * x); },
                       [](const Vector& x) { return Vector(0.9 * x); }};
    lip.transition_lipschitz = {0.3, 0.9};
    lip.transition_probs = {ProbabilityFunction::constant(0.5),
                            ProbabilityFunction::constant(0.5)};
    lip.outputs = {[](const Vector& x) { return x(0); }};
    lip.output_lipschitz = {1.0};
    lip.output_probs = {ProbabilityFunction::constant(1.0)};
    CHECK(lipschitz_bound(AgentModel(lip)) == std::vector<double>{0.3, 0.9});

    CHECK_THROWS_AS(lipschitz_bound(AgentModel(binary_agent(activating_family()))),
                    std::invalid_argument);
}

TEST_CASE("lipschitz falsifier finds dishonest constants, passes honest ones") {
    LipschitzAgent honest;
    honest.dim = 2;
    honest.transitions = {[](const Vector& x) { return Vector(0.5 * x); }};
    honest.transition_lipschitz = {0.5};
    honest.transition_probs = {ProbabilityFunction::constant(1.0)};
    honest.outputs = {[](const Vector& x) { return 0.25 * x.sum(); }};
    honest.output_lipschitz = {0.5};
    honest.output_probs = {ProbabilityFunction::constant(1.0)};
    CHECK(!lipschitz_falsify(honest, 500, 11).has_value());

    auto stretchy = honest;
    stretchy.transitions = {[](const Vector& x) { return Vector(2.0 * x); }};
    auto hit = lipschitz_falsify(stretchy, 500, 11);
    REQUIRE(hit.has_value());
    CHECK(hit->find("transition map 0") != std::string::npos);

    auto loud = honest;
    loud.outputs = {[](const Vector& x) { return 3.0 * x(0); }};
    hit = lipschitz_falsify(loud, 500, 11);
    REQUIRE(hit.has_value());
    CHECK(hit->find("output map 0") != std::string::npos);
}

TEST_CASE("product ifs enumerates choices in mixed radix, agent 0 fastest") {
    std::vector<AgentModel> agents = {binary_agent(activating_family()),
                                      binary_agent(deactivating_family())};
    ProductIFS ifs(agents);
    REQUIRE(ifs.size().has_value());
    CHECK(*ifs.size() == 4);
    CHECK(ifs.total_dim() == 2);

    const int want[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    for (int m = 0; m < 4; ++m) {
        auto ch = ifs.choice_from_flat(m);
        CHECK(ch.transition[0] == want[m][0]);
        CHECK(ch.transition[1] == want[m][1]);
        CHECK(ch.output[0] == 0);
        CHECK(ch.output[1] == 0);
    }
    CHECK_THROWS_AS(ifs.choice_from_flat(4), std::out_of_range);
}

TEST_CASE("product ifs probabilities factor over agents and sum to one") {
    std::vector<AgentModel> pair = {binary_agent(activating_family()),
                                    binary_agent(activating_family())};
    ProductIFS ifs(pair);

    // Far past the activating center, p1 ~ 0.97 and p0 ~ 0.03.
    auto ch = ifs.choice_from_flat(1); // transitions [1, 0]
    const double p0 = agent_transition_prob(ifs.agents()[0], 0)(10.0);
    const double p1 = agent_transition_prob(ifs.agents()[0], 1)(10.0);
    CHECK(ifs.probability(ch, 10.0) == doctest::Approx(p1 * p0).epsilon(1e-15));
    CHECK(ifs.probability(ch, 10.0) == doctest::Approx(0.0291).epsilon(1e-12));

    for (double pi : {-1.0, 0.0, 1.0, 2.5, 5.0, 9.0}) {
        auto q = ifs.materialize_probabilities(pi);
        REQUIRE(q.size() == 4);
        double sum = 0.0;
        for (double v : q) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Declared lower bounds multiply into a bound on every branch weight.
    for (std::uint64_t m = 0; m < 4; ++m) {
        auto c = ifs.choice_from_flat(m);
        const double lb = ifs.probability_lower_bound(c);
        CHECK(lb > 0.0);
        for (double pi : {0.0, 1.0, 5.0, 8.0})
            CHECK(ifs.probability(c, pi) >= lb - 1e-15);
    }

    // A singleton product is the agent's own law.
    ProductIFS solo(std::vector<AgentModel>{binary_agent(activating_family())});
    REQUIRE(solo.size().has_value());
    CHECK(*solo.size() == 2);
    for (double pi : {0.0, 4.0, 5.0, 6.0}) {
        auto q = solo.materialize_probabilities(pi);
        CHECK(q[0] == agent_transition_prob(solo.agents()[0], 0)(pi));
        CHECK(q[1] == agent_transition_prob(solo.agents()[0], 1)(pi));
    }
}

TEST_CASE("product ifs maps stacked states componentwise") {
    std::vector<AgentModel> pair = {binary_agent(activating_family()),
                                    binary_agent(deactivating_family())};
    ProductIFS ifs(pair);
    Vector x(2);
    x << 0.0, 0.0;

    auto ch = ifs.choice_from_flat(1); // agent 0 -> action 1, agent 1 -> action 0
    Vector next = ifs.apply(ch, x);
    CHECK(next(0) == 1.0);
    CHECK(next(1) == 0.0);
    CHECK(ifs.output_sum(ch, next) == 1.0);

    ch = ifs.choice_from_flat(3);
    next = ifs.apply(ch, x);
    CHECK(next(0) == 1.0);
    CHECK(next(1) == 1.0);
    CHECK(ifs.output_sum(ch, next) == 2.0);

    Vector bad(3);
    bad.setZero();
    CHECK_THROWS_AS(ifs.apply(ch, bad), std::invalid_argument);
    CHECK_THROWS_AS(ifs.output_sum(ch, bad), std::invalid_argument);
}

TEST_CASE("product ifs respects the materialization cap and detects overflow") {
    std::vector<AgentModel> pair = {binary_agent(activating_family()),
                                    binary_agent(activating_family())};
    ProductIFS tight(pair, 2); // index set is 4 > cap
    CHECK(tight.size().has_value());
    CHECK_THROWS_AS(tight.materialize_probabilities(5.0), std::runtime_error);
    CHECK_THROWS_AS(tight.choice_from_flat(0), std::runtime_error);

    // 33 agents with four actions each: 4^33 = 2^66 overflows 64 bits.
    std::vector<ProbabilityFunction> quarter(4, ProbabilityFunction::constant(0.25));
    std::vector<AgentModel> horde;
    for (int i = 0; i < 33; ++i)
        horde.push_back(FiniteActionAgent::make(
            {Rational(0), Rational(1), Rational(2), Rational(3)}, quarter));
    ProductIFS big(std::move(horde));
    CHECK(!big.size().has_value());
    CHECK_THROWS_AS(big.materialize_probabilities(0.0), std::runtime_error);

    CHECK_THROWS_AS(ProductIFS(std::vector<AgentModel>{}), std::invalid_argument);
}

TEST_CASE("sampled branch frequencies track the law") {
    AgentModel act = binary_agent(activating_family());
    const double pi = 4.97; // on the logistic ramp, away from saturation
    const double p1 = agent_transition_prob(act, 1)(pi);

    RngStream rs{99, 3, 0};
    const int n = 200000;
    int ones = 0;
    for (int i = 0; i < n; ++i)
        ones += sample_transition_index(act, pi, rs.next_uniform());
    const double freq = double(ones) / n;
    const double sigma = std::sqrt(p1 * (1.0 - p1) / n);
    CHECK(std::abs(freq - p1) < 4.0 * sigma);
}
