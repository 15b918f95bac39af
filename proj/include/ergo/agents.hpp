#pragma once

#include "ergo/matrixops.hpp"
#include "ergo/prob.hpp"
#include "ergo/rational.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace ergo {

// Agent with a finite action set that doubles as its state space. The next
// action is drawn from the signal-dependent law alone (transitions do not
// depend on the current action) and the output is the action itself.
struct FiniteActionAgent {
    std::vector<Rational> actions;
    std::vector<double> action_values; // double images of `actions`
    std::vector<ProbabilityFunction> transition_probs; // one per target action

    static FiniteActionAgent make(std::vector<Rational> actions,
                                  std::vector<ProbabilityFunction> transition_probs);
    void validate(const Interval& signal_domain) const;
};

// x+ = A x + b,  y = c^T x + d, with b and d drawn from finite candidate
// sets according to signal-dependent laws.
struct AffineAgent {
    Matrix A;
    RowVector c;
    std::vector<Vector> offsets;                       // b_ij candidates
    std::vector<ProbabilityFunction> transition_probs; // for offsets
    std::vector<double> output_offsets;                // d_il candidates
    std::vector<ProbabilityFunction> output_probs;     // for output offsets

    int dim() const { return static_cast<int>(A.rows()); }
    void validate(const Interval& signal_domain) const;
};

// Opaque transition/output maps with declared Lipschitz constants.
// `finite_states` (optional) declares that every map permutes a finite state
// list, enabling the transition-graph analysis for state-dependent finite
// dynamics.
struct LipschitzAgent {
    int dim = 1;
    std::vector<std::function<Vector(const Vector&)>> transitions;
    std::vector<double> transition_lipschitz;
    std::vector<ProbabilityFunction> transition_probs;
    std::vector<std::function<double(const Vector&)>> outputs;
    std::vector<double> output_lipschitz;
    std::vector<ProbabilityFunction> output_probs;
    std::optional<std::vector<Rational>> finite_states;

    void validate(const Interval& signal_domain) const;
};

using AgentModel = std::variant<FiniteActionAgent, AffineAgent, LipschitzAgent>;

int agent_dim(const AgentModel& agent);
int agent_transition_choices(const AgentModel& agent); // w_i
int agent_output_choices(const AgentModel& agent);     // h_i

const ProbabilityFunction& agent_transition_prob(const AgentModel& agent, int j);
// FiniteActionAgent has a single deterministic output map; its implicit law
// is the constant 1.
const ProbabilityFunction& agent_output_prob(const AgentModel& agent, int l);

Vector agent_apply_transition(const AgentModel& agent, int j, const Vector& state);
double agent_apply_output(const AgentModel& agent, int l, const Vector& state);

// One sampled step / output draw; u is a uniform draw in [0,1).
Vector agent_transition(const AgentModel& agent, const Vector& state, double pi, double u);
double agent_output(const AgentModel& agent, const Vector& state, double pi, double u);
int sample_transition_index(const AgentModel& agent, double pi, double u);
int sample_output_index(const AgentModel& agent, double pi, double u);

void agent_validate(const AgentModel& agent, const Interval& signal_domain);

// Per-transition-map Lipschitz constants; affine agents report the induced
// 2-norm of A for every map, finite-action agents are unsupported (their
// analysis goes through the transition graph instead).
std::vector<double> lipschitz_bound(const AgentModel& agent);

// Samples state pairs in [-box, box]^dim looking for a pair whose ratio
// exceeds a declared constant. Returns a description of the first violation
// found, if any. A pass is evidence, not a certificate.
std::optional<std::string> lipschitz_falsify(const LipschitzAgent& agent,
                                             int n_samples, std::uint64_t seed,
                                             double box = 10.0);

// Product IFS over the joint agent state, indexed by one transition choice
// and one output choice per agent. Index set size is prod(w_i) * prod(h_i);
// flat enumeration is mixed-radix with transition digits first.
class ProductIFS {
public:
    struct Choice {
        std::vector<int> transition; // j_i per agent
        std::vector<int> output;     // l_i per agent
    };

    explicit ProductIFS(std::vector<AgentModel> agents,
                        std::uint64_t materialize_cap = std::uint64_t(1) << 20);

    const std::vector<AgentModel>& agents() const { return agents_; }
    int total_dim() const { return total_dim_; }

    // Index-set size; nullopt if the product overflows 64 bits.
    std::optional<std::uint64_t> size() const { return size_; }

    Choice choice_from_flat(std::uint64_t m) const;
    double probability(const Choice& choice, double pi) const; // q_m(pi)
    double probability_lower_bound(const Choice& choice) const;
    Vector apply(const Choice& choice, const Vector& stacked_state) const;
    double output_sum(const Choice& choice, const Vector& stacked_state) const;

    // All q_m(pi) in flat order; throws when the index set exceeds the cap.
    std::vector<double> materialize_probabilities(double pi) const;

private:
    void check_cap() const;

    std::vector<AgentModel> agents_;
    std::vector<int> w_, h_;
    std::vector<int> state_offset_;
    int total_dim_ = 0;
    std::optional<std::uint64_t> size_;
    std::uint64_t cap_;
};

} // namespace ergo
