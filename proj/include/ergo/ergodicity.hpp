#pragma once

#include "ergo/loop.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ergo {

inline constexpr double kZ99 = 2.5758293035489004; // two-sided 99% normal quantile

enum class VerdictStatus { uniquely_ergodic, not_uniquely_ergodic, inconclusive };

enum class TheoremTag { barnsley, thm4_linear, thm5_lipschitz, thm6_finite, thm3_unit_pole, none };

struct VerdictEvidence {
    std::optional<double> contractivity_margin;
    std::optional<double> delta;       // validated lower bound over transition laws
    std::optional<double> delta_prime; // ... over output laws
    std::optional<int> contraction_index;
    std::optional<Rational> group_gcd;
    std::optional<UnitPole> pole;
    std::optional<long> primitivity_exponent;
    std::optional<bool> invariant_measure_exists; // weak conclusion (no uniqueness)
    std::optional<double> max_lipschitz;
};

struct ErgodicityVerdict {
    VerdictStatus status = VerdictStatus::inconclusive;
    TheoremTag tag = TheoremTag::none;
    VerdictEvidence evidence;
    std::vector<std::string> reasons;
};

std::string to_string(VerdictStatus s);
std::string to_string(TheoremTag t);

// Directed graph on the joint finite state space (mixed-radix vertex ids,
// agent 0 fastest). Kept in one of three forms so the complete-graph case
// stays O(1) no matter the vertex count:
//   complete  - every arc present (self-loops included)
//   uniform   - arc (u,v) iff target[v], identical rows (state-independent
//               agents with some zero-lower-bound maps)
//   explicit_adj - adjacency as packed bit rows
struct TransitionGraph {
    enum class Form { complete, uniform, explicit_adj };

    long n = 0;
    Form form = Form::explicit_adj;
    std::vector<bool> target;                    // uniform form
    std::vector<std::vector<std::uint64_t>> bits; // explicit form, row-major

    bool arc(long u, long v) const;

    static TransitionGraph complete_graph(long n);
    static TransitionGraph from_adjacency(const std::vector<std::vector<int>>& a);

    static constexpr long kVertexCap = 1L << 20;
    static constexpr long kDenseCap = 1L << 13;
};

// Arcs follow map choices whose declared lower bounds are all positive; a
// map that can have probability zero under the validated bound contributes
// no arc. Accepts finite-action agents and finite-state Lipschitz agents.
TransitionGraph transition_graph(const std::vector<AgentModel>& agents);

struct PrimitivityReport {
    bool strongly_connected = false;
    bool primitive = false;
    std::optional<long> exponent; // smallest k with A^k entrywise positive
};

// Strong connectivity by SCC; primitivity by cycle-length gcd, with the
// exponent located by bisection over boolean matrix powers under the
// Wielandt cap (n-1)^2 + 1.
PrimitivityReport is_primitive(const TransitionGraph& graph);

ErgodicityVerdict certify_thm4_linear(const ClosedLoopSystem& system);
ErgodicityVerdict certify_thm5_lipschitz(const ClosedLoopSystem& system);
ErgodicityVerdict certify_thm6_finite(const ClosedLoopSystem& system);
ErgodicityVerdict certify_thm3_negative(const ClosedLoopSystem& system);

// Exact reachable output set of a rational FIR filter driven by the
// aggregate of finite-action agents, initial filter state zero. Sorted
// ascending.
std::vector<Rational> filter_output_alphabet(const std::vector<AgentModel>& agents,
                                             const LinearBlock& filter,
                                             std::size_t cap = 1000000);
std::vector<Rational> filter_output_alphabet(const ClosedLoopSystem& system,
                                             std::size_t cap = 1000000);

// Average-contractivity margin max over the grid of sum_m q_m(pi) log L_m,
// with L_m the product of per-component uniform Lipschitz bounds (more
// conservative than the pointwise ratio). Negative means certified
// contraction on average.
double barnsley_margin(const std::vector<double>& lipschitz,
                       const std::vector<ProbabilityFunction>& probs,
                       const std::vector<double>& pi_grid);
double barnsley_margin(const ProductIFS& ifs, const std::vector<double>& pi_grid);

std::vector<double> default_pi_grid(const Interval& limits, double step = 1e-2);

struct CouplingProbe {
    std::vector<double> distance; // index k = before step k; length horizon+1
    bool converged = false;       // < 1e-6 over the last 10% of entries
};

// Two copies of the system advanced with shared uniform draws; distance is
// the norm over the full augmented state. A heuristic witness, not a proof.
CouplingProbe coupling_probe(const ClosedLoopSystem& system, const SimState& init_a,
                             const SimState& init_b, long horizon, std::uint64_t seed);

struct ICSensitivity {
    std::vector<double> final_mean; // per IC: cross-path mean at the last step
    std::vector<double> final_std;  // sample std
    std::vector<double> ci_half;    // 99% normal CI half-width of the mean
    double max_gap = 0.0;           // max pairwise |mean_i - mean_j|
    double gap_ci_half = 0.0;       // 99% half-width for that pair's difference
    long n_paths = 0;
};

ICSensitivity ic_sensitivity(const ClosedLoopSystem& system, const std::vector<SimState>& ics,
                             long horizon, long n_paths, std::uint64_t seed,
                             const std::string& observable, int workers = 1);

struct StationaryDistribution {
    std::vector<double> prob; // over joint states, mixed radix, agent 0 fastest
    bool unique = true;       // false when the chain is reducible
};

// Stationary law of the open-loop joint chain at a frozen signal.
// State-independent agents give the exact product law; finite-state
// Lipschitz agents go through power iteration on the explicit chain.
StationaryDistribution open_loop_invariant(const std::vector<AgentModel>& agents,
                                           double pi_fixed);

} // namespace ergo
