#pragma once

#include "ergo/agents.hpp"
#include "ergo/blocks.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ergo {

using BlockModel = std::variant<LinearBlock, NonlinearBlock>;

int block_dim(const BlockModel& block);
// (next state, output); the output uses the pre-update state.
std::pair<Vector, double> block_model_step(const BlockModel& block, const Vector& state,
                                           double input);

struct ClosedLoopSystem {
    std::vector<AgentModel> agents;
    BlockModel filter;     // identity: tf_to_ss({1},{1})
    BlockModel controller;
    double r = 0.0;
    std::optional<Rational> r_exact;
    double pi_prev_init = 0.0;
    Interval pi_limits; // clamp pi only when bounded

    std::vector<Vector> agent_init; // one per agent
    Vector filter_init, controller_init;

    void validate() const;
};

struct SimState {
    long k = 0;
    std::vector<Vector> agent_state;
    Vector filter_state, controller_state;
    double pi_prev = 0.0;
};

SimState initial_state(const ClosedLoopSystem& system);

struct StepRecord {
    long k = 0;
    double y = 0.0, yhat = 0.0, e = 0.0, pi = 0.0;
    std::vector<double> agent_y; // per-agent outputs (empty unless tracked)
    std::vector<double> agent_x; // first state component per agent
};

struct Trajectory {
    std::vector<StepRecord> records;
    bool diverged = false;
    long diverged_at = -1; // step index of the first overflow
};

// Thrown by loop_step on overflow (any signal or state beyond 1e300);
// carries the step at which it happened.
struct DivergedPath : std::runtime_error {
    explicit DivergedPath(long step_)
        : std::runtime_error("path diverged at step " + std::to_string(step_)), step(step_) {}
    long step;
};

// One closed-loop step, in canonical order: output draws with pi_prev,
// y = sum y_i, yhat from the filter, e = r - yhat, pi from the controller
// (clamped if limits are bounded), transition draws with pi, then the block
// state updates and pi_prev <- pi. Mutates `state`, returns the step record.
StepRecord loop_step(const ClosedLoopSystem& system, SimState& state, std::uint64_t seed,
                     std::uint64_t path_id, bool track_agents = true);

// Pure in (system, init, horizon, seed, path_id). A diverged path returns
// the finite prefix with the flag set instead of throwing.
Trajectory simulate_path(const ClosedLoopSystem& system, const SimState& init, long horizon,
                         std::uint64_t seed, std::uint64_t path_id, bool track_agents = true);

// Observable names: y, yhat, e, pi, y<i>, x<i> (1-based agent index).
struct ObservableRef {
    enum class Kind { y, yhat, e, pi, agent_y, agent_x } kind = Kind::y;
    int index = 0; // agent index for agent_y / agent_x
};

ObservableRef parse_observable(const std::string& name, std::size_t n_agents);
double observable_value(const StepRecord& rec, const ObservableRef& ref);
double observable_value(const StepRecord& rec, const std::string& name);

struct MonteCarloSummary {
    std::vector<std::string> observables;
    long horizon = 0;
    long n_paths = 0;    // requested
    long n_included = 0; // finished without divergence
    long n_diverged = 0;
    std::uint64_t seed = 0;
    std::string config_digest;
    // [observable][step], across included paths
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> stddev; // population std
    // fraction of recorded steps with y > r, over included paths
    double infeasible_fraction = 0.0;
};

// Cross-path statistics. Paths use path ids 0..n_paths-1 and a shared seed;
// the reduction runs over fixed path blocks with compensated summation, so
// the result is bit-identical for any worker count.
MonteCarloSummary monte_carlo(const ClosedLoopSystem& system, const SimState& init,
                              long horizon, long n_paths, std::uint64_t seed,
                              const std::vector<std::string>& observables, int workers = 1);

// Running Cesaro averages a(k) = (1/(k+1)) sum_{j<=k} g(record_j).
std::vector<double> time_average(const Trajectory& traj, const std::string& observable);

struct Histogram {
    double lo = 0.0, hi = 0.0;
    std::vector<double> mass; // normalized
    long n_samples = 0;
};

// Normalized histogram of post-burn-in samples pooled across trajectories.
// Bin edges split [min, max] of the samples evenly; a degenerate sample set
// collapses to a single unit-mass bin.
Histogram empirical_distribution(const std::vector<Trajectory>& trajectories,
                                 const std::string& observable, long burn_in, int bins);

} // namespace ergo
