#include "ergo/loop.hpp"

#include "ergo/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace ergo {
namespace {

constexpr double kOverflow = 1e300;

// true for NaN as well
bool too_big(double v) { return !(std::abs(v) <= kOverflow); }

struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double x) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

} // namespace

int block_dim(const BlockModel& block) {
    return std::visit(
        [](const auto& b) -> int {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, LinearBlock>) return b.dim();
            else return b.dim;
        },
        block);
}

std::pair<Vector, double> block_model_step(const BlockModel& block, const Vector& state,
                                           double input) {
    return std::visit(
        [&](const auto& b) -> std::pair<Vector, double> {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, LinearBlock>) {
                return block_step(b, state, input);
            } else {
                if (!b.transition || !b.output)
                    throw std::invalid_argument("nonlinear block: missing maps");
                return {b.transition(state, input), b.output(state, input)};
            }
        },
        block);
}

void ClosedLoopSystem::validate() const {
    if (agents.empty()) throw std::invalid_argument("closed loop: no agents");
    if (!std::isfinite(r)) throw std::invalid_argument("closed loop: non-finite reference");
    if (r_exact && std::abs(r_exact->to_double() - r) > 1e-12)
        throw std::invalid_argument("closed loop: r_exact disagrees with r");
    if (pi_limits.lo > pi_limits.hi)
        throw std::invalid_argument("closed loop: empty signal interval");
    if (agent_init.size() != agents.size())
        throw std::invalid_argument("closed loop: one initial state per agent required");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        try {
            agent_validate(agents[i], pi_limits);
        } catch (const std::exception& e) {
            throw std::invalid_argument("agent " + std::to_string(i) + ": " + e.what());
        }
        if (agent_init[i].size() != agent_dim(agents[i]))
            throw std::invalid_argument("closed loop: agent initial state has wrong size");
    }
    if (const auto* lb = std::get_if<LinearBlock>(&filter)) lb->validate();
    if (const auto* lb = std::get_if<LinearBlock>(&controller)) lb->validate();
    if (filter_init.size() != block_dim(filter))
        throw std::invalid_argument("closed loop: filter initial state has wrong size");
    if (controller_init.size() != block_dim(controller))
        throw std::invalid_argument("closed loop: controller initial state has wrong size");
}

SimState initial_state(const ClosedLoopSystem& system) {
    SimState s;
    s.agent_state = system.agent_init;
    s.filter_state = system.filter_init;
    s.controller_state = system.controller_init;
    s.pi_prev = system.pi_prev_init;
    return s;
}

StepRecord loop_step(const ClosedLoopSystem& system, SimState& state, std::uint64_t seed,
                     std::uint64_t path_id, bool track_agents) {
    const std::size_t n = system.agents.size();
    const auto k = static_cast<std::uint64_t>(state.k);

    StepRecord rec;
    rec.k = state.k;
    if (track_agents) {
        rec.agent_y.resize(n);
        rec.agent_x.resize(n);
    }

    // (1)-(2) output draws at pi_prev, then the aggregate
    double y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int l = 0;
        if (agent_output_choices(system.agents[i]) > 1) {
            const double u = rng::uniform_at(seed, rng::loop_stream(path_id, k, i, 0), 0);
            l = sample_output_index(system.agents[i], state.pi_prev, u);
        }
        const double yi = agent_apply_output(system.agents[i], l, state.agent_state[i]);
        if (track_agents) {
            rec.agent_y[i] = yi;
            rec.agent_x[i] = state.agent_state[i](0);
        }
        y += yi;
    }

    // (3)-(5) filter, error, controller
    auto [next_xf, yhat] = block_model_step(system.filter, state.filter_state, y);
    const double e = system.r - yhat;
    auto [next_xc, pi_raw] = block_model_step(system.controller, state.controller_state, e);
    const double pi = system.pi_limits.bounded() ? system.pi_limits.clamp(pi_raw) : pi_raw;

    auto state_big = [](const Vector& v) {
        return !v.allFinite() || (v.size() > 0 && v.cwiseAbs().maxCoeff() > kOverflow);
    };
    if (too_big(y) || too_big(yhat) || too_big(e) || too_big(pi_raw) || state_big(next_xf) ||
        state_big(next_xc))
        throw DivergedPath(state.k);

    rec.y = y;
    rec.yhat = yhat;
    rec.e = e;
    rec.pi = pi;

    // (6) transition draws at pi(k)
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng::uniform_at(seed, rng::loop_stream(path_id, k, i, 1), 0);
        const int j = sample_transition_index(system.agents[i], pi, u);
        state.agent_state[i] = agent_apply_transition(system.agents[i], j, state.agent_state[i]);
        if (state_big(state.agent_state[i])) throw DivergedPath(state.k);
    }

    // (7)-(8) commit block states and the delayed signal
    state.filter_state = std::move(next_xf);
    state.controller_state = std::move(next_xc);
    state.pi_prev = pi;
    state.k += 1;
    return rec;
}

Trajectory simulate_path(const ClosedLoopSystem& system, const SimState& init, long horizon,
                         std::uint64_t seed, std::uint64_t path_id, bool track_agents) {
    if (horizon < 1) throw std::invalid_argument("simulate_path: horizon must be >= 1");
    Trajectory traj;
    traj.records.reserve(static_cast<std::size_t>(horizon));
    SimState state = init;
    for (long k = 0; k < horizon; ++k) {
        try {
            traj.records.push_back(loop_step(system, state, seed, path_id, track_agents));
        } catch (const DivergedPath& d) {
            traj.diverged = true;
            traj.diverged_at = d.step;
            break;
        }
    }
    return traj;
}

ObservableRef parse_observable(const std::string& name, std::size_t n_agents) {
    ObservableRef ref;
    if (name == "y") { ref.kind = ObservableRef::Kind::y; return ref; }
    if (name == "yhat") { ref.kind = ObservableRef::Kind::yhat; return ref; }
    if (name == "e") { ref.kind = ObservableRef::Kind::e; return ref; }
    if (name == "pi") { ref.kind = ObservableRef::Kind::pi; return ref; }
    if (name.size() >= 2 && (name[0] == 'y' || name[0] == 'x')) {
        bool digits = true;
        for (std::size_t i = 1; i < name.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
        if (digits) {
            const int idx = std::stoi(name.substr(1));
            if (idx < 1 || static_cast<std::size_t>(idx) > n_agents)
                throw std::invalid_argument("observable " + name + ": agent index out of range");
            ref.kind = name[0] == 'y' ? ObservableRef::Kind::agent_y : ObservableRef::Kind::agent_x;
            ref.index = idx - 1;
            return ref;
        }
    }
    throw std::invalid_argument("unknown observable: " + name);
}

double observable_value(const StepRecord& rec, const ObservableRef& ref) {
    switch (ref.kind) {
        case ObservableRef::Kind::y: return rec.y;
        case ObservableRef::Kind::yhat: return rec.yhat;
        case ObservableRef::Kind::e: return rec.e;
        case ObservableRef::Kind::pi: return rec.pi;
        case ObservableRef::Kind::agent_y: return rec.agent_y.at(ref.index);
        case ObservableRef::Kind::agent_x: return rec.agent_x.at(ref.index);
    }
    throw std::logic_error("unreachable");
}

double observable_value(const StepRecord& rec, const std::string& name) {
    return observable_value(rec, parse_observable(name, rec.agent_y.size()));
}

MonteCarloSummary monte_carlo(const ClosedLoopSystem& system, const SimState& init,
                              long horizon, long n_paths, std::uint64_t seed,
                              const std::vector<std::string>& observables, int workers) {
    if (n_paths < 1) throw std::invalid_argument("monte_carlo: n_paths must be >= 1");
    if (horizon < 1) throw std::invalid_argument("monte_carlo: horizon must be >= 1");
    if (observables.empty()) throw std::invalid_argument("monte_carlo: no observables");
    if (workers < 1) workers = 1;

    std::vector<ObservableRef> refs;
    refs.reserve(observables.size());
    for (const auto& name : observables) refs.push_back(parse_observable(name, system.agents.size()));
    const std::size_t n_obs = refs.size();
    const auto h = static_cast<std::size_t>(horizon);

    // Fixed path blocks make the reduction schedule-independent: workers fill
    // per-block partial sums (compensated, in path order), and the final
    // combine walks blocks in index order.
    constexpr long kBlock = 32;
    const long n_blocks = (n_paths + kBlock - 1) / kBlock;

    struct BlockPartial {
        std::vector<double> sum, sumsq; // n_obs * horizon
        long included = 0, diverged = 0, infeasible = 0, steps = 0;
    };
    std::vector<BlockPartial> partials(static_cast<std::size_t>(n_blocks));

    std::atomic<long> next_block{0};
    auto work = [&]() {
        std::vector<Kahan> acc_sum(n_obs * h), acc_sq(n_obs * h);
        for (;;) {
            const long b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            for (auto& a : acc_sum) a = Kahan{};
            for (auto& a : acc_sq) a = Kahan{};
            BlockPartial part;
            const long lo = b * kBlock, hi = std::min(n_paths, lo + kBlock);
            for (long p = lo; p < hi; ++p) {
                Trajectory traj = simulate_path(system, init, horizon, seed,
                                                static_cast<std::uint64_t>(p));
                if (traj.diverged) {
                    ++part.diverged;
                    continue;
                }
                ++part.included;
                for (std::size_t k = 0; k < h; ++k) {
                    const StepRecord& rec = traj.records[k];
                    ++part.steps;
                    if (rec.y > system.r) ++part.infeasible;
                    for (std::size_t o = 0; o < n_obs; ++o) {
                        const double v = observable_value(rec, refs[o]);
                        acc_sum[o * h + k].add(v);
                        acc_sq[o * h + k].add(v * v);
                    }
                }
            }
            part.sum.resize(n_obs * h);
            part.sumsq.resize(n_obs * h);
            for (std::size_t i = 0; i < n_obs * h; ++i) {
                part.sum[i] = acc_sum[i].value();
                part.sumsq[i] = acc_sq[i].value();
            }
            partials[static_cast<std::size_t>(b)] = std::move(part);
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    MonteCarloSummary out;
    out.observables = observables;
    out.horizon = horizon;
    out.n_paths = n_paths;
    out.seed = seed;

    std::vector<Kahan> total_sum(n_obs * h), total_sq(n_obs * h);
    long infeasible = 0, steps = 0;
    for (const auto& part : partials) {
        out.n_included += part.included;
        out.n_diverged += part.diverged;
        infeasible += part.infeasible;
        steps += part.steps;
        for (std::size_t i = 0; i < part.sum.size(); ++i) {
            total_sum[i].add(part.sum[i]);
            total_sq[i].add(part.sumsq[i]);
        }
    }
    if (out.n_included == 0) throw std::runtime_error("monte_carlo: every path diverged");

    const double inv_n = 1.0 / static_cast<double>(out.n_included);
    out.mean.assign(n_obs, std::vector<double>(h));
    out.stddev.assign(n_obs, std::vector<double>(h));
    for (std::size_t o = 0; o < n_obs; ++o) {
        for (std::size_t k = 0; k < h; ++k) {
            const double m = total_sum[o * h + k].value() * inv_n;
            const double v = std::max(0.0, total_sq[o * h + k].value() * inv_n - m * m);
            out.mean[o][k] = m;
            out.stddev[o][k] = std::sqrt(v);
        }
    }
    out.infeasible_fraction =
        steps == 0 ? 0.0 : static_cast<double>(infeasible) / static_cast<double>(steps);
    return out;
}

std::vector<double> time_average(const Trajectory& traj, const std::string& observable) {
    if (traj.records.empty()) throw std::invalid_argument("time_average: empty trajectory");
    const ObservableRef ref = parse_observable(observable, traj.records.front().agent_y.size());
    std::vector<double> out(traj.records.size());
    Kahan acc;
    for (std::size_t k = 0; k < traj.records.size(); ++k) {
        acc.add(observable_value(traj.records[k], ref));
        out[k] = acc.value() / static_cast<double>(k + 1);
    }
    return out;
}

Histogram empirical_distribution(const std::vector<Trajectory>& trajectories,
                                 const std::string& observable, long burn_in, int bins) {
    if (bins < 1) throw std::invalid_argument("empirical_distribution: bins must be >= 1");
    std::vector<double> samples;
    for (const auto& traj : trajectories) {
        if (traj.records.empty()) continue;
        const ObservableRef ref =
            parse_observable(observable, traj.records.front().agent_y.size());
        for (const auto& rec : traj.records)
            if (rec.k >= burn_in) samples.push_back(observable_value(rec, ref));
    }
    if (samples.empty()) throw std::invalid_argument("empirical_distribution: no samples");

    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    Histogram hist;
    hist.lo = *mn;
    hist.hi = *mx;
    hist.n_samples = static_cast<long>(samples.size());
    if (*mx - *mn <= 0.0) {
        hist.mass.assign(1, 1.0);
        return hist;
    }
    hist.mass.assign(static_cast<std::size_t>(bins), 0.0);
    const double width = (*mx - *mn) / bins;
    for (double v : samples) {
        auto idx = static_cast<long>((v - *mn) / width);
        idx = std::clamp(idx, long(0), long(bins - 1));
        hist.mass[static_cast<std::size_t>(idx)] += 1.0;
    }
    for (auto& m : hist.mass) m /= static_cast<double>(samples.size());
    return hist;
}

} // namespace ergo
