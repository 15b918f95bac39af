#include "ergo/agents.hpp"

#include "ergo/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ergo {
namespace {

const ProbabilityFunction& unit_prob() {
    static const ProbabilityFunction one = ProbabilityFunction::constant(1.0);
    return one;
}

// Probe points for normalization checks. Bounded domains get a uniform grid
// plus endpoints; unbounded ones a fixed spread around the origin.
std::vector<double> probe_grid(const Interval& domain) {
    std::vector<double> pts;
    if (domain.bounded()) {
        const int n = 400;
        for (int i = 0; i <= n; ++i)
            pts.push_back(domain.lo + (domain.hi - domain.lo) * i / n);
        return pts;
    }
    for (double x = -20.0; x <= 20.0 + 1e-12; x += 0.05) pts.push_back(x);
    for (double x : {-1e6, -1e4, -100.0, 100.0, 1e4, 1e6}) pts.push_back(domain.clamp(x));
    return pts;
}

void check_family(const std::vector<ProbabilityFunction>& probs,
                  const Interval& domain, const char* what) {
    if (probs.empty())
        throw std::invalid_argument(std::string(what) + ": empty probability family");
    for (const auto& p : probs) p.validate(domain);
    for (double x : probe_grid(domain)) {
        double sum = 0.0;
        for (const auto& p : probs) sum += p(x);
        if (std::abs(sum - 1.0) > 1e-9) {
            std::ostringstream os;
            os << what << ": probabilities sum to " << sum << " at signal " << x;
            throw std::invalid_argument(os.str());
        }
    }
}

std::vector<double>& eval_scratch() {
    thread_local std::vector<double> scratch;
    return scratch;
}

int sample_family(const std::vector<ProbabilityFunction>& probs, double pi, double u) {
    auto& w = eval_scratch();
    w.resize(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) w[j] = probs[j](pi);
    return categorical_sample(w.data(), w.size(), u);
}

} // namespace

FiniteActionAgent FiniteActionAgent::make(std::vector<Rational> actions,
                                          std::vector<ProbabilityFunction> transition_probs) {
    FiniteActionAgent a;
    a.actions = std::move(actions);
    a.transition_probs = std::move(transition_probs);
    a.action_values.reserve(a.actions.size());
    for (const auto& q : a.actions) a.action_values.push_back(q.to_double());
    return a;
}

void FiniteActionAgent::validate(const Interval& signal_domain) const {
    if (actions.empty()) throw std::invalid_argument("finite-action agent: empty action set");
    if (actions.size() != transition_probs.size() || actions.size() != action_values.size())
        throw std::invalid_argument("finite-action agent: size mismatch");
    for (std::size_t i = 0; i < actions.size(); ++i)
        for (std::size_t j = i + 1; j < actions.size(); ++j)
            if (actions[i] == actions[j])
                throw std::invalid_argument("finite-action agent: duplicate action " +
                                            actions[i].to_string());
    check_family(transition_probs, signal_domain, "finite-action agent");
}

void AffineAgent::validate(const Interval& signal_domain) const {
    const int n = dim();
    if (n <= 0 || A.cols() != n) throw std::invalid_argument("affine agent: A must be square");
    if (!A.allFinite()) throw std::invalid_argument("affine agent: non-finite A");
    if (c.size() != n) throw std::invalid_argument("affine agent: c has wrong size");
    if (offsets.size() != transition_probs.size())
        throw std::invalid_argument("affine agent: offsets/probabilities size mismatch");
    for (const auto& b : offsets)
        if (b.size() != n || !b.allFinite())
            throw std::invalid_argument("affine agent: bad offset vector");
    if (output_offsets.size() != output_probs.size())
        throw std::invalid_argument("affine agent: output offsets/probabilities size mismatch");
    for (double d : output_offsets)
        if (!std::isfinite(d)) throw std::invalid_argument("affine agent: non-finite output offset");
    check_family(transition_probs, signal_domain, "affine agent transitions");
    check_family(output_probs, signal_domain, "affine agent outputs");
}

void LipschitzAgent::validate(const Interval& signal_domain) const {
    if (dim <= 0) throw std::invalid_argument("lipschitz agent: dim must be positive");
    if (transitions.empty()) throw std::invalid_argument("lipschitz agent: no transition maps");
    if (transitions.size() != transition_lipschitz.size() ||
        transitions.size() != transition_probs.size())
        throw std::invalid_argument("lipschitz agent: transition family size mismatch");
    if (outputs.empty()) throw std::invalid_argument("lipschitz agent: no output maps");
    if (outputs.size() != output_lipschitz.size() || outputs.size() != output_probs.size())
        throw std::invalid_argument("lipschitz agent: output family size mismatch");
    for (double L : transition_lipschitz)
        if (!(L >= 0.0) || !std::isfinite(L))
            throw std::invalid_argument("lipschitz agent: bad transition constant");
    for (double L : output_lipschitz)
        if (!(L >= 0.0) || !std::isfinite(L))
            throw std::invalid_argument("lipschitz agent: bad output constant");
    check_family(transition_probs, signal_domain, "lipschitz agent transitions");
    check_family(output_probs, signal_domain, "lipschitz agent outputs");
    if (finite_states) {
        if (dim != 1)
            throw std::invalid_argument("lipschitz agent: finite_states requires dim 1");
        if (finite_states->empty())
            throw std::invalid_argument("lipschitz agent: empty finite_states");
        // Every map must close over the declared state list.
        Vector x(1);
        for (const auto& s : *finite_states) {
            x(0) = s.to_double();
            for (const auto& f : transitions) {
                const double image = f(x)(0);
                bool hit = false;
                for (const auto& t : *finite_states)
                    if (std::abs(image - t.to_double()) <= 1e-9) { hit = true; break; }
                if (!hit) {
                    std::ostringstream os;
                    os << "lipschitz agent: map leaves finite_states (from " << s.to_string()
                       << " to " << image << ")";
                    throw std::invalid_argument(os.str());
                }
            }
        }
    }
}

int agent_dim(const AgentModel& agent) {
    return std::visit(
        [](const auto& a) -> int {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) return 1;
            else if constexpr (std::is_same_v<T, AffineAgent>) return a.dim();
            else return a.dim;
        },
        agent);
}

int agent_transition_choices(const AgentModel& agent) {
    return std::visit(
        [](const auto& a) -> int {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>)
                return static_cast<int>(a.actions.size());
            else if constexpr (std::is_same_v<T, AffineAgent>)
                return static_cast<int>(a.offsets.size());
            else
                return static_cast<int>(a.transitions.size());
        },
        agent);
}

int agent_output_choices(const AgentModel& agent) {
    return std::visit(
        [](const auto& a) -> int {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) return 1;
            else if constexpr (std::is_same_v<T, AffineAgent>)
                return static_cast<int>(a.output_offsets.size());
            else
                return static_cast<int>(a.outputs.size());
        },
        agent);
}

const ProbabilityFunction& agent_transition_prob(const AgentModel& agent, int j) {
    return std::visit(
        [j](const auto& a) -> const ProbabilityFunction& { return a.transition_probs.at(j); },
        agent);
}

const ProbabilityFunction& agent_output_prob(const AgentModel& agent, int l) {
    return std::visit(
        [l](const auto& a) -> const ProbabilityFunction& {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) {
                if (l != 0) throw std::out_of_range("finite-action agent has one output map");
                return unit_prob();
            } else {
                return a.output_probs.at(l);
            }
        },
        agent);
}

Vector agent_apply_transition(const AgentModel& agent, int j, const Vector& state) {
    return std::visit(
        [j, &state](const auto& a) -> Vector {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) {
                Vector next(1);
                next(0) = a.action_values.at(j);
                return next;
            } else if constexpr (std::is_same_v<T, AffineAgent>) {
                return a.A * state + a.offsets.at(j);
            } else {
                return a.transitions.at(j)(state);
            }
        },
        agent);
}

double agent_apply_output(const AgentModel& agent, int l, const Vector& state) {
    return std::visit(
        [l, &state](const auto& a) -> double {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) {
                if (l != 0) throw std::out_of_range("finite-action agent has one output map");
                return state(0);
            } else if constexpr (std::is_same_v<T, AffineAgent>) {
                return a.c.dot(state) + a.output_offsets.at(l);
            } else {
                return a.outputs.at(l)(state);
            }
        },
        agent);
}

int sample_transition_index(const AgentModel& agent, double pi, double u) {
    return std::visit(
        [pi, u](const auto& a) -> int { return sample_family(a.transition_probs, pi, u); },
        agent);
}

int sample_output_index(const AgentModel& agent, double pi, double u) {
    return std::visit(
        [pi, u](const auto& a) -> int {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) {
                (void)pi;
                (void)u;
                return 0;
            } else {
                return sample_family(a.output_probs, pi, u);
            }
        },
        agent);
}

Vector agent_transition(const AgentModel& agent, const Vector& state, double pi, double u) {
    return agent_apply_transition(agent, sample_transition_index(agent, pi, u), state);
}

double agent_output(const AgentModel& agent, const Vector& state, double pi, double u) {
    return agent_apply_output(agent, sample_output_index(agent, pi, u), state);
}

void agent_validate(const AgentModel& agent, const Interval& signal_domain) {
    std::visit([&](const auto& a) { a.validate(signal_domain); }, agent);
}

std::vector<double> lipschitz_bound(const AgentModel& agent) {
    return std::visit(
        [](const auto& a) -> std::vector<double> {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, FiniteActionAgent>) {
                throw std::invalid_argument(
                    "lipschitz_bound: finite-action agents have no contraction constants; "
                    "use the transition-graph analysis");
            } else if constexpr (std::is_same_v<T, AffineAgent>) {
                const double L = induced_two_norm(a.A);
                return std::vector<double>(a.offsets.size(), L);
            } else {
                return a.transition_lipschitz;
            }
        },
        agent);
}

std::optional<std::string> lipschitz_falsify(const LipschitzAgent& agent, int n_samples,
                                             std::uint64_t seed, double box) {
    RngStream rs{seed, rng::mix(0x11b5c007u), 0};
    Vector x(agent.dim), y(agent.dim);
    for (int s = 0; s < n_samples; ++s) {
        for (int d = 0; d < agent.dim; ++d) {
            x(d) = box * (2.0 * rs.next_uniform() - 1.0);
            y(d) = box * (2.0 * rs.next_uniform() - 1.0);
        }
        const double dist = (x - y).norm();
        if (dist < 1e-12) continue;
        for (std::size_t j = 0; j < agent.transitions.size(); ++j) {
            const double stretch = (agent.transitions[j](x) - agent.transitions[j](y)).norm();
            if (stretch > agent.transition_lipschitz[j] * dist * (1.0 + 1e-9) + 1e-12) {
                std::ostringstream os;
                os << "transition map " << j << ": ratio " << stretch / dist
                   << " exceeds declared " << agent.transition_lipschitz[j];
                return os.str();
            }
        }
        for (std::size_t l = 0; l < agent.outputs.size(); ++l) {
            const double stretch = std::abs(agent.outputs[l](x) - agent.outputs[l](y));
            if (stretch > agent.output_lipschitz[l] * dist * (1.0 + 1e-9) + 1e-12) {
                std::ostringstream os;
                os << "output map " << l << ": ratio " << stretch / dist << " exceeds declared "
                   << agent.output_lipschitz[l];
                return os.str();
            }
        }
    }
    return std::nullopt;
}

ProductIFS::ProductIFS(std::vector<AgentModel> agents, std::uint64_t materialize_cap)
    : agents_(std::move(agents)), cap_(materialize_cap) {
    if (agents_.empty()) throw std::invalid_argument("product ifs: no agents");
    std::uint64_t size = 1;
    bool overflow = false;
    for (const auto& ag : agents_) {
        w_.push_back(agent_transition_choices(ag));
        h_.push_back(agent_output_choices(ag));
        state_offset_.push_back(total_dim_);
        total_dim_ += agent_dim(ag);
        for (std::uint64_t factor : {std::uint64_t(w_.back()), std::uint64_t(h_.back())}) {
            if (!overflow && size > std::uint64_t(-1) / factor) overflow = true;
            if (!overflow) size *= factor;
        }
    }
    if (!overflow) size_ = size;
}

void ProductIFS::check_cap() const {
    if (!size_ || *size_ > cap_)
        throw std::runtime_error("product ifs: index set exceeds materialization cap");
}

ProductIFS::Choice ProductIFS::choice_from_flat(std::uint64_t m) const {
    check_cap();
    if (m >= *size_) throw std::out_of_range("product ifs: flat index out of range");
    Choice ch;
    ch.transition.resize(agents_.size());
    ch.output.resize(agents_.size());
    // Mixed radix, transition digits first, agent 0 fastest.
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        ch.transition[i] = static_cast<int>(m % w_[i]);
        m /= w_[i];
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        ch.output[i] = static_cast<int>(m % h_[i]);
        m /= h_[i];
    }
    return ch;
}

double ProductIFS::probability(const Choice& choice, double pi) const {
    double q = 1.0;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        q *= agent_transition_prob(agents_[i], choice.transition[i])(pi);
        q *= agent_output_prob(agents_[i], choice.output[i])(pi);
    }
    return q;
}

double ProductIFS::probability_lower_bound(const Choice& choice) const {
    double q = 1.0;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        q *= agent_transition_prob(agents_[i], choice.transition[i]).lower_bound;
        q *= agent_output_prob(agents_[i], choice.output[i]).lower_bound;
    }
    return q;
}

Vector ProductIFS::apply(const Choice& choice, const Vector& stacked_state) const {
    if (stacked_state.size() != total_dim_)
        throw std::invalid_argument("product ifs: stacked state has wrong size");
    Vector next(total_dim_);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        const int n = agent_dim(agents_[i]);
        next.segment(state_offset_[i], n) = agent_apply_transition(
            agents_[i], choice.transition[i], stacked_state.segment(state_offset_[i], n));
    }
    return next;
}

double ProductIFS::output_sum(const Choice& choice, const Vector& stacked_state) const {
    if (stacked_state.size() != total_dim_)
        throw std::invalid_argument("product ifs: stacked state has wrong size");
    double y = 0.0;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        const int n = agent_dim(agents_[i]);
        y += agent_apply_output(agents_[i], choice.output[i],
                                stacked_state.segment(state_offset_[i], n));
    }
    return y;
}

std::vector<double> ProductIFS::materialize_probabilities(double pi) const {
    check_cap();
    std::vector<double> q(static_cast<std::size_t>(*size_));
    for (std::uint64_t m = 0; m < *size_; ++m) q[m] = probability(choice_from_flat(m), pi);
    return q;
}

} // namespace ergo
