#include "ergo/config.hpp"

#include "ergo/report.hpp"

#include <fstream>
#include <sstream>

namespace ergo {

using nlohmann::json;

namespace {

// Numbers in configs mean their decimal literal: round-trip through the
// shortest representation, so 0.1 becomes exactly 1/10.
Rational exactify(double v) { return Rational::parse(format_shortest(v)); }

struct Ctx {
    std::vector<std::string>& errs;
    Interval domain; // declared signal interval, for lower-bound validation
    void fail(const std::string& path, const std::string& msg) {
        errs.push_back(path + ": " + msg);
    }
};

const json* want(const json& j, const char* key, const std::string& path, Ctx& ctx,
                 bool required = true) {
    if (!j.is_object()) {
        ctx.fail(path, "expected an object");
        return nullptr;
    }
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) ctx.fail(path + "." + key, "required");
        return nullptr;
    }
    return &*it;
}

std::optional<Rational> as_rational(const json& j, const std::string& path, Ctx& ctx) {
    try {
        if (j.is_string()) return Rational::parse(j.get<std::string>());
        if (j.is_number_integer()) return Rational(BigInt(j.get<long long>()));
        if (j.is_number()) return exactify(j.get<double>());
    } catch (const std::exception& e) {
        ctx.fail(path, e.what());
        return std::nullopt;
    }
    ctx.fail(path, "expected a number or rational string");
    return std::nullopt;
}

std::optional<double> as_double(const json& j, const std::string& path, Ctx& ctx) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        try {
            return Rational::parse(j.get<std::string>()).to_double();
        } catch (const std::exception& e) {
            ctx.fail(path, e.what());
            return std::nullopt;
        }
    }
    ctx.fail(path, "expected a number");
    return std::nullopt;
}

std::optional<long> as_long(const json& j, const std::string& path, Ctx& ctx) {
    if (j.is_number_integer()) return j.get<long>();
    ctx.fail(path, "expected an integer");
    return std::nullopt;
}

std::vector<Rational> rational_list(const json& j, const std::string& path, Ctx& ctx) {
    std::vector<Rational> out;
    if (!j.is_array() || j.empty()) {
        ctx.fail(path, "expected a nonempty array");
        return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i)
        if (auto q = as_rational(j[i], path + "[" + std::to_string(i) + "]", ctx))
            out.push_back(*q);
    return out;
}

ProbabilityFunction parse_prob(const json& j, const std::string& path, Ctx& ctx) {
    ProbabilityFunction p = ProbabilityFunction::constant(0.0);
    if (!j.is_object()) {
        ctx.fail(path, "expected a probability object");
        return p;
    }
    const std::string kind = j.value("kind", "logistic");
    const double lb = j.value("lower_bound", 0.0);
    if (kind == "logistic") {
        double base = 0, scale = 0, rate = 0, center = 0;
        if (auto* f = want(j, "base", path, ctx))
            base = as_double(*f, path + ".base", ctx).value_or(0.0);
        if (auto* f = want(j, "scale", path, ctx))
            scale = as_double(*f, path + ".scale", ctx).value_or(0.0);
        if (auto* f = want(j, "rate", path, ctx))
            rate = as_double(*f, path + ".rate", ctx).value_or(0.0);
        if (auto* f = want(j, "center", path, ctx))
            center = as_double(*f, path + ".center", ctx).value_or(0.0);
        p = ProbabilityFunction::logistic(base, scale, rate, center, lb);
    } else if (kind == "constant") {
        double p0 = 0;
        if (auto* f = want(j, "p0", path, ctx))
            p0 = as_double(*f, path + ".p0", ctx).value_or(0.0);
        p = ProbabilityFunction::constant(p0);
        if (j.contains("lower_bound")) p.lower_bound = lb;
    } else if (kind == "table") {
        std::vector<std::pair<double, double>> pts;
        if (auto* f = want(j, "points", path, ctx)) {
            if (!f->is_array()) {
                ctx.fail(path + ".points", "expected an array of [pi, p] pairs");
            } else {
                for (std::size_t i = 0; i < f->size(); ++i) {
                    const auto& e = (*f)[i];
                    const std::string ep = path + ".points[" + std::to_string(i) + "]";
                    if (!e.is_array() || e.size() != 2) {
                        ctx.fail(ep, "expected [pi, p]");
                        continue;
                    }
                    auto x = as_double(e[0], ep, ctx);
                    auto y = as_double(e[1], ep, ctx);
                    if (x && y) pts.emplace_back(*x, *y);
                }
            }
        }
        if (pts.empty()) pts.emplace_back(0.0, 0.0);
        p = ProbabilityFunction::table(std::move(pts), lb);
    } else {
        ctx.fail(path + ".kind", "unknown probability kind '" + kind + "'");
    }
    if (j.contains("dini") && j["dini"].is_boolean()) p.dini = j["dini"].get<bool>();
    try {
        p.validate(ctx.domain);
    } catch (const std::exception& e) {
        ctx.fail(path, e.what());
    }
    return p;
}

std::vector<ProbabilityFunction> parse_probs(const json& j, const std::string& path, Ctx& ctx) {
    std::vector<ProbabilityFunction> out;
    if (!j.is_array() || j.empty()) {
        ctx.fail(path, "expected a nonempty array of probability objects");
        return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(parse_prob(j[i], path + "[" + std::to_string(i) + "]", ctx));
    return out;
}

Vector parse_vector(const json& j, const std::string& path, Ctx& ctx) {
    if (!j.is_array()) {
        ctx.fail(path, "expected an array");
        return Vector();
    }
    Vector v(static_cast<long>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<long>(i)) =
            as_double(j[i], path + "[" + std::to_string(i) + "]", ctx).value_or(0.0);
    return v;
}

Matrix parse_matrix(const json& j, const std::string& path, Ctx& ctx) {
    if (!j.is_array() || j.empty()) {
        ctx.fail(path, "expected a nonempty array of rows");
        return Matrix();
    }
    const auto rows = static_cast<long>(j.size());
    long cols = -1;
    Matrix m;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        if (!j[r].is_array()) {
            ctx.fail(rp, "expected a row array");
            return Matrix();
        }
        if (cols < 0) {
            cols = static_cast<long>(j[r].size());
            m.resize(rows, cols);
        }
        if (static_cast<long>(j[r].size()) != cols) {
            ctx.fail(rp, "ragged matrix");
            return Matrix();
        }
        for (std::size_t c = 0; c < j[r].size(); ++c)
            m(static_cast<long>(r), static_cast<long>(c)) =
                as_double(j[r][c], rp + "[" + std::to_string(c) + "]", ctx).value_or(0.0);
    }
    return m;
}

LinearBlock parse_block(const json& j, const std::string& path, Ctx& ctx, bool is_controller) {
    LinearBlock blk = tf_to_ss(std::vector<Rational>{Rational(1)},
                               std::vector<Rational>{Rational(1)}); // identity default
    if (!j.is_object()) {
        ctx.fail(path, "expected an object");
        return blk;
    }
    const std::string type = j.value("type", is_controller ? "pi" : "identity");
    try {
        if (type == "pi" || type == "lag") {
            // C(z) = kappa (z - alpha) / (z - beta), beta = 1 for the PI
            Rational kappa(1, 10), alpha(-4), beta(1);
            if (auto* f = want(j, "kappa", path, ctx))
                kappa = as_rational(*f, path + ".kappa", ctx).value_or(kappa);
            if (auto* f = want(j, "alpha", path, ctx))
                alpha = as_rational(*f, path + ".alpha", ctx).value_or(alpha);
            if (type == "lag") {
                if (auto* f = want(j, "beta", path, ctx))
                    beta = as_rational(*f, path + ".beta", ctx).value_or(beta);
            }
            blk = tf_to_ss({kappa, Rational(0) - kappa * alpha}, {Rational(1), Rational(0) - beta});
        } else if (type == "fir") {
            std::vector<Rational> taps;
            if (auto* f = want(j, "taps", path, ctx)) taps = rational_list(*f, path + ".taps", ctx);
            if (taps.empty()) taps.push_back(Rational(1));
            blk = tf_to_ss(taps, {Rational(1)});
        } else if (type == "identity") {
            // already the identity
        } else if (type == "tf") {
            std::vector<Rational> num, den;
            if (auto* f = want(j, "num", path, ctx)) num = rational_list(*f, path + ".num", ctx);
            if (auto* f = want(j, "den", path, ctx)) den = rational_list(*f, path + ".den", ctx);
            if (!num.empty() && !den.empty()) blk = tf_to_ss(num, den);
        } else if (type == "ss") {
            Matrix A;
            Vector B;
            RowVector C;
            double D = 0.0;
            if (auto* f = want(j, "A", path, ctx)) A = parse_matrix(*f, path + ".A", ctx);
            if (auto* f = want(j, "B", path, ctx)) B = parse_vector(*f, path + ".B", ctx);
            if (auto* f = want(j, "C", path, ctx))
                C = parse_vector(*f, path + ".C", ctx).transpose();
            if (auto* f = want(j, "D", path, ctx))
                D = as_double(*f, path + ".D", ctx).value_or(0.0);
            blk = LinearBlock::from_ss(A, B, C, D);
        } else {
            ctx.fail(path + ".type", "unknown block type '" + type + "'");
        }
    } catch (const std::exception& e) {
        ctx.fail(path, e.what());
    }
    return blk;
}

void parse_agents(const json& j, const std::string& path, Ctx& ctx, ClosedLoopSystem& sys) {
    if (!j.is_array() || j.empty()) {
        ctx.fail(path, "expected a nonempty agent array");
        return;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string ap = path + "[" + std::to_string(i) + "]";
        const auto& a = j[i];
        if (!a.is_object()) {
            ctx.fail(ap, "expected an object");
            continue;
        }
        const long count = a.contains("count")
                               ? as_long(a["count"], ap + ".count", ctx).value_or(1)
                               : 1;
        if (count < 1) {
            ctx.fail(ap + ".count", "must be >= 1");
            continue;
        }
        const std::string type = a.value("type", "finite");
        if (type == "finite") {
            std::vector<Rational> actions;
            if (auto* f = want(a, "actions", ap, ctx))
                actions = rational_list(*f, ap + ".actions", ctx);
            std::vector<ProbabilityFunction> probs;
            if (auto* f = want(a, "probs", ap, ctx)) probs = parse_probs(*f, ap + ".probs", ctx);
            if (actions.empty() || probs.size() != actions.size()) {
                if (!actions.empty() && !probs.empty())
                    ctx.fail(ap, "needs one probability per action");
                continue;
            }
            std::optional<Rational> init;
            if (auto* f = want(a, "init", ap, ctx)) init = as_rational(*f, ap + ".init", ctx);
            if (!init) continue;
            long init_idx = -1;
            for (std::size_t k = 0; k < actions.size(); ++k)
                if (actions[k] == *init) init_idx = static_cast<long>(k);
            if (init_idx < 0) {
                ctx.fail(ap + ".init", "must be one of the actions");
                continue;
            }
            auto agent = FiniteActionAgent::make(actions, probs);
            Vector x0(1);
            x0(0) = agent.action_values[static_cast<std::size_t>(init_idx)];
            for (long rep = 0; rep < count; ++rep) {
                sys.agents.emplace_back(agent);
                sys.agent_init.push_back(x0);
            }
        } else if (type == "affine") {
            AffineAgent agent;
            if (auto* f = want(a, "A", ap, ctx)) agent.A = parse_matrix(*f, ap + ".A", ctx);
            if (auto* f = want(a, "c", ap, ctx))
                agent.c = parse_vector(*f, ap + ".c", ctx).transpose();
            if (auto* f = want(a, "offsets", ap, ctx)) {
                if (f->is_array())
                    for (std::size_t k = 0; k < f->size(); ++k)
                        agent.offsets.push_back(
                            parse_vector((*f)[k], ap + ".offsets[" + std::to_string(k) + "]", ctx));
                else
                    ctx.fail(ap + ".offsets", "expected an array of vectors");
            }
            if (auto* f = want(a, "probs", ap, ctx))
                agent.transition_probs = parse_probs(*f, ap + ".probs", ctx);
            if (auto* f = want(a, "output_offsets", ap, ctx)) {
                if (f->is_array())
                    for (std::size_t k = 0; k < f->size(); ++k)
                        agent.output_offsets.push_back(
                            as_double((*f)[k], ap + ".output_offsets[" + std::to_string(k) + "]", ctx)
                                .value_or(0.0));
                else
                    ctx.fail(ap + ".output_offsets", "expected an array");
            }
            if (auto* f = want(a, "output_probs", ap, ctx))
                agent.output_probs = parse_probs(*f, ap + ".output_probs", ctx);
            Vector x0;
            if (auto* f = want(a, "init", ap, ctx)) x0 = parse_vector(*f, ap + ".init", ctx);
            for (long rep = 0; rep < count; ++rep) {
                sys.agents.emplace_back(agent);
                sys.agent_init.push_back(x0);
            }
        } else {
            ctx.fail(ap + ".type", "unknown agent type '" + type + "'");
        }
    }
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> errs)
    : std::runtime_error([&errs] {
          std::ostringstream os;
          os << "config validation failed:";
          for (const auto& e : errs) os << "\n  - " << e;
          return os.str();
      }()),
      errors(std::move(errs)) {}

json parse_config_text(const std::string& text) {
    return json::parse(text, nullptr, true, /*ignore_comments=*/true);
}

std::string config_digest(const json& j) {
    // dump() emits keys in sorted order, so formatting/ordering variations
    // of the source file hash identically.
    return hex64(fnv1a64(j.dump()));
}

ExperimentConfig config_from_json(const json& j) {
    std::vector<std::string> errs;
    Ctx ctx{errs};
    ExperimentConfig cfg;

    const json* sys = want(j, "system", "", ctx);
    if (sys) {
        if (auto* f = want(*sys, "reference", "system", ctx)) {
            if (auto r = as_rational(*f, "system.reference", ctx)) {
                cfg.system.r_exact = *r;
                cfg.system.r = r->to_double();
            }
        }
        if (sys->contains("pi_limits")) {
            const auto& lim = (*sys)["pi_limits"];
            if (auto* f = want(lim, "lo", "system.pi_limits", ctx))
                cfg.system.pi_limits.lo = as_double(*f, "system.pi_limits.lo", ctx)
                                              .value_or(cfg.system.pi_limits.lo);
            if (auto* f = want(lim, "hi", "system.pi_limits", ctx))
                cfg.system.pi_limits.hi = as_double(*f, "system.pi_limits.hi", ctx)
                                              .value_or(cfg.system.pi_limits.hi);
        }
        if (sys->contains("pi_prev_init"))
            cfg.system.pi_prev_init = as_double((*sys)["pi_prev_init"], "system.pi_prev_init", ctx)
                                          .value_or(0.0);
        ctx.domain = cfg.system.pi_limits;

        if (auto* f = want(*sys, "controller", "system", ctx)) {
            LinearBlock ctrl = parse_block(*f, "system.controller", ctx, true);
            cfg.system.controller_init = Vector::Zero(ctrl.dim());
            if (f->contains("init")) {
                Vector v = parse_vector((*f)["init"], "system.controller.init", ctx);
                if (v.size() == ctrl.dim()) cfg.system.controller_init = v;
                else ctx.fail("system.controller.init", "wrong length for the realized block");
            }
            cfg.system.controller = std::move(ctrl);
        }
        if (auto* f = want(*sys, "filter", "system", ctx, false)) {
            LinearBlock filt = parse_block(*f, "system.filter", ctx, false);
            cfg.system.filter_init = Vector::Zero(filt.dim());
            if (f->contains("init")) {
                Vector v = parse_vector((*f)["init"], "system.filter.init", ctx);
                if (v.size() == filt.dim()) cfg.system.filter_init = v;
                else ctx.fail("system.filter.init", "wrong length for the realized block");
            }
            cfg.system.filter = std::move(filt);
        } else {
            cfg.system.filter = tf_to_ss(std::vector<Rational>{Rational(1)},
                                         std::vector<Rational>{Rational(1)});
            cfg.system.filter_init = Vector();
        }
        if (auto* f = want(*sys, "agents", "system", ctx))
            parse_agents(*f, "system.agents", ctx, cfg.system);
    }

    const json* run = want(j, "run", "", ctx);
    if (run) {
        if (!run->contains("seed")) {
            ctx.fail("run.seed", "seed required (no implicit entropy)");
        } else if ((*run)["seed"].is_number_integer()) {
            cfg.seed = (*run)["seed"].get<std::uint64_t>();
        } else {
            ctx.fail("run.seed", "seed required (integer)");
        }
        if (run->contains("horizon"))
            cfg.horizon = as_long((*run)["horizon"], "run.horizon", ctx).value_or(cfg.horizon);
        if (run->contains("paths"))
            cfg.n_paths = as_long((*run)["paths"], "run.paths", ctx).value_or(cfg.n_paths);
        if (run->contains("burn_in"))
            cfg.burn_in = as_long((*run)["burn_in"], "run.burn_in", ctx).value_or(cfg.burn_in);
        if (run->contains("workers"))
            cfg.workers = static_cast<int>(
                as_long((*run)["workers"], "run.workers", ctx).value_or(cfg.workers));
        if (run->contains("observables")) {
            const auto& obs = (*run)["observables"];
            if (obs.is_array() && !obs.empty()) {
                cfg.observables.clear();
                for (const auto& o : obs)
                    if (o.is_string()) cfg.observables.push_back(o.get<std::string>());
                    else ctx.fail("run.observables", "entries must be strings");
            } else {
                ctx.fail("run.observables", "expected a nonempty string array");
            }
        }
        if (run->contains("out_dir") && (*run)["out_dir"].is_string())
            cfg.out_dir = (*run)["out_dir"].get<std::string>();
        if (cfg.horizon < 1) ctx.fail("run.horizon", "must be >= 1");
        if (cfg.n_paths < 1) ctx.fail("run.paths", "must be >= 1");
        if (cfg.burn_in < 0 || cfg.burn_in >= cfg.horizon)
            ctx.fail("run.burn_in", "must lie in [0, horizon)");
        if (cfg.workers < 1) ctx.fail("run.workers", "must be >= 1");
    }

    if (errs.empty()) {
        try {
            cfg.system.validate();
        } catch (const std::exception& e) {
            errs.push_back(std::string("system: ") + e.what());
        }
        for (const auto& name : cfg.observables) {
            try {
                parse_observable(name, cfg.system.agents.size());
            } catch (const std::exception& e) {
                errs.push_back(std::string("run.observables: ") + e.what());
            }
        }
    }
    if (!errs.empty()) throw ConfigError(std::move(errs));

    cfg.digest = config_digest(j);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot open config file: " + path});
    std::ostringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = parse_config_text(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("parse error: ") + e.what()});
    }
    return config_from_json(j);
}

void apply_override(json& j, const std::string& param_path, const std::string& value,
                    bool create) {
    // translate "a.b[2].c" into the pointer "/a/b/2/c"
    std::string ptr;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            ptr += "/" + token;
            token.clear();
        }
    };
    for (char c : param_path) {
        if (c == '.') flush();
        else if (c == '[') flush();
        else if (c == ']') flush();
        else token += c;
    }
    flush();
    if (ptr.empty()) throw std::invalid_argument("empty parameter path");

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value; // plain strings are fine
    }
    if (!parsed.is_primitive())
        throw std::invalid_argument("parameter path must address a scalar field");

    const json::json_pointer jp(ptr);
    if (!j.contains(jp)) {
        const auto parent = jp.parent_pointer();
        if (!create || !j.contains(parent) || !j.at(parent).is_object())
            throw std::invalid_argument("unknown parameter path: " + param_path);
        j[jp] = parsed; // fresh leaf under an existing object
        return;
    }
    if (!j.at(jp).is_primitive())
        throw std::invalid_argument("parameter path must address a scalar field: " + param_path);
    j.at(jp) = parsed;
}

} // namespace ergo
