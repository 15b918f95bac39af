#include "ergo/presets.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        out.push_back(s.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulation and certification of broadcast-controlled agent ensembles"};
    app.require_subcommand(1);

    std::string sim_config, sim_out = "out";
    long sim_paths = 0, sim_horizon = 0;
    std::int64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo run from a config file");
    sim->add_option("--config", sim_config, "config file")->required();
    sim->add_option("--out", sim_out, "output directory")->required();
    auto* opt_paths = sim->add_option("--paths", sim_paths, "override run.paths");
    auto* opt_horizon = sim->add_option("--horizon", sim_horizon, "override run.horizon");
    auto* opt_seed = sim->add_option("--seed", sim_seed, "override run.seed");

    std::string cert_config;
    auto* cert = app.add_subcommand("certify", "run every ergodicity certificate");
    cert->add_option("--config", cert_config, "config file")->required();

    int figure = 0;
    std::string rep_out;
    bool fast = false;
    auto* rep = app.add_subcommand("reproduce", "benchmark figure presets");
    rep->add_option("--figure", figure, "figure id")->required()->check(CLI::Range(2, 6));
    rep->add_option("--out", rep_out, "output directory")->required();
    rep->add_flag("--fast", fast, "200 paths instead of 2000");

    std::string sw_config, sw_param, sw_values, sw_out;
    auto* sw = app.add_subcommand("sweep", "rerun over values of one scalar config field");
    sw->add_option("--config", sw_config, "base config file")->required();
    sw->add_option("--param", sw_param, "dotted field path, e.g. system.controller.beta")
        ->required();
    sw->add_option("--values", sw_values, "comma-separated value list")->required();
    sw->add_option("--out", sw_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // --help is a success; any usage error is 1
    }

    try {
        if (*sim) {
            nlohmann::json j = ergo::parse_config_text(read_file(sim_config));
            if (*opt_paths) ergo::apply_override(j, "run.paths", std::to_string(sim_paths), true);
            if (*opt_horizon)
                ergo::apply_override(j, "run.horizon", std::to_string(sim_horizon), true);
            if (*opt_seed) ergo::apply_override(j, "run.seed", std::to_string(sim_seed), true);
            const ergo::ExperimentConfig cfg = ergo::config_from_json(j);
            return ergo::run_simulate(cfg, sim_out, std::cout);
        }
        if (*cert) {
            const ergo::ExperimentConfig cfg = ergo::load_config(cert_config);
            return ergo::run_certify(cfg, std::cout);
        }
        if (*rep) return ergo::run_reproduce(figure, rep_out, fast, std::cout);
        if (*sw) {
            const nlohmann::json base = ergo::parse_config_text(read_file(sw_config));
            return ergo::run_sweep(base, sw_param, split_csv_list(sw_values), sw_out,
                                   std::cout);
        }
    } catch (const ergo::ConfigError& e) {
        for (const auto& err : e.errors) std::cerr << "error: " << err << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
