#pragma once

#include "ergo/loop.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace ergo {

struct ExperimentConfig {
    ClosedLoopSystem system;
    long horizon = 1001;
    long n_paths = 2000;
    std::uint64_t seed = 0;
    std::vector<std::string> observables{"y", "yhat", "e", "pi"};
    long burn_in = 0;
    int workers = 1;
    std::string out_dir = "out";
    std::string digest; // stable content hash of the canonical form
};

// Carries every validation problem found, not just the first.
struct ConfigError : std::runtime_error {
    explicit ConfigError(std::vector<std::string> errs);
    std::vector<std::string> errors;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

std::string config_digest(const nlohmann::json& j);

// Dotted path with optional [i] indexing, e.g. "system.controller.init[0]".
// The value string is parsed as JSON (so numbers and strings both work).
// Unknown paths are rejected unless `create` is set, which permits adding a
// missing leaf under an existing object (for canonical CLI flags).
void apply_override(nlohmann::json& j, const std::string& param_path,
                    const std::string& value, bool create = false);

nlohmann::json parse_config_text(const std::string& text); // comments allowed

} // namespace ergo
