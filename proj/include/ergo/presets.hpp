#pragma once

#include "ergo/config.hpp"
#include "ergo/ergodicity.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ergo {

// The ten-agent binary ensemble benchmark: five agents that activate when
// the signal approaches 5 (initially on), five that deactivate past 1
// (initially off), a two-tap averaging filter, r = 5.
enum class BenchController { pi, lag };

LinearBlock pi_controller(const Rational& kappa, const Rational& alpha);
LinearBlock lag_controller(const Rational& kappa, const Rational& alpha, const Rational& beta);
LinearBlock fir_filter(const std::vector<Rational>& taps);

ClosedLoopSystem bench_system(BenchController controller, double xc0);

// Experiment drivers behind the CLI. All emit into their out directory and
// return a process exit code.
int run_simulate(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int run_certify(const ExperimentConfig& cfg, std::ostream& out);
int run_reproduce(int figure, const std::string& out_dir, bool fast, std::ostream& log,
                  long paths_override = -1);
int run_sweep(const nlohmann::json& base_config, const std::string& param_path,
              const std::vector<std::string>& values, const std::string& out_dir,
              std::ostream& log);

} // namespace ergo
