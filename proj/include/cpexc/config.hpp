#pragma once

// Experiment configuration: flat `key = value` text with dotted keys, `#`
// comments and comma-separated lists. Unknown keys are rejected.
//
//   drift = 3                  # or `recurrent` for b = m1
//   jump.family = pareto_tail  # or bounded_discrete with jump.atoms = 1:0.5, 2:0.25
//   jump.mass = 1
//   jump.xmin = 1
//   jump.gamma = 1.5
//   seed = 1001
//   n_samples = 100000
//   grid.t = 1, 10, 100

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cpexc/limits.hpp"
#include "cpexc/simulate.hpp"

namespace cpexc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  /// Raw entries in key order; the echo written into output metadata.
  std::map<std::string, std::string> entries;

  std::optional<ProcessSpec> spec;
  SimConfig sim;
  bool seed_set = false;
  bool depth_cap_set = false;
  bool dump = true;

  std::vector<double> grid_t{1, 10, 100};
  std::vector<double> grid_h{1, 10, 100};
  std::vector<double> grid_a{0.5, 1, 2};
  std::vector<double> grid_q{0.2, 0.5, 1, 2};
  std::vector<double> cond_t{100};
  std::vector<double> exit_x{0.5, 1, 2, 4};
  std::vector<double> exit_h{4, 8, 16};
  std::uint64_t exit_n = 100000;
  std::vector<double> lemma_h{2, 5};

  double scale_x_max = 0.0;  // 0: derived from the task
  double scale_delta = 0.005;

  std::optional<double> limits_rho;
  std::optional<double> limits_theta;
  std::vector<double> limits_a{0.01, 0.1, 0.5, 1, 2, 10, 100};

  std::string out = "out";

  const ProcessSpec& process() const;
  /// Process parameters usable as limit parameters (rho from the spec when
  /// limits.rho is absent, theta likewise).
  LimitParams limit_params() const;
  /// seed present, n_samples > 0, process present.
  void require_simulation() const;
  /// Simulation config with the transient depth cap defaulted.
  SimConfig sim_config() const;
  void set_seed(std::uint64_t seed);
  /// `key = value` lines, one per entry, in key order.
  std::vector<std::string> echo() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

/// Version string fixed at configure time.
const char* version();

}  // namespace cpexc
