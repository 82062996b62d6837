#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ocbc/config.hpp"
#include "ocbc/results.hpp"

namespace ocbc {

/// An accepted `env` entry with its default and range.
struct EnvParameter {
    std::string name;
    std::vector<double> default_value;
    double min = 0.0;
    double max = 0.0;
    bool integer = false;
    /// Accepts a list of values rather than a single number.
    bool list = false;
    std::string help;
};

struct ExperimentInfo {
    std::string name;
    std::string description;
    Algorithm default_algorithm = Algorithm::Both;
    Mode default_mode = Mode::Exact;
    /// Modes the experiment accepts.
    std::vector<Mode> modes;
    int default_iterations = 0;
    std::int64_t default_sample_budget = 0;
    int default_seeds = 1;
    std::vector<EnvParameter> parameters;
};

const std::vector<ExperimentInfo>& registered_experiments();

/// Throws InvalidInput listing the registered names when `name` is unknown.
const ExperimentInfo& describe_experiment(std::string_view name);

/// Runs a registered experiment. Output depends only on the config (not on
/// config.threads). Throws InvalidInput for invalid configs.
///
/// Rows by experiment:
///  - bandit_simplex: task "<algorithm>:<task>", metrics action_prob_a1..a3 at
///    the start state and return, per iteration.
///  - two_goal_gridworld: task "<algorithm>:<goal>", metrics return and
///    steps_to_goal per iteration; task "optimal:<goal>" holds optimal_return.
///  - failure_relabel_sweep: iteration is the dataset size. Per replicate
///    (seed column = derive_seed(seed, replicate)) evaluation_reward for all_success and
///    with_failure; aggregates evaluation_reward_mean/_se per variant and the
///    paired with_failure-all_success difference_mean/_se.
///  - epsilon_ablation: task "<goal>/eps=<epsilon>", return and
///    acceptance_fraction per iteration of normalized OCBC.
///  - invariant_suite: task per check, checks_passed, checks_failed and
///    worst_value.
ResultTable run_experiment(const ExperimentConfig& config);

/// The value of env parameter `name` in `config`, or its default.
std::vector<double> env_value(const ExperimentConfig& config, std::string_view name);

}  // namespace ocbc
