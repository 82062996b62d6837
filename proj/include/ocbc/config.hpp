#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocbc/normalized.hpp"
#include "ocbc/results.hpp"

namespace ocbc {

enum class Algorithm { Ocbc, NormalizedOcbc, Both };

std::string_view algorithm_name(Algorithm a);
std::string_view mode_name(Mode m);

/// Settings for one experiment run. Unset optionals take the experiment's
/// defaults (see describe_experiment).
struct ExperimentConfig {
    std::string experiment;
    std::optional<Algorithm> algorithm;
    /// Unset means exact, except for experiments that only make sense on
    /// sampled data (failure_relabel_sweep, epsilon_ablation).
    std::optional<Mode> mode;
    std::optional<int> iterations;
    double epsilon = kInfiniteEpsilon;
    std::optional<std::int64_t> sample_budget;
    std::uint64_t seed = 0;
    /// Replicates for multi-seed experiments.
    std::optional<int> seeds;
    /// Worker threads for multi-seed experiments; 0 picks the hardware count.
    /// Output does not depend on this.
    int threads = 0;
    /// Empty: the caller decides.
    std::string output_dir;
    std::vector<Format> formats{Format::Csv};
    /// Environment parameters; scalars are stored as one-element lists.
    std::map<std::string, std::vector<double>> env;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// JSON object with keys experiment (required), algorithm, mode, iterations,
/// epsilon (number or "inf"), sample_budget, seed, seeds, threads,
/// output_dir, formats and env. Throws ParseError for malformed text and
/// InvalidInput naming the field path for invalid or unknown fields.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig read_config(const std::filesystem::path& path);

/// Field-level checks shared by parse_config and run_experiment.
void validate_config(const ExperimentConfig& config);

}  // namespace ocbc
