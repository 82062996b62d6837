// ocbc-lab: run registered experiments, validate MDP documents.
//
// Exit codes: 0 success, 1 invalid input (bad config, bad document, unknown
// experiment, usage error), 2 I/O failure.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocbc/config.hpp"
#include "ocbc/document.hpp"
#include "ocbc/errors.hpp"
#include "ocbc/experiments.hpp"
#include "ocbc/results.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kIo = 2;
constexpr const char* kOutDirVariable = "OCBC_LAB_OUT_DIR";

std::string join(const std::vector<double>& values) {
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
    return out.str();
}

void print_list() {
    for (const auto& info : ocbc::registered_experiments()) {
        std::cout << info.name << "\n  " << info.description << "\n  defaults: algorithm "
                  << ocbc::algorithm_name(info.default_algorithm) << ", mode " << ocbc::mode_name(info.default_mode);
        if (info.default_iterations > 0) std::cout << ", " << info.default_iterations << " iterations";
        if (info.default_seeds > 1) std::cout << ", " << info.default_seeds << " seeds";
        std::cout << "\n";
        for (const auto& p : info.parameters) {
            std::cout << "  env." << p.name << " = " << join(p.default_value) << "  (" << p.help << ")\n";
        }
    }
}

int run(const std::string& experiment, const std::string& config_path, std::optional<std::uint64_t> seed,
        const std::string& out_dir, const std::string& formats, std::optional<int> threads) {
    ocbc::ExperimentConfig config;
    if (!config_path.empty()) {
        config = ocbc::read_config(config_path);
        if (config.experiment != experiment) {
            throw ocbc::InvalidInput("experiment: config names \"" + config.experiment + "\" but \"" + experiment +
                                     "\" was requested");
        }
    } else {
        config.experiment = experiment;
    }
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (!formats.empty()) {
        config.formats.clear();
        std::stringstream in(formats);
        for (std::string item; std::getline(in, item, ',');) {
            if (item.empty()) continue;
            const auto f = ocbc::parse_format(item);
            if (std::find(config.formats.begin(), config.formats.end(), f) == config.formats.end()) {
                config.formats.push_back(f);
            }
        }
    }
    ocbc::validate_config(config);

    std::string dir = out_dir;
    if (dir.empty()) dir = config.output_dir;
    if (dir.empty()) {
        const char* env = std::getenv(kOutDirVariable);
        dir = env && *env ? env : "results";
    }

    const ocbc::ResultTable table = ocbc::run_experiment(config);
    for (auto f : config.formats) {
        std::cout << ocbc::emit(table, f, dir, config.experiment).string() << "\n";
    }
    return kOk;
}

int validate(const std::string& path) {
    const ocbc::Document doc = ocbc::read_document(path);
    const auto problems = ocbc::validate_document(doc);
    if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << path << ": " << p << "\n";
        return kInvalid;
    }
    std::cout << path << ": ok (" << doc.mdp.num_states << " states, " << doc.mdp.num_actions << " actions";
    if (doc.tasks) std::cout << ", " << doc.tasks->prior.size() << " outcomes";
    std::cout << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outcome-conditioned behavioral cloning experiments on tabular MDPs"};
    app.require_subcommand(1);

    auto* list_cmd = app.add_subcommand("list", "List registered experiments and their parameters");

    auto* run_cmd = app.add_subcommand("run", "Run an experiment and write its result table");
    std::string experiment;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string formats;
    std::optional<int> threads;
    run_cmd->add_option("experiment", experiment, "Registered experiment name")->required();
    run_cmd->add_option("--config", config_path, "JSON config file");
    run_cmd->add_option("--seed", seed, "Base seed (overrides the config)");
    run_cmd->add_option("--out", out_dir,
                        std::string("Output directory (default: config output_dir, then $") + kOutDirVariable +
                            ", then ./results)");
    run_cmd->add_option("--format", formats, "Comma-separated formats: csv, json, svg (default csv)");
    run_cmd->add_option("--threads", threads, "Worker threads for multi-seed experiments (0 = all cores)");

    auto* validate_cmd = app.add_subcommand("validate", "Check an MDP document");
    std::string mdp_path;
    validate_cmd->add_option("mdp-file", mdp_path, "MDP document (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (list_cmd->parsed()) {
            print_list();
            return kOk;
        }
        if (run_cmd->parsed()) return run(experiment, config_path, seed, out_dir, formats, threads);
        if (validate_cmd->parsed()) return validate(mdp_path);
    } catch (const ocbc::IoError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kIo;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kInvalid;
    }
    return kInvalid;
}
