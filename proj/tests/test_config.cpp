#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "ocbc/config.hpp"
#include "ocbc/errors.hpp"
#include "ocbc/experiments.hpp"

using namespace ocbc;

namespace {

/// Message of the InvalidInput thrown by parse_config, or "" if none.
std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const InvalidInput& err) {
        return err.what();
    }
    return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST(Config, MinimalTakesDefaults) {
    const ExperimentConfig c = parse_config(R"({"experiment": "bandit_simplex"})");
    EXPECT_EQ(c.experiment, "bandit_simplex");
    EXPECT_FALSE(c.algorithm.has_value());
    EXPECT_FALSE(c.mode.has_value());
    EXPECT_FALSE(c.iterations.has_value());
    EXPECT_TRUE(std::isinf(c.epsilon));
    EXPECT_EQ(c.seed, 0u);
    EXPECT_EQ(c.threads, 0);
    EXPECT_EQ(c.formats, std::vector<Format>{Format::Csv});
    EXPECT_TRUE(c.env.empty());
    ExperimentConfig expected;
    expected.experiment = "bandit_simplex";
    EXPECT_EQ(c, expected);
}

TEST(Config, AllFields) {
    const ExperimentConfig c = parse_config(R"({
        "experiment": "epsilon_ablation",
        "algorithm": "normalized-ocbc",
        "mode": "exact",
        "iterations": 12,
        "epsilon": 0.25,
        "sample_budget": 5000,
        "seed": 18446744073709551615,
        "seeds": 3,
        "threads": 2,
        "output_dir": "out/here",
        "formats": ["csv", "svg", "csv"],
        "env": {"width": 7, "epsilons": [0.1, 2]}
    })");
    EXPECT_EQ(c.algorithm, Algorithm::NormalizedOcbc);
    EXPECT_EQ(c.mode, Mode::Exact);
    EXPECT_EQ(c.iterations, 12);
    EXPECT_EQ(c.epsilon, 0.25);
    EXPECT_EQ(c.sample_budget, 5000);
    EXPECT_EQ(c.seed, 18446744073709551615ull);
    EXPECT_EQ(c.seeds, 3);
    EXPECT_EQ(c.threads, 2);
    EXPECT_EQ(c.output_dir, "out/here");
    EXPECT_EQ(c.formats, (std::vector<Format>{Format::Csv, Format::Svg}));
    EXPECT_EQ(c.env.at("width"), std::vector<double>{7});
    EXPECT_EQ(c.env.at("epsilons"), (std::vector<double>{0.1, 2}));
    EXPECT_EQ(parse_config(R"({"experiment": "bandit_simplex", "formats": "json"})").formats,
              std::vector<Format>{Format::Json});
}

TEST(Config, InfinitySentinel) {
    EXPECT_TRUE(std::isinf(parse_config(R"({"experiment": "bandit_simplex", "epsilon": "inf"})").epsilon));
    EXPECT_EQ(parse_config(R"({"experiment": "bandit_simplex", "epsilon": 0})").epsilon, 0.0);
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "epsilon": "infinity"})"), "epsilon:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "epsilon": -0.5})"), "epsilon:"));
}

TEST(Config, UnknownExperimentListsRegistered) {
    const std::string msg = error_of(R"({"experiment": "bandit"})");
    EXPECT_TRUE(starts_with(msg, "experiment:"));
    for (const auto& info : registered_experiments()) EXPECT_NE(msg.find(info.name), std::string::npos) << info.name;
    EXPECT_TRUE(starts_with(error_of(R"({"seed": 1})"), "experiment:"));
}

TEST(Config, FieldPathsInErrors) {
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "iterations": -1})"), "iterations:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "iterations": 1.5})"), "iterations:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "seed": -1})"), "seed:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "sample_budget": 0})"), "sample_budget:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "algorithm": "ppo"})"), "algorithm:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "mode": "approx"})"), "mode:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "formats": ["csv", "png"]})"),
                            "formats[1]:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "colour": "red"})"), "colour: unknown field"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "bandit_simplex", "env": {"horizon": "long"}})"),
                            "env.horizon:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "epsilon_ablation", "env": {"epsilons": [0.1, "x"]}})"),
                            "env.epsilons[1]:"));
    const std::string unknown = error_of(R"({"experiment": "two_goal_gridworld", "env": {"depth": 3}})");
    EXPECT_TRUE(starts_with(unknown, "env.depth:"));
    EXPECT_NE(unknown.find("width"), std::string::npos);
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "two_goal_gridworld", "env": {"width": 2.5}})"), "env.width:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "two_goal_gridworld", "env": {"slip": 2}})"), "env.slip:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "two_goal_gridworld", "env": {"width": [5, 6]}})"),
                            "env.width:"));
}

TEST(Config, UnsupportedModeIsRejected) {
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "invariant_suite", "mode": "sampled"})"), "mode:"));
    EXPECT_TRUE(starts_with(error_of(R"({"experiment": "failure_relabel_sweep", "mode": "exact"})"), "mode:"));
}

TEST(Config, MalformedJsonHasPosition) {
    try {
        parse_config("{\n  \"experiment\": \"bandit_simplex\",\n  \"seed\": 1,,\n}");
        FAIL() << "expected ParseError";
    } catch (const ParseError& err) {
        EXPECT_EQ(err.line(), 3);
        EXPECT_GT(err.column(), 0);
    }
    EXPECT_TRUE(starts_with(error_of("[1, 2]"), "config:"));
}

TEST(Config, ReadFromFile) {
    EXPECT_THROW(read_config("/nonexistent/ocbc/config.json"), IoError);
    const auto path = std::filesystem::temp_directory_path() / "ocbc_config_test.json";
    {
        std::ofstream out(path);
        out << R"({"experiment": "bandit_simplex", "iterations": 4})";
    }
    EXPECT_EQ(read_config(path).iterations, 4);
    std::filesystem::remove(path);
}

TEST(Config, NamesOfEnums) {
    EXPECT_EQ(algorithm_name(Algorithm::NormalizedOcbc), "normalized-ocbc");
    EXPECT_EQ(algorithm_name(Algorithm::Both), "both");
    EXPECT_EQ(mode_name(Mode::Sampled), "sampled");
}
