#include "ocbc/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ocbc/errors.hpp"
#include "ocbc/experiments.hpp"
#include "text_io.hpp"

namespace ocbc {

namespace {

using nlohmann::json;

[[noreturn]] void field_error(std::string_view path, std::string_view message) {
    throw InvalidInput(std::string(path) + ": " + std::string(message));
}

std::string string_field(const json& v, std::string_view path) {
    if (!v.is_string()) field_error(path, "expected a string");
    return v.get<std::string>();
}

std::int64_t integer_field(const json& v, std::string_view path, std::int64_t lo, std::int64_t hi) {
    if (!v.is_number_integer()) field_error(path, "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
        field_error(path, "value out of range");
    }
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi) {
        std::ostringstream msg;
        msg << "value " << x << " outside [" << lo << ", " << hi << "]";
        field_error(path, msg.str());
    }
    return x;
}

double number_field(const json& v, std::string_view path) {
    if (!v.is_number()) field_error(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) field_error(path, "expected a finite number");
    return x;
}

Algorithm parse_algorithm(const json& v) {
    const std::string s = string_field(v, "algorithm");
    if (s == "ocbc") return Algorithm::Ocbc;
    if (s == "normalized-ocbc") return Algorithm::NormalizedOcbc;
    if (s == "both") return Algorithm::Both;
    field_error("algorithm", "expected one of ocbc, normalized-ocbc, both; got \"" + s + "\"");
}

Mode parse_mode(const json& v) {
    const std::string s = string_field(v, "mode");
    if (s == "exact") return Mode::Exact;
    if (s == "sampled") return Mode::Sampled;
    field_error("mode", "expected exact or sampled; got \"" + s + "\"");
}

double parse_epsilon(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return kInfiniteEpsilon;
        field_error("epsilon", "expected a number or \"inf\"");
    }
    const double x = number_field(v, "epsilon");
    if (x < 0.0) field_error("epsilon", "must be non-negative");
    return x;
}

std::vector<Format> parse_formats(const json& v) {
    std::vector<Format> out;
    auto one = [&](const json& item, const std::string& path) {
        try {
            const Format f = parse_format(string_field(item, path));
            if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
        } catch (const InvalidInput& err) {
            if (std::string_view(err.what()).starts_with(path)) throw;
            field_error(path, err.what());
        }
    };
    if (v.is_string()) {
        one(v, "formats");
    } else if (v.is_array()) {
        if (v.empty()) field_error("formats", "must name at least one format");
        for (std::size_t i = 0; i < v.size(); ++i) one(v[i], "formats[" + std::to_string(i) + "]");
    } else {
        field_error("formats", "expected a string or a list of strings");
    }
    return out;
}

std::map<std::string, std::vector<double>> parse_env(const json& v) {
    if (!v.is_object()) field_error("env", "expected an object");
    std::map<std::string, std::vector<double>> out;
    for (const auto& [key, value] : v.items()) {
        const std::string path = "env." + key;
        std::vector<double> values;
        if (value.is_array()) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                values.push_back(number_field(value[i], path + "[" + std::to_string(i) + "]"));
            }
        } else {
            values.push_back(number_field(value, path));
        }
        out.emplace(key, std::move(values));
    }
    return out;
}

}  // namespace

std::string_view algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Ocbc: return "ocbc";
        case Algorithm::NormalizedOcbc: return "normalized-ocbc";
        case Algorithm::Both: return "both";
    }
    return "";
}

std::string_view mode_name(Mode m) { return m == Mode::Exact ? "exact" : "sampled"; }

ExperimentConfig parse_config(std::string_view text) {
    const json doc = detail::parse_json(text);
    if (!doc.is_object()) throw InvalidInput("config: expected a JSON object");
    if (!doc.contains("experiment")) throw InvalidInput("experiment: required field is missing");

    ExperimentConfig config;
    for (const auto& [key, value] : doc.items()) {
        if (key == "experiment") {
            config.experiment = string_field(value, "experiment");
        } else if (key == "algorithm") {
            config.algorithm = parse_algorithm(value);
        } else if (key == "mode") {
            config.mode = parse_mode(value);
        } else if (key == "iterations") {
            config.iterations = static_cast<int>(integer_field(value, "iterations", 0, 1000000));
        } else if (key == "epsilon") {
            config.epsilon = parse_epsilon(value);
        } else if (key == "sample_budget") {
            config.sample_budget = integer_field(value, "sample_budget", 1, std::int64_t{1} << 40);
        } else if (key == "seed") {
            if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
                field_error("seed", "expected a non-negative integer");
            }
            config.seed = value.get<std::uint64_t>();
        } else if (key == "seeds") {
            config.seeds = static_cast<int>(integer_field(value, "seeds", 1, 100000));
        } else if (key == "threads") {
            config.threads = static_cast<int>(integer_field(value, "threads", 0, 1024));
        } else if (key == "output_dir") {
            config.output_dir = string_field(value, "output_dir");
        } else if (key == "formats") {
            config.formats = parse_formats(value);
        } else if (key == "env") {
            config.env = parse_env(value);
        } else {
            field_error(key, "unknown field");
        }
    }
    validate_config(config);
    return config;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
    return parse_config(detail::read_text_file(path));
}

void validate_config(const ExperimentConfig& config) {
    const ExperimentInfo& info = describe_experiment(config.experiment);
    if (config.mode &&
        std::find(info.modes.begin(), info.modes.end(), *config.mode) == info.modes.end()) {
        field_error("mode", std::string(mode_name(*config.mode)) + " is not supported by " + info.name);
    }
    if (config.iterations && *config.iterations < 0) field_error("iterations", "must be non-negative");
    if (config.sample_budget && *config.sample_budget < 1) field_error("sample_budget", "must be positive");
    if (config.seeds && *config.seeds < 1) field_error("seeds", "must be positive");
    if (config.threads < 0) field_error("threads", "must be non-negative");
    if (!(config.epsilon >= 0.0)) field_error("epsilon", "must be non-negative");
    if (config.formats.empty()) field_error("formats", "must name at least one format");
    for (const auto& [key, values] : config.env) {
        const std::string path = "env." + key;
        const auto it = std::find_if(info.parameters.begin(), info.parameters.end(),
                                     [&](const EnvParameter& p) { return p.name == key; });
        if (it == info.parameters.end()) {
            std::string known;
            for (const auto& p : info.parameters) known += (known.empty() ? "" : ", ") + p.name;
            field_error(path, "unknown parameter for " + info.name +
                                  (known.empty() ? std::string(" (it takes none)") : " (known: " + known + ")"));
        }
        if (values.empty()) field_error(path, "must not be empty");
        if (!it->list && values.size() != 1) field_error(path, "expected a single number");
        for (double x : values) {
            if (!std::isfinite(x) || x < it->min || x > it->max) {
                std::ostringstream msg;
                msg << "value " << x << " outside [" << it->min << ", " << it->max << "]";
                field_error(path, msg.str());
            }
            if (it->integer && x != std::floor(x)) field_error(path, "expected an integer");
        }
    }
}

}  // namespace ocbc
