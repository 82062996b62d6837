#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ocbc {

/// Metric names that may appear in a result table.
enum class Metric {
    Return,
    OptimalReturn,
    StepsToGoal,
    ActionProbA1,
    ActionProbA2,
    ActionProbA3,
    Objective,
    AcceptanceFraction,
    EvaluationReward,
    EvaluationRewardMean,
    EvaluationRewardSe,
    DifferenceMean,
    DifferenceSe,
    ChecksPassed,
    ChecksFailed,
    WorstValue,
};

std::string_view metric_name(Metric m);
/// Throws InvalidInput for names outside the Metric set.
Metric parse_metric(std::string_view name);

/// One long-format row. `iteration` is the iteration index, or the sweep
/// variable for sweep experiments. `task` names the series (task, variant or
/// algorithm/task pair).
struct ResultRow {
    std::string experiment;
    std::uint64_t seed = 0;
    std::int64_t iteration = 0;
    std::string task;
    Metric metric = Metric::Return;
    double value = 0.0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

class ResultTable {
public:
    /// Throws InvalidInput for non-finite values.
    void add(ResultRow row);
    void add(std::string experiment, std::uint64_t seed, std::int64_t iteration, std::string task, Metric metric,
             double value);
    void append(const ResultTable& other);

    const std::vector<ResultRow>& rows() const { return rows_; }
    bool empty() const { return rows_.empty(); }
    std::size_t size() const { return rows_.size(); }

    /// Rows matching the given task and metric, in insertion order.
    std::vector<ResultRow> select(std::string_view task, Metric metric) const;

    friend bool operator==(const ResultTable&, const ResultTable&) = default;

private:
    std::vector<ResultRow> rows_;
};

/// Header experiment,seed,iteration,task,metric,value; fields containing a
/// comma, quote or newline are quoted with doubled quotes. Values use the
/// shortest text that reads back to the same double.
std::string to_csv(const ResultTable& table);
/// Throws ParseError on malformed input.
ResultTable parse_csv(std::string_view text);

/// Array of row objects.
std::string to_json(const ResultTable& table);

/// One line chart per metric (value against iteration), one series per task.
std::string to_svg(const ResultTable& table);

enum class Format { Csv, Json, Svg };

Format parse_format(std::string_view name);
std::string_view format_extension(Format f);

/// Writes `<dir>/<stem>.<ext>`, creating `dir` if needed. Throws IoError with
/// the path on failure. Returns the written path.
std::filesystem::path emit(const ResultTable& table, Format format, const std::filesystem::path& dir,
                           std::string_view stem);

}  // namespace ocbc
