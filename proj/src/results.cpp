#include "ocbc/results.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ocbc/errors.hpp"
#include "text_io.hpp"

namespace ocbc {

namespace {

constexpr std::array<std::pair<Metric, std::string_view>, 16> kMetricNames{{
    {Metric::Return, "return"},
    {Metric::OptimalReturn, "optimal_return"},
    {Metric::StepsToGoal, "steps_to_goal"},
    {Metric::ActionProbA1, "action_prob_a1"},
    {Metric::ActionProbA2, "action_prob_a2"},
    {Metric::ActionProbA3, "action_prob_a3"},
    {Metric::Objective, "objective"},
    {Metric::AcceptanceFraction, "acceptance_fraction"},
    {Metric::EvaluationReward, "evaluation_reward"},
    {Metric::EvaluationRewardMean, "evaluation_reward_mean"},
    {Metric::EvaluationRewardSe, "evaluation_reward_se"},
    {Metric::DifferenceMean, "difference_mean"},
    {Metric::DifferenceSe, "difference_se"},
    {Metric::ChecksPassed, "checks_passed"},
    {Metric::ChecksFailed, "checks_failed"},
    {Metric::WorstValue, "worst_value"},
}};

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Splits CSV text into records of fields; tracks line numbers for errors.
std::vector<std::pair<int, std::vector<std::string>>> split_csv(std::string_view text) {
    std::vector<std::pair<int, std::vector<std::string>>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    int line = 1;
    int record_line = 1;
    int column = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        ++column;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                    column = 0;
                }
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (field_started) throw ParseError("unexpected quote inside an unquoted field", line, column);
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            field.clear();
            field_started = false;
            records.emplace_back(record_line, std::move(fields));
            fields.clear();
            ++line;
            record_line = line;
            column = 0;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line, column);
    if (field_started || !fields.empty()) {
        fields.push_back(std::move(field));
        records.emplace_back(record_line, std::move(fields));
    }
    return records;
}

template <typename T>
T parse_integer(const std::string& s, int line, int column) {
    T value{};
    const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
    if (result.ec != std::errc() || result.ptr != s.data() + s.size()) {
        throw ParseError("expected an integer, found '" + s + "'", line, column);
    }
    return value;
}

double parse_number(const std::string& s, int line, int column) {
    double value = 0.0;
    const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
    if (result.ec != std::errc() || result.ptr != s.data() + s.size()) {
        throw ParseError("expected a number, found '" + s + "'", line, column);
    }
    return value;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << v;
    return out.str();
}

std::string tick_label(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

}  // namespace

std::string_view metric_name(Metric m) {
    for (const auto& [metric, name] : kMetricNames) {
        if (metric == m) return name;
    }
    return "unknown";
}

Metric parse_metric(std::string_view name) {
    for (const auto& [metric, n] : kMetricNames) {
        if (n == name) return metric;
    }
    throw InvalidInput("unknown metric '" + std::string(name) + "'");
}

void ResultTable::add(ResultRow row) {
    if (!std::isfinite(row.value)) {
        throw InvalidInput("non-finite value for metric " + std::string(metric_name(row.metric)));
    }
    rows_.push_back(std::move(row));
}

void ResultTable::add(std::string experiment, std::uint64_t seed, std::int64_t iteration, std::string task,
                      Metric metric, double value) {
    add(ResultRow{std::move(experiment), seed, iteration, std::move(task), metric, value});
}

void ResultTable::append(const ResultTable& other) {
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

std::vector<ResultRow> ResultTable::select(std::string_view task, Metric metric) const {
    std::vector<ResultRow> out;
    for (const auto& r : rows_) {
        if (r.task == task && r.metric == metric) out.push_back(r);
    }
    return out;
}

std::string to_csv(const ResultTable& table) {
    std::string out = "experiment,seed,iteration,task,metric,value\n";
    for (const auto& r : table.rows()) {
        out += csv_field(r.experiment);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += std::to_string(r.iteration);
        out += ',';
        out += csv_field(r.task);
        out += ',';
        out += metric_name(r.metric);
        out += ',';
        out += detail::format_double(r.value);
        out += '\n';
    }
    return out;
}

ResultTable parse_csv(std::string_view text) {
    const auto records = split_csv(text);
    if (records.empty()) throw ParseError("missing header row", 1, 1);
    const std::vector<std::string> header{"experiment", "seed", "iteration", "task", "metric", "value"};
    if (records.front().second != header) throw ParseError("unexpected header row", 1, 1);
    ResultTable table;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& [line, f] = records[i];
        if (f.size() != header.size()) {
            throw ParseError("expected 6 fields, found " + std::to_string(f.size()), line, 1);
        }
        ResultRow row;
        row.experiment = f[0];
        row.seed = parse_integer<std::uint64_t>(f[1], line, 2);
        row.iteration = parse_integer<std::int64_t>(f[2], line, 3);
        row.task = f[3];
        try {
            row.metric = parse_metric(f[4]);
        } catch (const InvalidInput& err) {
            throw ParseError(err.what(), line, 5);
        }
        row.value = parse_number(f[5], line, 6);
        if (!std::isfinite(row.value)) throw ParseError("non-finite value", line, 6);
        table.add(std::move(row));
    }
    return table;
}

std::string to_json(const ResultTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows()) {
        rows.push_back({{"experiment", r.experiment},
                        {"seed", r.seed},
                        {"iteration", r.iteration},
                        {"task", r.task},
                        {"metric", metric_name(r.metric)},
                        {"value", r.value}});
    }
    return rows.dump(2) + "\n";
}

std::string to_svg(const ResultTable& table) {
    // Charts in order of first appearance of each metric; series likewise.
    std::vector<Metric> metrics;
    std::map<Metric, std::vector<std::string>> series_order;
    std::map<std::pair<Metric, std::string>, std::vector<std::pair<double, double>>> points;
    for (const auto& r : table.rows()) {
        if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
        auto& order = series_order[r.metric];
        if (std::find(order.begin(), order.end(), r.task) == order.end()) order.push_back(r.task);
        points[{r.metric, r.task}].emplace_back(static_cast<double>(r.iteration), r.value);
    }

    constexpr double kWidth = 720;
    constexpr double kChartHeight = 300;
    constexpr double kLeft = 70;
    constexpr double kRight = 190;
    constexpr double kTop = 40;
    constexpr double kBottom = 50;
    const double total_height = std::max<double>(1.0, static_cast<double>(metrics.size())) * kChartHeight;
    const std::string title = table.empty() ? std::string("results") : table.rows().front().experiment;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << total_height
        << "\" viewBox=\"0 0 " << kWidth << ' ' << total_height << "\">\n";
    svg << "<style>text{font-family:sans-serif;font-size:12px}.title{font-size:14px;font-weight:bold}</style>\n";
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        const Metric metric = metrics[m];
        const auto& order = series_order[metric];
        double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
        for (const auto& name : order) {
            for (const auto& [x, y] : points[{metric, name}]) {
                x_lo = std::min(x_lo, x);
                x_hi = std::max(x_hi, x);
                y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y);
            }
        }
        const bool log_x = x_lo > 0 && x_hi / x_lo >= 100;
        auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
        double a = tx(x_lo), b = tx(x_hi);
        if (a == b) {
            a -= 1;
            b += 1;
        }
        if (y_lo == y_hi) {
            y_lo -= 0.5;
            y_hi += 0.5;
        }
        const double pad = 0.05 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;
        const double top = static_cast<double>(m) * kChartHeight;
        const double plot_w = kWidth - kLeft - kRight;
        const double plot_h = kChartHeight - kTop - kBottom;
        auto px = [&](double x) { return kLeft + (tx(x) - a) / (b - a) * plot_w; };
        auto py = [&](double y) { return top + kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

        const std::string name(metric_name(metric));
        svg << "<g class=\"chart\" data-metric=\"" << name << "\">\n";
        svg << "<text class=\"title\" x=\"" << kLeft << "\" y=\"" << fmt(top + 22) << "\">" << xml_escape(title)
            << ": " << name << "</text>\n";
        svg << "<rect x=\"" << kLeft << "\" y=\"" << fmt(top + kTop) << "\" width=\"" << plot_w << "\" height=\""
            << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
            svg << "<text class=\"tick\" x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(yv) + 4)
                << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
            const double xv = log_x ? std::pow(10.0, a + (b - a) * i / 4.0) : a + (b - a) * i / 4.0;
            svg << "<text class=\"tick\" x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(top + kTop + plot_h + 16)
                << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
        }
        svg << "<text class=\"axis-label\" x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\""
            << fmt(top + kChartHeight - 12) << "\" text-anchor=\"middle\">"
            << (log_x ? "iteration (log scale)" : "iteration") << "</text>\n";
        svg << "<text class=\"axis-label\" transform=\"translate(16," << fmt(top + kTop + plot_h / 2)
            << ") rotate(-90)\" text-anchor=\"middle\">" << name << "</text>\n";
        for (std::size_t s = 0; s < order.size(); ++s) {
            auto pts = points[{metric, order[s]}];
            std::stable_sort(pts.begin(), pts.end(),
                             [](const auto& l, const auto& r) { return l.first < r.first; });
            const char* color = kPalette[s % std::size(kPalette)];
            svg << "<polyline class=\"series\" data-series=\"" << xml_escape(order[s]) << "\" fill=\"none\" stroke=\""
                << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (i) svg << ' ';
                svg << fmt(px(pts[i].first)) << ',' << fmt(py(pts[i].second));
            }
            svg << "\"/>\n";
            const double ly = top + kTop + 14 + 16.0 * static_cast<double>(s);
            svg << "<line x1=\"" << fmt(kWidth - kRight + 12) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
                << fmt(kWidth - kRight + 32) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
                << "\" stroke-width=\"2\"/>\n";
            svg << "<text class=\"legend\" x=\"" << fmt(kWidth - kRight + 38) << "\" y=\"" << fmt(ly) << "\">"
                << xml_escape(order[s]) << "</text>\n";
        }
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

Format parse_format(std::string_view name) {
    if (name == "csv") return Format::Csv;
    if (name == "json") return Format::Json;
    if (name == "svg") return Format::Svg;
    throw InvalidInput("unknown format '" + std::string(name) + "' (expected csv, json or svg)");
}

std::string_view format_extension(Format f) {
    switch (f) {
        case Format::Csv: return "csv";
        case Format::Json: return "json";
        case Format::Svg: return "svg";
    }
    return "txt";
}

std::filesystem::path emit(const ResultTable& table, Format format, const std::filesystem::path& dir,
                           std::string_view stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    const auto path = dir / (std::string(stem) + "." + std::string(format_extension(format)));
    std::string text;
    switch (format) {
        case Format::Csv: text = to_csv(table); break;
        case Format::Json: text = to_json(table); break;
        case Format::Svg: text = to_svg(table); break;
    }
    detail::write_text_file(path, text);
    return path;
}

}  // namespace ocbc
