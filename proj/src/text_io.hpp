#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ocbc::detail {

/// Parses JSON, converting parser failures into ParseError with line/column.
nlohmann::json parse_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// Throws IoError naming the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace ocbc::detail
