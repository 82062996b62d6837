#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocbc/mdp.hpp"
#include "ocbc/outcomes.hpp"

namespace ocbc {

/// Unchecked task-space fields as they appear in a document.
struct TaskData {
    std::vector<std::string> names;
    std::vector<double> prior;
    /// labeler[s][e]
    std::vector<std::vector<double>> labeler;
    std::optional<int> null_outcome;
};

/// An MDP document: the MDP plus an optional task space.
///
///     {
///       "num_states": 2, "num_actions": 1, "gamma": 0.9,
///       "transition": [[[0, 1]], [[0, 1]]],
///       "initial_dist": [1, 0],
///       "tasks": {
///         "names": ["goal", "none"], "prior": [1, 0],
///         "labeler": [[0, 1], [1, 0]], "null_outcome": 1
///       }
///     }
struct Document {
    MdpData mdp;
    std::optional<TaskData> tasks;
};

/// Throws ParseError for malformed JSON and InvalidInput for missing fields or
/// fields of the wrong type. Probability invariants are not checked here; see
/// validate_document.
Document parse_document(std::string_view text);
Document read_document(const std::filesystem::path& path);

/// Stable, human-readable JSON; parse_document(emit_document(d)) == d.
std::string emit_document(const Document& doc);

Document make_document(const TabularMDP& mdp, const TaskSpace* tasks = nullptr);

/// Human-readable descriptions of every invariant violation; empty when the
/// document describes a valid MDP and task space.
std::vector<std::string> validate_document(const Document& doc);

/// Throws InvalidInput when the task fields are invalid.
TaskSpace to_task_space(const TaskData& data);

bool operator==(const TaskData& a, const TaskData& b);
bool operator==(const MdpData& a, const MdpData& b);
bool operator==(const Document& a, const Document& b);

}  // namespace ocbc
