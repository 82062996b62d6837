#include "ocbc/document.hpp"

#include "ocbc/errors.hpp"
#include "text_io.hpp"

namespace ocbc {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw InvalidInput("missing field " + path + key);
    return *it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw InvalidInput(path + " must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw InvalidInput(path + " must be an integer");
    return j.get<int>();
}

std::vector<double> as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) throw InvalidInput(path + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::vector<double>> as_matrix(const json& j, const std::string& path) {
    if (!j.is_array()) throw InvalidInput(path + " must be an array");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_vector(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        bool found = false;
        for (const char* k : known) found = found || key == k;
        if (!found) throw InvalidInput("unknown field " + path + key);
    }
}

}  // namespace

Document parse_document(std::string_view text) {
    const json root = detail::parse_json(text);
    if (!root.is_object()) throw InvalidInput("document must be a JSON object");
    reject_unknown(root, {"num_states", "num_actions", "gamma", "transition", "initial_dist", "tasks"}, "");
    Document doc;
    doc.mdp.num_states = as_int(require(root, "num_states", ""), "num_states");
    doc.mdp.num_actions = as_int(require(root, "num_actions", ""), "num_actions");
    doc.mdp.discount = as_number(require(root, "gamma", ""), "gamma");
    const json& transition = require(root, "transition", "");
    if (!transition.is_array()) throw InvalidInput("transition must be an array");
    for (std::size_t s = 0; s < transition.size(); ++s) {
        doc.mdp.transition.push_back(as_matrix(transition[s], "transition[" + std::to_string(s) + "]"));
    }
    doc.mdp.initial_dist = as_vector(require(root, "initial_dist", ""), "initial_dist");
    if (const auto it = root.find("tasks"); it != root.end()) {
        const json& t = *it;
        if (!t.is_object()) throw InvalidInput("tasks must be an object");
        reject_unknown(t, {"names", "prior", "labeler", "null_outcome"}, "tasks.");
        TaskData data;
        if (const auto names = t.find("names"); names != t.end()) {
            if (!names->is_array()) throw InvalidInput("tasks.names must be an array");
            for (const auto& n : *names) {
                if (!n.is_string()) throw InvalidInput("tasks.names entries must be strings");
                data.names.push_back(n.get<std::string>());
            }
        }
        data.prior = as_vector(require(t, "prior", "tasks."), "tasks.prior");
        data.labeler = as_matrix(require(t, "labeler", "tasks."), "tasks.labeler");
        if (const auto n = t.find("null_outcome"); n != t.end() && !n->is_null()) {
            data.null_outcome = as_int(*n, "tasks.null_outcome");
        }
        doc.tasks = std::move(data);
    }
    return doc;
}

Document read_document(const std::filesystem::path& path) {
    return parse_document(detail::read_text_file(path));
}

std::string emit_document(const Document& doc) {
    json root = json::object();
    root["num_states"] = doc.mdp.num_states;
    root["num_actions"] = doc.mdp.num_actions;
    root["gamma"] = doc.mdp.discount;
    root["transition"] = doc.mdp.transition;
    root["initial_dist"] = doc.mdp.initial_dist;
    if (doc.tasks) {
        json t = json::object();
        t["names"] = doc.tasks->names;
        t["prior"] = doc.tasks->prior;
        t["labeler"] = doc.tasks->labeler;
        t["null_outcome"] = doc.tasks->null_outcome ? json(*doc.tasks->null_outcome) : json(nullptr);
        root["tasks"] = std::move(t);
    }
    return root.dump(2) + "\n";
}

Document make_document(const TabularMDP& mdp, const TaskSpace* tasks) {
    Document doc;
    doc.mdp = mdp.data();
    if (tasks) {
        TaskData t;
        t.names = tasks->names();
        t.prior.assign(tasks->prior().data(), tasks->prior().data() + tasks->prior().size());
        for (int s = 0; s < tasks->num_states(); ++s) {
            const auto row = tasks->label_row(s);
            t.labeler.emplace_back(row.begin(), row.end());
        }
        t.null_outcome = tasks->null_outcome();
        doc.tasks = std::move(t);
    }
    return doc;
}

TaskSpace to_task_space(const TaskData& data) {
    const auto E = static_cast<Eigen::Index>(data.prior.size());
    Eigen::VectorXd prior = Eigen::Map<const Eigen::VectorXd>(data.prior.data(), E);
    RowMatrix labeler(static_cast<Eigen::Index>(data.labeler.size()), E);
    for (std::size_t s = 0; s < data.labeler.size(); ++s) {
        if (static_cast<Eigen::Index>(data.labeler[s].size()) != E) {
            throw InvalidInput("labeler row " + std::to_string(s) + " must have one entry per outcome");
        }
        for (Eigen::Index e = 0; e < E; ++e) labeler(static_cast<Eigen::Index>(s), e) = data.labeler[s][static_cast<std::size_t>(e)];
    }
    return TaskSpace(data.names, std::move(prior), std::move(labeler), data.null_outcome);
}

std::vector<std::string> validate_document(const Document& doc) {
    std::vector<std::string> out;
    for (const auto& v : validate_mdp(doc.mdp)) out.push_back(v.message);
    if (doc.tasks) {
        if (static_cast<int>(doc.tasks->labeler.size()) != doc.mdp.num_states) {
            out.push_back("tasks.labeler must have num_states rows");
        }
        try {
            to_task_space(*doc.tasks);
        } catch (const InvalidInput& err) {
            out.push_back(std::string("tasks: ") + err.what());
        }
    }
    return out;
}

bool operator==(const TaskData& a, const TaskData& b) {
    return a.names == b.names && a.prior == b.prior && a.labeler == b.labeler && a.null_outcome == b.null_outcome;
}

bool operator==(const MdpData& a, const MdpData& b) {
    return a.num_states == b.num_states && a.num_actions == b.num_actions && a.discount == b.discount &&
           a.transition == b.transition && a.initial_dist == b.initial_dist;
}

bool operator==(const Document& a, const Document& b) {
    return a.mdp == b.mdp && a.tasks == b.tasks;
}

}  // namespace ocbc
