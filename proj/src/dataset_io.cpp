#include "opecalib/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "opecalib/error.hpp"

namespace opecalib {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
    throw ValidationError("line " + std::to_string(line) + ": " + what);
}

std::vector<double> read_vector(const json& j, std::size_t line, const char* field) {
    if (!j.is_array()) fail_at(line, std::string("'") + field + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) fail_at(line, std::string("'") + field + "' must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Trajectory read_trajectory(const json& j, std::size_t line, std::size_t state_dim, std::size_t action_count) {
    if (!j.is_object()) fail_at(line, "trajectory must be a JSON object");
    Trajectory traj;
    if (!j.contains("id") || !j["id"].is_string()) fail_at(line, "missing string 'id'");
    traj.id = j["id"].get<std::string>();
    if (!j.contains("steps") || !j["steps"].is_array() || j["steps"].empty())
        fail_at(line, "'steps' must be a nonempty array");
    for (const auto& s : j["steps"]) {
        if (!s.is_object() || !s.contains("s") || !s.contains("a") || !s.contains("r"))
            fail_at(line, "each step needs 's', 'a' and 'r'");
        Step step;
        step.state = read_vector(s["s"], line, "s");
        if (step.state.size() != state_dim)
            fail_at(line, "state has dimension " + std::to_string(step.state.size()) + ", header says " +
                              std::to_string(state_dim));
        if (!s["a"].is_number_integer()) fail_at(line, "'a' must be an integer");
        const auto a = s["a"].get<long long>();
        if (a < 0 || std::size_t(a) >= action_count)
            fail_at(line, "action " + std::to_string(a) + " outside [0, " + std::to_string(action_count) + ")");
        step.action = ActionId(a);
        if (!s["r"].is_number()) fail_at(line, "'r' must be a number");
        step.reward = s["r"].get<double>();
        traj.steps.push_back(std::move(step));
    }
    if (j.contains("terminal") && !j["terminal"].is_null()) {
        traj.terminal = read_vector(j["terminal"], line, "terminal");
        if (traj.terminal->size() != state_dim) fail_at(line, "terminal state has the wrong dimension");
    }
    if (j.contains("severity") && !j["severity"].is_null()) {
        traj.severity = read_vector(j["severity"], line, "severity");
        if (traj.severity->size() != traj.steps.size()) fail_at(line, "severity needs one value per step");
    }
    return traj;
}

}  // namespace

TrajectoryDataset read_dataset(std::istream& in) {
    std::string text;
    std::size_t line_no = 0;
    std::size_t state_dim = 0;
    std::size_t action_count = 0;
    bool have_header = false;
    std::vector<Trajectory> trajectories;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            fail_at(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!have_header) {
            if (!j.is_object() || !j.contains("meta")) fail_at(line_no, "first line must be the {\"meta\": ...} header");
            const auto& meta = j["meta"];
            if (!meta.contains("state_dim") || !meta["state_dim"].is_number_unsigned() ||
                !meta.contains("action_count") || !meta["action_count"].is_number_unsigned())
                fail_at(line_no, "header needs positive integer 'state_dim' and 'action_count'");
            state_dim = meta["state_dim"].get<std::size_t>();
            action_count = meta["action_count"].get<std::size_t>();
            if (state_dim == 0 || action_count == 0) fail_at(line_no, "header dimensions must be positive");
            have_header = true;
            continue;
        }
        trajectories.push_back(read_trajectory(j, line_no, state_dim, action_count));
    }
    if (trajectories.empty()) throw ValidationError("no trajectories");
    return TrajectoryDataset(std::move(trajectories), action_count);
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
    try {
        return read_dataset(in);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_dataset(const TrajectoryDataset& dataset, std::ostream& out, const std::optional<Provenance>& provenance) {
    ordered_json meta = {{"state_dim", dataset.state_dim()}, {"action_count", dataset.action_count()}};
    if (provenance) {
        meta["config_hash"] = provenance->config_hash;
        meta["seed"] = provenance->seed;
    }
    out << ordered_json{{"meta", meta}}.dump() << '\n';
    for (const auto& traj : dataset) {
        ordered_json steps = ordered_json::array();
        for (const auto& s : traj.steps) steps.push_back({{"s", s.state}, {"a", s.action}, {"r", s.reward}});
        ordered_json line = {{"id", traj.id},
                             {"steps", std::move(steps)},
                             {"terminal", traj.terminal ? ordered_json(*traj.terminal) : ordered_json(nullptr)},
                             {"severity", traj.severity ? ordered_json(*traj.severity) : ordered_json(nullptr)}};
        out << line.dump() << '\n';
    }
}

void save_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path,
                  const std::optional<Provenance>& provenance) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write dataset '" + path.string() + "'");
    write_dataset(dataset, out, provenance);
    if (!out) throw ValidationError("failed writing dataset '" + path.string() + "'");
}

}  // namespace opecalib
