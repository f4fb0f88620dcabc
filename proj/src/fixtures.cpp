// SPDX-License-Identifier: Apache-2.0

#include "guipra/harness.hpp"

#include <algorithm>
#include <fstream>

namespace guipra::harness {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<gateway::ScriptRule> rules_at(const json& j, const char* key)
{
    if (!j.contains(key)) return {};
    return gateway::rules_from_json(j[key]);
}

}  // namespace

TaskFixture fixture_from_json(const json& j)
{
    return TaskFixture{env::graph_from_json(j), rules_at(j, "agent"), rules_at(j, "judge")};
}

std::vector<TaskFixture> load_fixture_dir(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) throw IoError("not a fixture directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".json" && entry.path().filename() != "common.json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<gateway::ScriptRule> common_agent;
    std::vector<gateway::ScriptRule> common_judge;
    if (const auto common = dir / "common.json"; std::filesystem::exists(common)) {
        const auto doc = read_json(common);
        common_agent = rules_at(doc, "agent");
        common_judge = rules_at(doc, "judge");
    }

    std::vector<TaskFixture> fixtures;
    for (const auto& path : files) {
        auto fixture = fixture_from_json(read_json(path));
        fixture.agent_rules.insert(fixture.agent_rules.end(), common_agent.begin(), common_agent.end());
        fixture.judge_rules.insert(fixture.judge_rules.end(), common_judge.begin(), common_judge.end());
        fixtures.push_back(std::move(fixture));
    }
    return fixtures;
}

bool selected(const env::TaskGraph& graph, const std::set<std::string>& filter)
{
    if (filter.empty() || filter.count(graph.task_id)) return true;
    return std::any_of(graph.tags.begin(), graph.tags.end(), [&](const std::string& t) { return filter.count(t) > 0; }) ||
           filter.count(std::string(to_string(graph.difficulty))) > 0;
}

EpisodeBackends scripted_backends(const TaskFixture& fixture)
{
    return EpisodeBackends{
        std::make_shared<gateway::ScriptedBackend>(std::map<std::string, std::string>{}, fixture.agent_rules),
        std::make_shared<gateway::ScriptedBackend>(std::map<std::string, std::string>{}, fixture.judge_rules),
        std::make_shared<perception::StubToolServer>(env::stub_screens(fixture.graph)),
    };
}

}  // namespace guipra::harness
