// SPDX-License-Identifier: Apache-2.0
//
// Episode orchestration for the three supervision modes, batch execution,
// metrics and trajectory logs.

#pragma once

#include "guipra/blob_store.hpp"
#include "guipra/env_sim.hpp"
#include "guipra/memory.hpp"
#include "guipra/model_gateway.hpp"
#include "guipra/perception.hpp"
#include "guipra/scoring.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <vector>

namespace guipra::harness {

enum class SupervisionMode { none, standard_prm, gui_pra };

std::string_view to_string(SupervisionMode mode);
// Throws ConfigError.
SupervisionMode parse_mode(std::string_view text);

struct RunConfig {
    SupervisionMode mode = SupervisionMode::gui_pra;
    std::size_t k = 8;
    gateway::SeedSchedule seed_schedule;
    gateway::SamplingParams agent_params;
    gateway::SamplingParams judge_params;
    int max_output_tokens = 1024;
    memory::MemoryConfig memory_cfg;
    perception::PerceptionConfig perception_cfg;
    std::optional<int> step_budget_override;
    // When non-empty, only tasks carrying one of these tags (or ids) run.
    std::set<std::string> task_filter;
    // Fan out candidate generation and scoring.
    bool concurrent = true;

    // Mode none always takes the agent's first sample.
    std::size_t effective_k() const { return mode == SupervisionMode::none ? 1 : k; }
};

// Throws ConfigError.
void check(const RunConfig& cfg);

// Endpoints and credentials; empty endpoints select the offline fixtures.
struct Endpoints {
    std::string agent;
    std::string judge;
    std::string tools;
    std::string agent_model;
    std::string judge_model;
    std::string api_key;
};

struct Settings {
    RunConfig run;
    Endpoints endpoints;
    std::size_t parallel = 1;
};

// Applies one `key = value` setting. Throws ConfigError on an unknown key or
// bad value.
void apply_setting(Settings& settings, std::string_view key, std::string_view value);
// `key = value` lines; `#` starts a comment.
void load_config_file(Settings& settings, const std::filesystem::path& path);
// GUIPRA_AGENT_ENDPOINT, GUIPRA_JUDGE_ENDPOINT, GUIPRA_TOOLS_ENDPOINT,
// GUIPRA_AGENT_MODEL, GUIPRA_JUDGE_MODEL, GUIPRA_API_KEY.
void apply_environment(Settings& settings);
// Every effective value (the API key is masked).
nlohmann::json effective_config(const Settings& settings);

// --- agent prompt -----------------------------------------------------------

std::string render_elements(const std::vector<UiElement>& elements);
gateway::ChatRequest build_agent_prompt(const Transcript& transcript, const Observation& current, const RunConfig& cfg);

// --- episode ----------------------------------------------------------------

enum class CallCategory { agent, memory_stage1, memory_stage2, routing, scoring, other };

std::string_view to_string(CallCategory category);
CallCategory classify_call(const gateway::ChatRequest& request, bool is_agent);

struct CallLog {
    CallCategory category = CallCategory::other;
    std::string fingerprint;

    friend bool operator<(const CallLog& a, const CallLog& b)
    {
        return std::tie(a.category, a.fingerprint) < std::tie(b.category, b.fingerprint);
    }
    friend bool operator==(const CallLog&, const CallLog&) = default;
};

struct TurnRecord {
    std::size_t turn = 0;
    Observation observation;
    std::vector<Candidate> candidates;
    std::vector<std::int64_t> seeds;
    bool used_fallback = false;
    std::vector<scoring::ScoreRecord> scores;
    std::size_t chosen_index = 0;
    Candidate chosen;
    std::optional<memory::CompressedHistory> memory;
    std::optional<perception::UIEvidence> evidence;
    // Sorted, so concurrent completion order does not leak into logs.
    std::vector<CallLog> calls;

    std::size_t count(CallCategory category) const;
};

struct EpisodeResult {
    std::string task_id;
    Difficulty difficulty = Difficulty::unrated;
    SupervisionMode mode = SupervisionMode::gui_pra;
    std::size_t k = 1;
    int step_budget = 0;
    bool passed = false;
    std::size_t steps_used = 0;
    std::vector<TurnRecord> per_turn;
    std::string final_screen;
    // Set when an unrecoverable backend or tool error ended the episode.
    std::optional<std::string> error;
};

// An unrecoverable backend or tool error ends the episode as failed with the
// turns completed so far; it does not propagate.
EpisodeResult run_episode(const env::TaskGraph& graph, const RunConfig& cfg, const gateway::ModelBackend& agent,
                          const gateway::ModelBackend& judge, const perception::ToolClient& tools);

// --- metrics ----------------------------------------------------------------

struct MetricsReport {
    double sr = 0;
    std::map<Difficulty, double> dsr;
    std::map<Difficulty, std::pair<std::size_t, std::size_t>> counts;
};

struct EpisodeOutcome {
    Difficulty difficulty = Difficulty::unrated;
    bool passed = false;
};

// Throws EmptyInputError.
MetricsReport compute_metrics(const std::vector<EpisodeOutcome>& outcomes);
MetricsReport compute_metrics(const std::vector<EpisodeResult>& results);
nlohmann::json metrics_to_json(const MetricsReport& report);

// --- trajectory logs --------------------------------------------------------

// Header line then one line per turn; byte-identical for identical episodes.
// Throws IoError when the stream fails.
void write_trajectory(const EpisodeResult& result, std::ostream& out, BlobStore& blobs);
nlohmann::json episode_header(const EpisodeResult& result);
nlohmann::json turn_to_json(const TurnRecord& turn, BlobStore& blobs);

struct LoggedEpisode {
    nlohmann::json header;
    std::vector<nlohmann::json> turns;
};

// Throws IoError on unreadable or malformed logs.
LoggedEpisode read_trajectory(std::istream& in);
LoggedEpisode read_trajectory(const std::filesystem::path& path);
// Turn-by-turn text rendering of a logged episode.
std::string render_replay(const LoggedEpisode& episode);

// --- fixtures and batches ---------------------------------------------------

struct TaskFixture {
    env::TaskGraph graph;
    std::vector<gateway::ScriptRule> agent_rules;
    std::vector<gateway::ScriptRule> judge_rules;
};

// A task document plus optional "agent" and "judge" rule lists.
TaskFixture fixture_from_json(const nlohmann::json& j);
// Every *.json in `dir` except common.json, in file-name order. Rules in
// common.json are appended after each task's own rules.
std::vector<TaskFixture> load_fixture_dir(const std::filesystem::path& dir);
bool selected(const env::TaskGraph& graph, const std::set<std::string>& filter);

struct EpisodeBackends {
    std::shared_ptr<const gateway::ModelBackend> agent;
    std::shared_ptr<const gateway::ModelBackend> judge;
    std::shared_ptr<const perception::ToolClient> tools;
};

using BackendFactory = std::function<EpisodeBackends(const TaskFixture&)>;

// Scripted agent and judge from the fixture rules plus a stub tool server over
// the task's screens.
EpisodeBackends scripted_backends(const TaskFixture& fixture);

// Runs the selected tasks with up to `parallel` episodes in flight. Results
// are in fixture order.
std::vector<EpisodeResult> run_suite(const std::vector<TaskFixture>& fixtures, const RunConfig& cfg,
                                     const BackendFactory& backends, std::size_t parallel = 1);

// <dir>/episodes/<task_id>.jsonl plus image blobs in <dir>/blobs.
void write_suite_logs(const std::vector<EpisodeResult>& results, const std::filesystem::path& dir);

}  // namespace guipra::harness
