// SPDX-License-Identifier: Apache-2.0

#include "guipra/harness.hpp"

#include "guipra/text.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace guipra::harness {

using nlohmann::json;

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value)
{
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("setting '" + std::string(key) + "': '" + std::string(value) + "' is not a number");
    }
    return out;
}

double parse_double(std::string_view key, std::string_view value)
{
    const std::string s(value);
    char* end = nullptr;
    const double out = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw ConfigError("setting '" + std::string(key) + "': '" + s + "' is not a number");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value)
{
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("setting '" + std::string(key) + "': '" + std::string(value) + "' is not a boolean");
}

std::vector<std::string> split_list(std::string_view value)
{
    std::vector<std::string> out;
    std::stringstream in{std::string(value)};
    std::string item;
    while (std::getline(in, item, ',')) {
        item = std::string(text::trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool apply_sampling(gateway::SamplingParams& p, std::string_view field, std::string_view key, std::string_view value)
{
    if (field == "temperature") {
        p.temperature = parse_double(key, value);
    } else if (field == "top_p") {
        p.top_p = parse_double(key, value);
    } else if (field == "top_k") {
        p.top_k = parse_number<int>(key, value);
    } else if (field == "seed") {
        p.seed = parse_number<std::int64_t>(key, value);
    } else {
        return false;
    }
    return true;
}

json sampling_json(const gateway::SamplingParams& p)
{
    return {{"temperature", p.temperature}, {"top_p", p.top_p}, {"top_k", p.top_k}, {"seed", p.seed}};
}

}  // namespace

std::string_view to_string(SupervisionMode mode)
{
    switch (mode) {
    case SupervisionMode::none:
        return "none";
    case SupervisionMode::standard_prm:
        return "standard_prm";
    case SupervisionMode::gui_pra:
        return "gui_pra";
    }
    return "none";
}

SupervisionMode parse_mode(std::string_view text)
{
    if (text == "none") return SupervisionMode::none;
    if (text == "standard_prm" || text == "prm") return SupervisionMode::standard_prm;
    if (text == "gui_pra" || text == "gui-pra") return SupervisionMode::gui_pra;
    throw ConfigError("unknown mode '" + std::string(text) + "' (none, standard_prm, gui_pra)");
}

void check(const RunConfig& cfg)
{
    if (cfg.k == 0) throw ConfigError("k must be at least 1");
    if (cfg.effective_k() > cfg.seed_schedule.seeds.size()) {
        throw ConfigError("k = " + std::to_string(cfg.k) + " exceeds the " +
                          std::to_string(cfg.seed_schedule.seeds.size()) + " scheduled seeds");
    }
    if (cfg.max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
    if (cfg.step_budget_override && *cfg.step_budget_override <= 0) {
        throw ConfigError("step_budget_override must be positive");
    }
    gateway::check(cfg.agent_params);
    gateway::check(cfg.judge_params);
    memory::check(cfg.memory_cfg);
    perception::check(cfg.perception_cfg);
}

void apply_setting(Settings& s, std::string_view key, std::string_view value)
{
    auto& run = s.run;
    if (key == "mode") {
        run.mode = parse_mode(value);
    } else if (key == "k") {
        run.k = parse_number<std::size_t>(key, value);
    } else if (key == "seeds") {
        run.seed_schedule.seeds.clear();
        for (const auto& item : split_list(value)) run.seed_schedule.seeds.push_back(parse_number<std::int64_t>(key, item));
    } else if (key == "base_seed") {
        run.seed_schedule.base_seed = parse_number<std::int64_t>(key, value);
    } else if (key.rfind("agent.", 0) == 0 && apply_sampling(run.agent_params, key.substr(6), key, value)) {
    } else if (key.rfind("judge.", 0) == 0 && apply_sampling(run.judge_params, key.substr(6), key, value)) {
    } else if (key == "max_output_tokens") {
        run.max_output_tokens = parse_number<int>(key, value);
    } else if (key == "memory.activation_threshold") {
        run.memory_cfg.activation_threshold = parse_number<std::size_t>(key, value);
    } else if (key == "memory.fallback_window") {
        run.memory_cfg.fallback_window = parse_number<std::size_t>(key, value);
    } else if (key == "memory.max_retrieval_retries") {
        run.memory_cfg.max_retrieval_retries = parse_number<std::size_t>(key, value);
    } else if (key == "perception.max_iterations") {
        run.perception_cfg.max_iterations = parse_number<std::size_t>(key, value);
    } else if (key == "perception.allow_repeat_tools") {
        run.perception_cfg.allow_repeat_tools = parse_bool(key, value);
    } else if (key == "step_budget_override") {
        if (value.empty() || value == "none") {
            run.step_budget_override.reset();
        } else {
            run.step_budget_override = parse_number<int>(key, value);
        }
    } else if (key == "task_filter") {
        run.task_filter.clear();
        for (const auto& item : split_list(value)) run.task_filter.insert(item);
    } else if (key == "concurrent") {
        run.concurrent = parse_bool(key, value);
    } else if (key == "parallel") {
        s.parallel = parse_number<std::size_t>(key, value);
        if (s.parallel == 0) throw ConfigError("parallel must be at least 1");
    } else if (key == "agent.endpoint") {
        s.endpoints.agent = std::string(value);
    } else if (key == "judge.endpoint") {
        s.endpoints.judge = std::string(value);
    } else if (key == "tools.endpoint") {
        s.endpoints.tools = std::string(value);
    } else if (key == "agent.model") {
        s.endpoints.agent_model = std::string(value);
    } else if (key == "judge.model") {
        s.endpoints.judge_model = std::string(value);
    } else if (key == "api_key") {
        s.endpoints.api_key = std::string(value);
    } else {
        throw ConfigError("unknown setting '" + std::string(key) + "'");
    }
}

void load_config_file(Settings& settings, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = std::string(text::trim(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
        }
        apply_setting(settings, text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)));
    }
}

void apply_environment(Settings& settings)
{
    static const std::pair<const char*, const char*> vars[] = {
        {"GUIPRA_AGENT_ENDPOINT", "agent.endpoint"}, {"GUIPRA_JUDGE_ENDPOINT", "judge.endpoint"},
        {"GUIPRA_TOOLS_ENDPOINT", "tools.endpoint"}, {"GUIPRA_AGENT_MODEL", "agent.model"},
        {"GUIPRA_JUDGE_MODEL", "judge.model"},       {"GUIPRA_API_KEY", "api_key"},
    };
    for (const auto& [var, key] : vars) {
        if (const char* value = std::getenv(var); value && *value) apply_setting(settings, key, value);
    }
}

json effective_config(const Settings& s)
{
    const auto& run = s.run;
    json filter = json::array();
    for (const auto& tag : run.task_filter) filter.push_back(tag);
    return {
        {"mode", std::string(to_string(run.mode))},
        {"k", run.k},
        {"effective_k", run.effective_k()},
        {"seeds", run.seed_schedule.seeds},
        {"base_seed", run.seed_schedule.base_seed},
        {"agent", sampling_json(run.agent_params)},
        {"judge", sampling_json(run.judge_params)},
        {"max_output_tokens", run.max_output_tokens},
        {"memory",
         {{"activation_threshold", run.memory_cfg.activation_threshold},
          {"fallback_window", run.memory_cfg.fallback_window},
          {"max_retrieval_retries", run.memory_cfg.max_retrieval_retries}}},
        {"perception",
         {{"max_iterations", run.perception_cfg.max_iterations},
          {"allow_repeat_tools", run.perception_cfg.allow_repeat_tools}}},
        {"step_budget_override", run.step_budget_override ? json(*run.step_budget_override) : json(nullptr)},
        {"task_filter", filter},
        {"concurrent", run.concurrent},
        {"parallel", s.parallel},
        {"endpoints",
         {{"agent", s.endpoints.agent},
          {"judge", s.endpoints.judge},
          {"tools", s.endpoints.tools},
          {"agent_model", s.endpoints.agent_model},
          {"judge_model", s.endpoints.judge_model},
          {"api_key", s.endpoints.api_key.empty() ? "" : "***"}}},
    };
}

}  // namespace guipra::harness
