// SPDX-License-Identifier: Apache-2.0

#include "guipra/model_gateway.hpp"

#include "guipra/error.hpp"
#include "guipra/pylist.hpp"
#include "guipra/text.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <iterator>

namespace guipra::gateway {

using nlohmann::json;

void check(const SamplingParams& params)
{
    if (!(params.temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
    if (!(params.top_p > 0.0 && params.top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (params.top_k < 1) throw ConfigError("top_k must be positive");
}

std::string fingerprint(const ChatRequest& request)
{
    std::string material;
    auto field = [&material](std::string_view tag, std::string_view value) {
        material += tag;
        material += std::to_string(value.size());
        material += ':';
        material += value;
    };
    field("system", request.system_text);
    field("user", request.user_text);
    for (const auto& image : request.images) field("image", content_hash(image));
    field("seed", std::to_string(request.params.seed));
    return sha256_hex(material);
}

std::string Judge::ask(std::string system_text, std::string user_text, std::vector<Image> images) const
{
    ChatRequest request{std::move(system_text), std::move(user_text), std::move(images), params, max_output_tokens};
    return backend.chat(request);
}

namespace {

std::vector<std::string> string_or_list(const json& j, const char* key)
{
    std::vector<std::string> out;
    const auto it = j.find(key);
    if (it == j.end()) return out;
    if (it->is_string()) {
        out.push_back(it->get<std::string>());
    } else {
        for (const auto& v : *it) out.push_back(v.get<std::string>());
    }
    return out;
}

bool contains_all(const std::string& haystack, const std::vector<std::string>& needles)
{
    for (const auto& n : needles) {
        if (haystack.find(n) == std::string::npos) return false;
    }
    return true;
}

bool contains_none(const std::string& haystack, const std::vector<std::string>& needles)
{
    for (const auto& n : needles) {
        if (haystack.find(n) != std::string::npos) return false;
    }
    return true;
}

constexpr std::string_view kHistoryMarker = "Full History (as list): ";

std::string keep_last_reply(const std::string& user_text, std::size_t n)
{
    const auto pos = user_text.find(kHistoryMarker);
    if (pos == std::string::npos) return std::string(ScriptedBackend::kUnscripted);
    auto items = parse_python_list(std::string_view(user_text).substr(pos + kHistoryMarker.size()));
    if (!items) return std::string(ScriptedBackend::kUnscripted);
    const auto keep_from = items->size() > n ? items->size() - n : 0;
    for (std::size_t i = 0; i < keep_from; ++i) (*items)[i].clear();
    return format_python_list(*items);
}

}  // namespace

std::vector<ScriptRule> rules_from_json(const json& rules)
{
    std::vector<ScriptRule> out;
    for (const auto& r : rules) {
        ScriptRule rule;
        rule.system_contains = string_or_list(r, "system_contains");
        rule.user_contains = string_or_list(r, "user_contains");
        rule.user_excludes = string_or_list(r, "user_excludes");
        if (r.contains("user_regex")) rule.user_regex = r.at("user_regex").get<std::string>();
        if (r.contains("seeds")) rule.seeds = r.at("seeds").get<std::vector<std::int64_t>>();
        if (r.contains("keep_last")) {
            rule.responder = ScriptRule::Responder::keep_last;
            rule.keep_last = r.at("keep_last").get<std::size_t>();
        } else {
            rule.reply = r.at("reply").get<std::string>();
        }
        out.push_back(std::move(rule));
    }
    return out;
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> fixtures, std::vector<ScriptRule> rules)
    : fixtures_(std::move(fixtures))
{
    for (auto& rule : rules) {
        std::optional<std::regex> regex;
        if (rule.user_regex) {
            try {
                regex.emplace(*rule.user_regex, std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw ConfigError("invalid script regex '" + *rule.user_regex + "': " + e.what());
            }
        }
        rules_.push_back({std::move(rule), std::move(regex)});
    }
}

ScriptedBackend ScriptedBackend::from_directory(const std::filesystem::path& dir)
{
    std::map<std::string, std::string> fixtures;
    std::vector<ScriptRule> rules;
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("fixture directory not found: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto& path = entry.path();
        std::ifstream in(path, std::ios::binary);
        std::string content(std::istreambuf_iterator<char>(in), {});
        if (path.filename() == "rules.json") {
            rules = rules_from_json(json::parse(content));
        } else if (path.extension() == ".txt") {
            fixtures.emplace(path.stem().string(), std::move(content));
        }
    }
    return ScriptedBackend(std::move(fixtures), std::move(rules));
}

std::string ScriptedBackend::chat(const ChatRequest& request) const
{
    if (!fixtures_.empty()) {
        if (const auto it = fixtures_.find(fingerprint(request)); it != fixtures_.end()) return it->second;
    }
    for (const auto& [rule, regex] : rules_) {
        if (!contains_all(request.system_text, rule.system_contains)) continue;
        if (!contains_all(request.user_text, rule.user_contains)) continue;
        if (!contains_none(request.user_text, rule.user_excludes)) continue;
        if (!rule.seeds.empty() &&
            std::find(rule.seeds.begin(), rule.seeds.end(), request.params.seed) == rule.seeds.end()) {
            continue;
        }
        if (regex && !std::regex_search(request.user_text, *regex)) continue;
        if (rule.responder == ScriptRule::Responder::keep_last) return keep_last_reply(request.user_text, rule.keep_last);
        return rule.reply;
    }
    return std::string(kUnscripted);
}

std::string CallbackBackend::chat(const ChatRequest& request) const
{
    std::lock_guard lock(mutex_);
    return fn_(request);
}

std::string RecordingBackend::chat(const ChatRequest& request) const
{
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
    }
    return inner_.chat(request);
}

std::vector<ChatRequest> RecordingBackend::requests() const
{
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t RecordingBackend::count() const
{
    std::lock_guard lock(mutex_);
    return requests_.size();
}

void RecordingBackend::clear()
{
    std::lock_guard lock(mutex_);
    requests_.clear();
}

std::optional<Candidate> parse_agent_reply(std::string_view reply)
{
    const auto action_pos = reply.rfind("Action:");
    if (action_pos == std::string_view::npos) return std::nullopt;
    auto object = text::first_json_object(reply.substr(action_pos + 7));
    if (!object) return std::nullopt;
    Action action;
    try {
        action = action_from_json(*object);
    } catch (const Error&) {
        return std::nullopt;
    }
    std::string thought;
    auto head = reply.substr(0, action_pos);
    for (std::string_view marker : {"Thought:", "Reason:"}) {
        if (const auto p = head.find(marker); p != std::string_view::npos) {
            thought = std::string(text::trim(head.substr(p + marker.size())));
            break;
        }
    }
    return Candidate{std::move(thought), std::move(action)};
}

Candidate fallback_candidate() { return Candidate{"parse-failure", Action::navigate_back()}; }

CandidateBatch generate_candidate_batch(const ModelBackend& agent, const ChatRequest& agent_prompt, std::size_t k,
                                        const SeedSchedule& schedule, bool concurrent)
{
    if (k == 0) throw InvariantError("k must be at least 1");
    if (k > schedule.seeds.size()) {
        throw InvariantError("k = " + std::to_string(k) + " exceeds the " + std::to_string(schedule.seeds.size()) +
                             " scheduled seeds");
    }
    std::vector<ChatRequest> requests(k, agent_prompt);
    for (std::size_t i = 0; i < k; ++i) requests[i].params.seed = schedule.seeds[i];

    std::vector<std::string> replies(k);
    if (concurrent && k > 1) {
        std::vector<std::future<std::string>> futures;
        futures.reserve(k);
        for (const auto& request : requests) {
            futures.push_back(std::async(std::launch::async, [&agent, &request] { return agent.chat(request); }));
        }
        // Drain every future before rethrowing so no task outlives `requests`.
        std::exception_ptr failure;
        for (std::size_t i = 0; i < k; ++i) {
            try {
                replies[i] = futures[i].get();
            } catch (...) {
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    } else {
        for (std::size_t i = 0; i < k; ++i) replies[i] = agent.chat(requests[i]);
    }

    std::vector<Candidate> kept;
    std::vector<std::int64_t> seeds;
    for (std::size_t i = 0; i < k; ++i) {
        if (auto c = parse_agent_reply(replies[i])) {
            kept.push_back(std::move(*c));
            seeds.push_back(schedule.seeds[i]);
        }
    }
    const bool fallback = kept.empty();
    if (fallback) kept.push_back(fallback_candidate());
    return CandidateBatch{CandidateSet(std::move(kept)), std::move(seeds), std::move(replies), k, fallback};
}

CandidateSet generate_candidates(const ModelBackend& agent, const ChatRequest& agent_prompt, std::size_t k,
                                 const SeedSchedule& schedule)
{
    return generate_candidate_batch(agent, agent_prompt, k, schedule).candidates;
}

}  // namespace guipra::gateway
