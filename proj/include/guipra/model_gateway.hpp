// SPDX-License-Identifier: Apache-2.0
//
// Uniform access to agent and judge models. Every backend must accept
// concurrent chat() calls.

#pragma once

#include "guipra/image.hpp"
#include "guipra/transcript.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace guipra::gateway {

struct SamplingParams {
    double temperature = 0.5;
    double top_p = 0.9;
    int top_k = 80;
    std::int64_t seed = 42;

    friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

// Throws ConfigError when a field is out of range.
void check(const SamplingParams& params);

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    // First image is the primary screenshot.
    std::vector<Image> images;
    SamplingParams params;
    int max_output_tokens = 1024;
};

struct SeedSchedule {
    std::vector<std::int64_t> seeds{30, 42, 3407, 114514, 256, 64, 1024, 2};
    std::int64_t base_seed = 42;

    friend bool operator==(const SeedSchedule&, const SeedSchedule&) = default;
};

// Stable hex digest of (system_text, user_text, image hashes, seed).
std::string fingerprint(const ChatRequest& request);

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    // Throws BackendUnreachableError or ReplyTruncatedError.
    virtual std::string chat(const ChatRequest& request) const = 0;
};

inline std::string chat(const ModelBackend& backend, const ChatRequest& request) { return backend.chat(request); }

// Judge handle: a backend plus the sampling settings used for every judge call.
struct Judge {
    const ModelBackend& backend;
    SamplingParams params{};
    int max_output_tokens = 1024;

    std::string ask(std::string system_text, std::string user_text, std::vector<Image> images = {}) const;
};

// --- scripted backend ------------------------------------------------------

// A rule-driven reply. Conditions are ANDed; an empty condition always holds.
struct ScriptRule {
    std::vector<std::string> system_contains;
    std::vector<std::string> user_contains;
    std::vector<std::string> user_excludes;
    std::optional<std::string> user_regex;
    std::vector<std::int64_t> seeds;

    enum class Responder { fixed, keep_last };
    Responder responder = Responder::fixed;
    std::string reply;
    // keep_last: echo the memory history list with all but the last n entries
    // blanked.
    std::size_t keep_last = 0;
};

std::vector<ScriptRule> rules_from_json(const nlohmann::json& rules);

// Deterministic backend. Lookup order: exact fingerprint fixture, then the
// first matching rule, then the literal reply "UNSCRIPTED". Immutable after
// construction.
class ScriptedBackend final : public ModelBackend {
public:
    static constexpr std::string_view kUnscripted = "UNSCRIPTED";

    explicit ScriptedBackend(std::map<std::string, std::string> fixtures = {}, std::vector<ScriptRule> rules = {});

    // Loads every `<fingerprint>.txt` file in `dir` as a fixture, plus
    // `rules.json` when present.
    static ScriptedBackend from_directory(const std::filesystem::path& dir);

    std::string chat(const ChatRequest& request) const override;

private:
    struct CompiledRule {
        ScriptRule rule;
        std::optional<std::regex> regex;
    };
    std::map<std::string, std::string> fixtures_;
    std::vector<CompiledRule> rules_;
};

// Adapts a callable; used by tests that need adversarial or stateful replies.
class CallbackBackend final : public ModelBackend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string chat(const ChatRequest& request) const override;

private:
    Fn fn_;
    mutable std::mutex mutex_;
};

// Forwards to another backend and keeps a copy of every request.
class RecordingBackend final : public ModelBackend {
public:
    explicit RecordingBackend(const ModelBackend& inner) : inner_(inner) {}
    std::string chat(const ChatRequest& request) const override;

    std::vector<ChatRequest> requests() const;
    std::size_t count() const;
    void clear();

private:
    const ModelBackend& inner_;
    mutable std::mutex mutex_;
    mutable std::vector<ChatRequest> requests_;
};

// --- remote backend --------------------------------------------------------

struct RemoteConfig {
    // Full URL of the chat-completions route, e.g.
    // http://127.0.0.1:8000/v1/chat/completions
    std::string endpoint;
    std::string api_key;
    std::string model;
    std::chrono::seconds timeout{120};
    int retries = 1;
};

// Speaks the de-facto chat-completions wire format. Transport failures and 5xx
// responses are retried `retries` times.
class RemoteBackend final : public ModelBackend {
public:
    explicit RemoteBackend(RemoteConfig config);
    std::string chat(const ChatRequest& request) const override;

    const RemoteConfig& config() const { return config_; }

private:
    RemoteConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

nlohmann::json to_wire(const ChatRequest& request, const std::string& model);
// Throws ReplyTruncatedError when finish_reason is "length", BackendUnreachableError
// on a body without a reply.
std::string reply_from_wire(const nlohmann::json& body);

// --- candidate generation --------------------------------------------------

// Parses "Thought: ...\nAction: {json}" (or "Reason:" in place of "Thought:").
// Returns nullopt when no valid action can be extracted.
std::optional<Candidate> parse_agent_reply(std::string_view reply);

struct CandidateBatch {
    CandidateSet candidates;
    // Seed that produced each kept candidate; empty when the fallback was used.
    std::vector<std::int64_t> seeds;
    std::vector<std::string> raw_replies;
    std::size_t requests_issued = 0;
    bool used_fallback = false;
};

// Issues k requests that differ only in seed (schedule.seeds[0..k)).
// Throws InvariantError when k exceeds the schedule or is zero.
CandidateBatch generate_candidate_batch(const ModelBackend& agent, const ChatRequest& agent_prompt, std::size_t k,
                                        const SeedSchedule& schedule, bool concurrent = true);

CandidateSet generate_candidates(const ModelBackend& agent, const ChatRequest& agent_prompt, std::size_t k,
                                 const SeedSchedule& schedule);

// Used when every sampled reply is unparsable.
Candidate fallback_candidate();

}  // namespace guipra::gateway
