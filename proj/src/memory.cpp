// SPDX-License-Identifier: Apache-2.0

#include "guipra/memory.hpp"

#include "guipra/error.hpp"
#include "guipra/prompts.hpp"
#include "guipra/pylist.hpp"
#include "guipra/text.hpp"

#include <cctype>

#include <algorithm>

namespace guipra::memory {

using prompts::Template;

namespace {

constexpr std::string_view kRetrievalCorrection =
    "\nYour previous reply was invalid. Return ONLY a Python list of the same length as the input history, "
    "with earlier steps set to '' and the kept recent steps copied exactly.";

}  // namespace

void check(const MemoryConfig& cfg)
{
    if (cfg.activation_threshold < 1) throw ConfigError("memory activation_threshold must be >= 1");
    if (cfg.fallback_window < 1) throw ConfigError("memory fallback_window must be >= 1");
}

std::optional<std::size_t> kept_suffix_length(std::string_view reply, const std::vector<std::string>& lines)
{
    const auto items = parse_python_list(reply);
    if (!items || items->size() != lines.size()) return std::nullopt;
    std::size_t first_kept = 0;
    while (first_kept < items->size() && text::trim((*items)[first_kept]).empty()) ++first_kept;
    if (first_kept == items->size()) return std::nullopt;
    for (std::size_t i = first_kept; i < items->size(); ++i) {
        if ((*items)[i] != lines[i]) return std::nullopt;
    }
    return items->size() - first_kept;
}

std::string stage1_user_prompt(const Transcript& transcript)
{
    return prompts::fill(prompts::text(Template::memory_stage1_user),
                         {{"goal", transcript.goal.text()},
                          {"history", format_python_list(render_history_lines(transcript))}});
}

std::string stage2_user_prompt(std::span<const Step> early)
{
    return prompts::fill(prompts::text(Template::memory_stage2_user),
                         {{"actions", format_python_list(render_history_lines(early, 1))}});
}

Retrieval retrieve_recent(const Transcript& transcript, const gateway::Judge& judge, const MemoryConfig& cfg)
{
    const auto n = transcript.steps.size();
    if (n <= cfg.activation_threshold) {
        throw InvariantError("retrieve_recent requires more than activation_threshold steps");
    }
    const auto lines = render_history_lines(transcript);
    const auto system = std::string(prompts::text(Template::memory_stage1_system));
    const auto user = stage1_user_prompt(transcript);

    Retrieval result;
    std::optional<std::size_t> kept;
    for (std::size_t attempt = 0; attempt <= cfg.max_retrieval_retries && !kept; ++attempt) {
        ++result.attempts;
        const auto reply = judge.ask(system, attempt == 0 ? user : user + std::string(kRetrievalCorrection));
        kept = kept_suffix_length(reply, lines);
    }
    if (!kept) {
        result.fell_back = true;
        kept = std::min(cfg.fallback_window, n);
    }
    const auto split = static_cast<std::ptrdiff_t>(n - *kept);
    result.early.assign(transcript.steps.begin(), transcript.steps.begin() + split);
    result.recent.assign(transcript.steps.begin() + split, transcript.steps.end());
    return result;
}

std::string first_sentence(std::string_view reply)
{
    const auto s = text::trim(reply);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c != '.' && c != '!' && c != '?') continue;
        auto end = i + 1;
        // Absorb runs like "?!" or a closing quote after the terminator.
        while (end < s.size() && (s[end] == '.' || s[end] == '!' || s[end] == '?' || s[end] == '"' || s[end] == '\'' ||
                                  s[end] == ')')) {
            ++end;
        }
        if (end == s.size() || std::isspace(static_cast<unsigned char>(s[end]))) {
            return std::string(s.substr(0, end));
        }
        i = end - 1;
    }
    return std::string(s);
}

std::string summarize_early(std::span<const Step> early, const gateway::Judge& judge)
{
    if (early.empty()) {
        throw InvariantError("summarize_early requires at least one step");
    }
    const auto reply = judge.ask(std::string(prompts::text(Template::memory_stage2_system)), stage2_user_prompt(early));
    auto sentence = first_sentence(reply);
    if (sentence.empty()) {
        return "Earlier steps: " + std::to_string(early.size()) + " actions taken.";
    }
    return sentence;
}

CompressedHistory build_memory(const Transcript& transcript, const gateway::Judge& judge, const MemoryConfig& cfg)
{
    const auto n = transcript.steps.size();
    if (n <= cfg.activation_threshold) {
        return CompressedHistory{"", transcript.steps, n};
    }
    auto retrieval = retrieve_recent(transcript, judge, cfg);
    std::string summary;
    if (!retrieval.early.empty()) summary = summarize_early(retrieval.early, judge);
    return CompressedHistory{std::move(summary), std::move(retrieval.recent), n};
}

std::string render_memory(const CompressedHistory& memory)
{
    std::string out;
    if (!memory.summary.empty()) {
        out += "Summary of earlier steps: " + memory.summary + "\n";
    }
    out += "Recent steps:";
    if (memory.recent.empty()) {
        out += "\nNone";
    }
    const auto lines = render_history_lines(memory.recent, memory.first_recent_index() + 1);
    for (const auto& line : lines) out += "\n" + line;
    return out;
}

}  // namespace guipra::memory
