// SPDX-License-Identifier: Apache-2.0
//
// Dynamic memory: the judge picks how many recent steps stay verbatim, the
// occluded prefix is condensed into one sentence, and the two are combined
// into the compressed history handed to routing and scoring.

#pragma once

#include "guipra/model_gateway.hpp"
#include "guipra/transcript.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace guipra::memory {

struct MemoryConfig {
    // Memory activates only when the history is longer than this.
    std::size_t activation_threshold = 5;
    // Suffix length used when the judge's retrieval reply cannot be trusted.
    std::size_t fallback_window = 5;
    std::size_t max_retrieval_retries = 1;

    friend bool operator==(const MemoryConfig&, const MemoryConfig&) = default;
};

// Throws ConfigError.
void check(const MemoryConfig& cfg);

struct CompressedHistory {
    std::string summary;
    std::vector<Step> recent;
    std::size_t source_length = 0;

    // Ordinal (0-based) of recent.front() within the source transcript.
    std::size_t first_recent_index() const { return source_length - recent.size(); }
};

struct Retrieval {
    std::vector<Step> recent;
    std::vector<Step> early;
    std::size_t attempts = 0;
    bool fell_back = false;
};

// Checks a Stage-1 reply against the lines it was asked to filter. Returns the
// number of kept (suffix) lines, or nullopt when the reply is not a list of the
// same length made of an all-empty prefix followed by the original lines
// verbatim. An all-empty reply is rejected: at least the latest step stays.
std::optional<std::size_t> kept_suffix_length(std::string_view reply, const std::vector<std::string>& lines);

std::string stage1_user_prompt(const Transcript& transcript);
std::string stage2_user_prompt(std::span<const Step> early);

// Requires transcript.steps.size() > cfg.activation_threshold.
// Throws InvariantError on the precondition, propagates BackendUnreachableError.
Retrieval retrieve_recent(const Transcript& transcript, const gateway::Judge& judge, const MemoryConfig& cfg);

// First sentence of `reply` (terminal punctuation kept), trimmed.
std::string first_sentence(std::string_view reply);

// Requires a non-empty `early`. Empty replies yield
// "Earlier steps: {n} actions taken.".
std::string summarize_early(std::span<const Step> early, const gateway::Judge& judge);

CompressedHistory build_memory(const Transcript& transcript, const gateway::Judge& judge, const MemoryConfig& cfg);

// Text block used inside the scoring and routing prompts: the summary
// sentence (when present) followed by the recent step lines.
std::string render_memory(const CompressedHistory& memory);

}  // namespace guipra::memory
