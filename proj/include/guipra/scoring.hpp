// SPDX-License-Identifier: Apache-2.0
//
// Best-of-N scoring. Two modes share the parsing and selection code:
//   gui_pra      - compressed memory, UI evidence and the previous turn's
//                  (action, score) are threaded into the prompt;
//   standard_prm - the raw full history only.
// The rubric and penalty clauses live in the prompt templates; the code only
// enforces the reply's structure and the 0-10 range.

#pragma once

#include "guipra/error.hpp"
#include "guipra/memory.hpp"
#include "guipra/model_gateway.hpp"
#include "guipra/perception.hpp"
#include "guipra/transcript.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace guipra::scoring {

enum class Mode { gui_pra, standard_prm };

std::string_view to_string(Mode mode);

struct ScoreRecord {
    int score = 0;
    // The candidate text as submitted to the judge.
    std::string original_step;
    std::string raw_reply;
    std::size_t candidate_index = 0;
    // The judge echoed a different original_step (after whitespace folding).
    bool original_step_mismatch = false;
    // Both attempts failed to parse; score is the fail-safe 0.
    bool parse_failed = false;
    std::size_t attempts = 1;
};

struct PreviousTurn {
    Action action;
    ScoreRecord record;
};

struct ScoringContext {
    Goal goal;
    Observation prev_obs;
    memory::CompressedHistory memory;
    perception::UIEvidence evidence;
    std::optional<PreviousTurn> previous;
    // Raw transcript steps, used only by standard_prm.
    std::vector<Step> full_history;
};

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    std::vector<Image> images;
};

// Evidence images attached to gui_pra prompts, most recent last.
inline constexpr std::size_t kMaxEvidenceImages = 2;

std::string render_previous(const std::optional<PreviousTurn>& previous);
std::string action_prompt(const ScoringContext& ctx, Mode mode);
PromptBundle build_scoring_prompt(const ScoringContext& ctx, const Candidate& candidate, Mode mode);

class ScoreParseError : public Error {
public:
    enum class Kind { no_eval_block, malformed_object, out_of_range };
    ScoreParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Reads the first JSON object inside <eval>...</eval> (the closing tag may be
// written `<\/eval>`). Decimal scores round half up. Throws ScoreParseError.
ScoreRecord parse_score_reply(std::string_view reply, std::string_view submitted);

// One judge call, one corrective retry, then a fail-safe score of 0.
// Propagates BackendUnreachableError.
ScoreRecord score_candidate(const ScoringContext& ctx, const Candidate& candidate, std::size_t candidate_index,
                            const gateway::Judge& judge, Mode mode);

// Scores every candidate, concurrently when `concurrent` is set. The context
// is shared read-only, so records do not depend on completion order.
std::vector<ScoreRecord> score_candidates(const ScoringContext& ctx, const CandidateSet& candidates,
                                          const gateway::Judge& judge, Mode mode, bool concurrent = true);

struct SelectionResult {
    std::size_t chosen_index = 0;
    Candidate chosen;
    std::vector<ScoreRecord> records;
};

// First index attaining the maximum score. Throws InvariantError on a length
// mismatch.
SelectionResult select_best(const CandidateSet& candidates, std::vector<ScoreRecord> records);

}  // namespace guipra::scoring
