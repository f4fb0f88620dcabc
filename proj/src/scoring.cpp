// SPDX-License-Identifier: Apache-2.0

#include "guipra/scoring.hpp"

#include "guipra/prompts.hpp"
#include "guipra/text.hpp"

#include <cmath>
#include <future>

namespace guipra::scoring {

using nlohmann::json;
using prompts::Template;

namespace {

constexpr std::string_view kScoreCorrection =
    "\n\nYour previous reply could not be used. Reply with exactly one JSON object with an integer \"score\" from 0 "
    "to 10 and the \"original_step\", wrapped in <eval></eval> tags.";

std::string render_steps(const std::vector<Step>& steps)
{
    if (steps.empty()) return "None";
    std::string out;
    const auto lines = render_history_lines(steps, 1);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i != 0) out += '\n';
        out += lines[i];
    }
    return out;
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::gui_pra ? "gui_pra" : "standard_prm"; }

std::string render_previous(const std::optional<PreviousTurn>& previous)
{
    if (!previous) return "None";
    return "action: " + render_action(previous->action) + "; score: " + std::to_string(previous->record.score);
}

std::string action_prompt(const ScoringContext& ctx, Mode mode)
{
    std::string out = ctx.goal.text();
    if (mode == Mode::standard_prm) {
        out += "\nAction history:\n" + render_steps(ctx.full_history);
        return out;
    }
    out += "\n" + memory::render_memory(ctx.memory);
    out += "\nUI evidence:\n" + (ctx.evidence.final_text.empty() ? std::string("None") : ctx.evidence.final_text);
    return out;
}

PromptBundle build_scoring_prompt(const ScoringContext& ctx, const Candidate& candidate, Mode mode)
{
    PromptBundle bundle;
    const auto candidate_text = render_candidate(candidate);
    if (!ctx.prev_obs.screenshot.bytes.empty()) bundle.images.push_back(ctx.prev_obs.screenshot);
    if (mode == Mode::standard_prm) {
        bundle.system_text = std::string(prompts::text(Template::bon_prm_system));
        bundle.user_text = prompts::fill(prompts::text(Template::bon_prm_user),
                                         {{"action_prompt", action_prompt(ctx, mode)}, {"action", candidate_text}});
        return bundle;
    }
    bundle.system_text = std::string(prompts::text(Template::bon_gui_pra_system));
    bundle.user_text = prompts::fill(prompts::text(Template::bon_gui_pra_user),
                                     {{"action_prompt", action_prompt(ctx, mode)},
                                      {"action", candidate_text},
                                      {"previous", render_previous(ctx.previous)}});
    std::vector<Image> evidence_images;
    for (const auto& item : ctx.evidence.items) {
        if (item.annotated_image) evidence_images.push_back(*item.annotated_image);
    }
    const auto skip = evidence_images.size() > kMaxEvidenceImages ? evidence_images.size() - kMaxEvidenceImages : 0;
    for (std::size_t i = skip; i < evidence_images.size(); ++i) bundle.images.push_back(evidence_images[i]);
    return bundle;
}

ScoreRecord parse_score_reply(std::string_view reply, std::string_view submitted)
{
    const auto open = reply.find("<eval>");
    if (open == std::string_view::npos) {
        throw ScoreParseError(ScoreParseError::Kind::no_eval_block, "reply has no <eval> block");
    }
    const auto body_start = open + 6;
    auto close = reply.find("</eval>", body_start);
    const auto escaped_close = reply.find("<\\/eval>", body_start);
    if (close == std::string_view::npos || (escaped_close != std::string_view::npos && escaped_close < close)) {
        close = escaped_close;
    }
    if (close == std::string_view::npos) {
        throw ScoreParseError(ScoreParseError::Kind::no_eval_block, "reply has no closing </eval> tag");
    }
    const auto object = text::first_json_object(reply.substr(body_start, close - body_start));
    if (!object) {
        throw ScoreParseError(ScoreParseError::Kind::malformed_object, "no JSON object inside <eval>");
    }
    const auto score_it = object->find("score");
    const auto step_it = object->find("original_step");
    if (score_it == object->end() || !score_it->is_number() || step_it == object->end() || !step_it->is_string()) {
        throw ScoreParseError(ScoreParseError::Kind::malformed_object,
                              "eval object needs a numeric \"score\" and a string \"original_step\"");
    }
    const double raw = score_it->get<double>();
    if (!(raw >= 0.0 && raw <= 10.0)) {
        throw ScoreParseError(ScoreParseError::Kind::out_of_range, "score " + score_it->dump() + " outside [0, 10]");
    }
    ScoreRecord record;
    record.score = static_cast<int>(std::floor(raw + 0.5));
    record.original_step = std::string(submitted);
    record.raw_reply = std::string(reply);
    record.original_step_mismatch =
        text::normalize_space(step_it->get<std::string>()) != text::normalize_space(submitted);
    return record;
}

ScoreRecord score_candidate(const ScoringContext& ctx, const Candidate& candidate, std::size_t candidate_index,
                            const gateway::Judge& judge, Mode mode)
{
    const auto bundle = build_scoring_prompt(ctx, candidate, mode);
    const auto submitted = render_candidate(candidate);
    std::string reply = judge.ask(bundle.system_text, bundle.user_text, bundle.images);
    try {
        auto record = parse_score_reply(reply, submitted);
        record.candidate_index = candidate_index;
        return record;
    } catch (const ScoreParseError&) {
    }
    reply = judge.ask(bundle.system_text, bundle.user_text + std::string(kScoreCorrection), bundle.images);
    try {
        auto record = parse_score_reply(reply, submitted);
        record.candidate_index = candidate_index;
        record.attempts = 2;
        return record;
    } catch (const ScoreParseError&) {
    }
    ScoreRecord failed;
    failed.score = 0;
    failed.original_step = submitted;
    failed.raw_reply = reply;
    failed.candidate_index = candidate_index;
    failed.parse_failed = true;
    failed.attempts = 2;
    return failed;
}

std::vector<ScoreRecord> score_candidates(const ScoringContext& ctx, const CandidateSet& candidates,
                                          const gateway::Judge& judge, Mode mode, bool concurrent)
{
    std::vector<ScoreRecord> records(candidates.k());
    if (!concurrent || candidates.k() == 1) {
        for (std::size_t i = 0; i < candidates.k(); ++i) records[i] = score_candidate(ctx, candidates[i], i, judge, mode);
        return records;
    }
    std::vector<std::future<ScoreRecord>> futures;
    futures.reserve(candidates.k());
    for (std::size_t i = 0; i < candidates.k(); ++i) {
        futures.push_back(std::async(std::launch::async, [&, i] { return score_candidate(ctx, candidates[i], i, judge, mode); }));
    }
    std::exception_ptr failure;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
            records[i] = futures[i].get();
        } catch (...) {
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return records;
}

SelectionResult select_best(const CandidateSet& candidates, std::vector<ScoreRecord> records)
{
    if (records.size() != candidates.k()) {
        throw InvariantError("select_best: " + std::to_string(records.size()) + " records for " +
                             std::to_string(candidates.k()) + " candidates");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].score > records[best].score) best = i;
    }
    return SelectionResult{best, candidates[best], std::move(records)};
}

}  // namespace guipra::scoring
