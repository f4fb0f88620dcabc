// SPDX-License-Identifier: Apache-2.0

#include "guipra/harness.hpp"

#include "guipra/prompts.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <sstream>

namespace guipra::harness {

using nlohmann::json;
using prompts::Template;

std::string render_elements(const std::vector<UiElement>& elements)
{
    if (elements.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& e = elements[i];
        if (i != 0) out += '\n';
        out += "- [" + e.element_id + "] " + std::string(to_string(e.role)) + " '" + e.label + "'";
    }
    return out;
}

gateway::ChatRequest build_agent_prompt(const Transcript& transcript, const Observation& current, const RunConfig& cfg)
{
    std::string history = "None";
    if (!transcript.steps.empty()) {
        history.clear();
        const auto lines = render_history_lines(transcript);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (i != 0) history += '\n';
            history += lines[i];
        }
    }
    gateway::ChatRequest request;
    request.system_text = std::string(prompts::text(Template::agent_system));
    request.user_text = prompts::fill(prompts::text(Template::agent_user), {{"goal", transcript.goal.text()},
                                                                            {"elements", render_elements(current.elements)},
                                                                            {"history", history}});
    request.images = {current.screenshot};
    request.params = cfg.agent_params;
    request.max_output_tokens = cfg.max_output_tokens;
    return request;
}

std::string_view to_string(CallCategory category)
{
    switch (category) {
    case CallCategory::agent:
        return "agent";
    case CallCategory::memory_stage1:
        return "memory_stage1";
    case CallCategory::memory_stage2:
        return "memory_stage2";
    case CallCategory::routing:
        return "routing";
    case CallCategory::scoring:
        return "scoring";
    case CallCategory::other:
        return "other";
    }
    return "other";
}

CallCategory classify_call(const gateway::ChatRequest& request, bool is_agent)
{
    if (is_agent) return CallCategory::agent;
    const auto& system = request.system_text;
    if (system == prompts::text(Template::memory_stage1_system)) return CallCategory::memory_stage1;
    if (system == prompts::text(Template::memory_stage2_system)) return CallCategory::memory_stage2;
    if (system == prompts::text(Template::routing_system)) return CallCategory::routing;
    if (system == prompts::text(Template::bon_gui_pra_system) || system == prompts::text(Template::bon_prm_system)) {
        return CallCategory::scoring;
    }
    return CallCategory::other;
}

std::size_t TurnRecord::count(CallCategory category) const
{
    return static_cast<std::size_t>(
        std::count_if(calls.begin(), calls.end(), [&](const CallLog& c) { return c.category == category; }));
}

namespace {

std::vector<CallLog> drain_calls(gateway::RecordingBackend& agent, gateway::RecordingBackend& judge)
{
    std::vector<CallLog> calls;
    for (const auto& r : agent.requests()) calls.push_back({classify_call(r, true), gateway::fingerprint(r)});
    for (const auto& r : judge.requests()) calls.push_back({classify_call(r, false), gateway::fingerprint(r)});
    agent.clear();
    judge.clear();
    std::sort(calls.begin(), calls.end());
    return calls;
}

}  // namespace

EpisodeResult run_episode(const env::TaskGraph& task, const RunConfig& cfg, const gateway::ModelBackend& agent,
                          const gateway::ModelBackend& judge, const perception::ToolClient& tools)
{
    check(cfg);
    env::TaskGraph graph = task;
    if (cfg.step_budget_override) graph.step_budget = *cfg.step_budget_override;

    EpisodeResult result;
    result.task_id = graph.task_id;
    result.difficulty = graph.difficulty;
    result.mode = cfg.mode;
    result.k = cfg.effective_k();
    result.step_budget = graph.step_budget;

    gateway::RecordingBackend agent_log(agent);
    gateway::RecordingBackend judge_log(judge);
    const gateway::Judge judge_handle{judge_log, cfg.judge_params, cfg.max_output_tokens};
    const auto score_mode =
        cfg.mode == SupervisionMode::gui_pra ? scoring::Mode::gui_pra : scoring::Mode::standard_prm;

    env::SimEnvironment environment(graph);
    Transcript transcript{graph.goal(), {}};
    Observation current = environment.observe();
    std::optional<scoring::PreviousTurn> previous;

    try {
        while (!environment.terminated()) {
            TurnRecord turn;
            turn.turn = transcript.steps.size();
            turn.observation = current;

            const auto prompt = build_agent_prompt(transcript, current, cfg);
            auto batch = gateway::generate_candidate_batch(agent_log, prompt, cfg.effective_k(), cfg.seed_schedule,
                                                           cfg.concurrent);
            turn.candidates = batch.candidates.candidates();
            turn.seeds = batch.seeds;
            turn.used_fallback = batch.used_fallback;

            if (cfg.mode == SupervisionMode::none) {
                turn.chosen_index = 0;
            } else {
                scoring::ScoringContext ctx{transcript.goal, current, {}, {}, std::nullopt, {}};
                if (cfg.mode == SupervisionMode::gui_pra) {
                    ctx.memory = memory::build_memory(transcript, judge_handle, cfg.memory_cfg);
                    ctx.evidence = perception::run_perception(transcript.goal, current, ctx.memory, judge_handle,
                                                              tools, cfg.perception_cfg);
                    ctx.previous = previous;
                    turn.memory = ctx.memory;
                    turn.evidence = ctx.evidence;
                } else {
                    ctx.full_history = transcript.steps;
                }
                auto records =
                    scoring::score_candidates(ctx, batch.candidates, judge_handle, score_mode, cfg.concurrent);
                auto selection = scoring::select_best(batch.candidates, std::move(records));
                turn.chosen_index = selection.chosen_index;
                turn.scores = std::move(selection.records);
                previous = scoring::PreviousTurn{batch.candidates[turn.chosen_index].action,
                                                 turn.scores[turn.chosen_index]};
            }
            turn.chosen = batch.candidates[turn.chosen_index];

            Observation next = environment.step(turn.chosen.action);
            next.step_index = transcript.steps.size();
            transcript = append_step(transcript, Step{turn.chosen.thought, turn.chosen.action, next});
            next.step_index = transcript.steps.size();
            current = next;

            turn.calls = drain_calls(agent_log, judge_log);
            result.per_turn.push_back(std::move(turn));
        }
        result.passed = environment.validate() == env::Verdict::pass;
    } catch (const BackendUnreachableError& e) {
        result.error = std::string("backend unreachable: ") + e.what();
    } catch (const ReplyTruncatedError& e) {
        result.error = std::string("reply truncated: ") + e.what();
    } catch (const ToolUnreachableError& e) {
        result.error = std::string("tool unreachable: ") + e.what();
    }
    if (result.error) result.passed = false;
    result.steps_used = environment.steps_taken();
    result.final_screen = environment.state().current_screen;
    return result;
}

// --- metrics ----------------------------------------------------------------

MetricsReport compute_metrics(const std::vector<EpisodeOutcome>& outcomes)
{
    if (outcomes.empty()) throw EmptyInputError("compute_metrics needs at least one episode");
    MetricsReport report;
    std::size_t passed = 0;
    for (const auto& o : outcomes) {
        auto& [p, total] = report.counts[o.difficulty];
        ++total;
        if (o.passed) {
            ++p;
            ++passed;
        }
    }
    report.sr = 100.0 * static_cast<double>(passed) / static_cast<double>(outcomes.size());
    for (const auto& [difficulty, count] : report.counts) {
        report.dsr[difficulty] = 100.0 * static_cast<double>(count.first) / static_cast<double>(count.second);
    }
    return report;
}

MetricsReport compute_metrics(const std::vector<EpisodeResult>& results)
{
    std::vector<EpisodeOutcome> outcomes;
    outcomes.reserve(results.size());
    for (const auto& r : results) outcomes.push_back({r.difficulty, r.passed});
    return compute_metrics(outcomes);
}

json metrics_to_json(const MetricsReport& report)
{
    json dsr = json::object();
    json counts = json::object();
    for (const auto& [difficulty, value] : report.dsr) dsr[std::string(to_string(difficulty))] = value;
    for (const auto& [difficulty, c] : report.counts) {
        counts[std::string(to_string(difficulty))] = {{"passed", c.first}, {"total", c.second}};
    }
    return {{"sr", report.sr}, {"dsr", dsr}, {"counts", counts}};
}

// --- batches ----------------------------------------------------------------

std::vector<EpisodeResult> run_suite(const std::vector<TaskFixture>& fixtures, const RunConfig& cfg,
                                     const BackendFactory& backends, std::size_t parallel)
{
    check(cfg);
    std::vector<const TaskFixture*> chosen;
    for (const auto& f : fixtures) {
        if (selected(f.graph, cfg.task_filter)) chosen.push_back(&f);
    }
    std::vector<EpisodeResult> results(chosen.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < chosen.size(); i = next++) {
            const auto b = backends(*chosen[i]);
            results[i] = run_episode(chosen[i]->graph, cfg, *b.agent, *b.judge, *b.tools);
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(parallel, chosen.size()));
    std::vector<std::future<void>> futures;
    for (std::size_t w = 1; w < workers; ++w) futures.push_back(std::async(std::launch::async, worker));
    std::exception_ptr failure;
    try {
        worker();
    } catch (...) {
        failure = std::current_exception();
    }
    for (auto& f : futures) {
        try {
            f.get();
        } catch (...) {
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

}  // namespace guipra::harness
