// SPDX-License-Identifier: Apache-2.0

#include "guipra/perception.hpp"

#include "guipra/prompts.hpp"
#include "guipra/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <utility>

namespace guipra::perception {

using nlohmann::json;
using prompts::Template;

namespace {

constexpr std::string_view kParseCorrection =
    "\nYour previous reply could not be parsed. Reply with one JSON object holding \"thought\" and \"actions\", "
    "where actions[0] is a Point, omni_parser or Terminate call.";
constexpr std::string_view kRepeatCorrection = "\nDo not call any tool that you have used before.";
constexpr std::string_view kParseFailure = "parse-failure";

std::optional<ToolCall> call_from_json(const json& action, std::string thought)
{
    if (!action.is_object() || !action.contains("name") || !action.at("name").is_string()) return std::nullopt;
    const auto name = parse_tool_name(action.at("name").get<std::string>());
    if (!name) return std::nullopt;
    ToolCall call;
    call.name = *name;
    call.thought = std::move(thought);
    const auto args = action.find("arguments");
    if (args != action.end() && !args->is_object()) return std::nullopt;
    auto arg_string = [&](const char* key) -> std::optional<std::string> {
        if (args == action.end()) return std::nullopt;
        const auto it = args->find(key);
        if (it == args->end() || !it->is_string()) return std::nullopt;
        return it->get<std::string>();
    };
    if (auto image = arg_string("image")) call.image_ref = *image;
    switch (call.name) {
    case ToolName::point:
        call.param = arg_string("param");
        if (!call.param || text::trim(*call.param).empty()) return std::nullopt;
        break;
    case ToolName::terminate:
        call.param = arg_string("ans");
        if (!call.param) return std::nullopt;
        break;
    case ToolName::omni_parser:
        break;
    }
    return call;
}

std::pair<ToolName, std::optional<std::string>> identity(const ToolCall& call) { return {call.name, call.param}; }

ToolCall parse_failure_call()
{
    return ToolCall{ToolName::terminate, "img_1", std::string(kParseFailure), std::string(kParseFailure)};
}

}  // namespace

std::string_view to_string(ToolName name)
{
    switch (name) {
    case ToolName::omni_parser: return "omni_parser";
    case ToolName::point: return "point";
    case ToolName::terminate: return "terminate";
    }
    return "terminate";
}

std::optional<ToolName> parse_tool_name(std::string_view text)
{
    std::string key;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (key == "point") return ToolName::point;
    if (key == "omniparser") return ToolName::omni_parser;
    if (key == "terminate") return ToolName::terminate;
    return std::nullopt;
}

void check(const ToolCall& call)
{
    if (call.name != ToolName::omni_parser && !call.param) {
        throw InvariantError(std::string(to_string(call.name)) + " call requires a param");
    }
}

json call_to_json(const ToolCall& call)
{
    switch (call.name) {
    case ToolName::omni_parser:
        return {{"name", "omni_parser"}, {"arguments", {{"image", call.image_ref}}}};
    case ToolName::point:
        return {{"name", "Point"}, {"arguments", {{"image", call.image_ref}, {"param", call.param.value_or("")}}}};
    case ToolName::terminate:
        return {{"name", "Terminate"}, {"arguments", {{"ans", call.param.value_or("")}}}};
    }
    return nullptr;
}

void check(const PerceptionConfig& cfg)
{
    if (cfg.max_iterations < 1) throw ConfigError("perception max_iterations must be >= 1");
}

std::optional<ToolCall> parse_tool_reply(std::string_view reply)
{
    const auto object = text::first_json_object(reply);
    if (!object) return std::nullopt;
    // Either the documented {"thought", "actions": [...]} shape or a bare call.
    if (const auto actions = object->find("actions"); actions != object->end()) {
        if (!actions->is_array() || actions->empty()) return std::nullopt;
        std::string thought;
        if (const auto t = object->find("thought"); t != object->end() && t->is_string()) thought = t->get<std::string>();
        return call_from_json(actions->front(), std::move(thought));
    }
    return call_from_json(*object, "");
}

std::string routing_question(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory)
{
    std::string out = "Goal: " + goal.text() + "\nScreen elements (img_1):";
    if (prev_obs.elements.empty()) out += "\nNone";
    for (const auto& e : prev_obs.elements) {
        out += "\n- [" + e.element_id + "] " + std::string(to_string(e.role)) + " '" + e.label + "'";
    }
    out += "\n" + memory::render_memory(memory);
    return out;
}

std::string render_tool_history(const std::vector<ToolOutput>& evidence)
{
    if (evidence.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        out += "\nStep " + std::to_string(i + 1) + ": " + call_to_json(evidence[i].source).dump();
        out += "\nObservation: " + evidence[i].structured_text;
    }
    return out;
}

namespace {

// Router loop state; every judge call goes through ask() so the budget holds.
class Router {
public:
    Router(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory,
           const gateway::Judge& judge, std::size_t budget)
        : prev_obs_(prev_obs), judge_(judge), budget_(budget),
          question_(routing_question(goal, prev_obs, memory))
    {
    }

    std::size_t calls() const { return calls_; }
    bool exhausted() const { return calls_ >= budget_; }

    // nullopt when the budget ran out before a decision could be made.
    std::optional<ToolCall> decide(const std::vector<ToolOutput>& evidence, std::string_view correction)
    {
        const auto user = prompts::fill(prompts::text(Template::routing_user),
                                        {{"initial_prompt", question_}, {"history_str", render_tool_history(evidence)}});
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (exhausted()) return std::nullopt;
            ++calls_;
            auto prompt = user + std::string(correction);
            if (attempt > 0) prompt += kParseCorrection;
            const auto reply = judge_.ask(std::string(prompts::text(Template::routing_system)), prompt,
                                          prev_obs_.screenshot.empty() ? std::vector<Image>{}
                                                                        : std::vector<Image>{prev_obs_.screenshot});
            if (auto call = parse_tool_reply(reply)) return call;
        }
        return parse_failure_call();
    }

private:
    const Observation& prev_obs_;
    const gateway::Judge& judge_;
    std::size_t budget_;
    std::size_t calls_ = 0;
    std::string question_;
};

}  // namespace

ToolCall select_tool(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory,
                     const std::vector<ToolOutput>& evidence_so_far, const gateway::Judge& judge)
{
    Router router(goal, prev_obs, memory, judge, 2);
    return router.decide(evidence_so_far, "").value_or(parse_failure_call());
}

ToolOutput invoke_tool(const ToolCall& call, const Image& screenshot, const ToolClient& client)
{
    if (call.name == ToolName::terminate) {
        throw InvariantError("terminate is not an invocable tool");
    }
    check(call);
    auto response = client.invoke(ToolRequest{std::string(to_string(call.name)), screenshot, call.param});
    ToolOutput out{call, std::move(response.structured_text), std::move(response.annotated_image)};
    // Grounding servers report coordinates only; the star overlay is drawn here.
    if (call.name == ToolName::point && !out.annotated_image && !screenshot.empty()) {
        if (const auto p = parse_point_report(out.structured_text)) {
            out.annotated_image = overlay_point(screenshot, p->x, p->y);
        }
    }
    return out;
}

std::string aggregate(const std::vector<ToolOutput>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i != 0) out += '\n';
        out += "Evidence " + std::to_string(i + 1) + " (" + std::string(to_string(items[i].source.name)) +
               "): " + items[i].structured_text;
    }
    return out;
}

UIEvidence run_perception(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory,
                          const gateway::Judge& judge, const ToolClient& client, const PerceptionConfig& cfg)
{
    check(cfg);
    UIEvidence evidence;
    Router router(goal, prev_obs, memory, judge, cfg.max_iterations + 2);
    std::set<std::pair<ToolName, std::optional<std::string>>> used;
    bool repeat_rejected = false;

    auto finish = [&] {
        evidence.calls_made = evidence.items.size();
        evidence.judge_calls = router.calls();
        evidence.final_text = aggregate(evidence.items);
        if (evidence.conclusion) {
            if (!evidence.final_text.empty()) evidence.final_text += '\n';
            evidence.final_text += *evidence.conclusion;
        }
        return evidence;
    };

    try {
        while (evidence.items.size() < cfg.max_iterations) {
            auto call = router.decide(evidence.items, "");
            while (call && call->name != ToolName::terminate && !cfg.allow_repeat_tools &&
                   used.contains(identity(*call))) {
                if (repeat_rejected) {
                    call.reset();
                    break;
                }
                repeat_rejected = true;
                call = router.decide(evidence.items, kRepeatCorrection);
            }
            if (!call) break;  // budget exhausted or forced termination
            if (call->name == ToolName::terminate) {
                if (call->thought != kParseFailure) {
                    evidence.terminated_explicitly = true;
                    evidence.conclusion = call->param;
                }
                break;
            }
            evidence.items.push_back(invoke_tool(*call, prev_obs.screenshot, client));
            used.insert(identity(*call));
        }
    } catch (const BackendUnreachableError& e) {
        throw PerceptionBackendError(e.what(), finish());
    } catch (const ToolUnreachableError& e) {
        throw PerceptionToolError(e.what(), finish());
    }
    return finish();
}

}  // namespace guipra::perception
