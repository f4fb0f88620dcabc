// SPDX-License-Identifier: Apache-2.0

#include "guipra/transcript.hpp"

#include "guipra/blob_store.hpp"
#include "guipra/error.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <utility>

namespace guipra {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Difficulty, std::string_view>, 4> kDifficulties{{
    {Difficulty::easy, "easy"},
    {Difficulty::medium, "medium"},
    {Difficulty::hard, "hard"},
    {Difficulty::unrated, "unrated"},
}};

constexpr std::array<std::pair<ElementRole, std::string_view>, 6> kRoles{{
    {ElementRole::button, "button"},
    {ElementRole::text, "text"},
    {ElementRole::input, "input"},
    {ElementRole::icon, "icon"},
    {ElementRole::list_item, "list_item"},
    {ElementRole::other, "other"},
}};

constexpr std::array<std::pair<ActionKind, std::string_view>, 8> kKinds{{
    {ActionKind::click, "click"},
    {ActionKind::long_press, "long_press"},
    {ActionKind::input_text, "input_text"},
    {ActionKind::scroll, "scroll"},
    {ActionKind::navigate_back, "navigate_back"},
    {ActionKind::open_app, "open_app"},
    {ActionKind::answer, "answer"},
    {ActionKind::complete, "complete"},
}};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::string format_number(double v)
{
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

std::string quote(const std::string& text)
{
    return json(text).dump(-1, ' ', false, json::error_handler_t::replace);
}

enum class Field { required, optional, forbidden };

struct KindRule {
    Field target;
    Field text;
};

KindRule rule_for(ActionKind kind)
{
    switch (kind) {
    case ActionKind::click:
    case ActionKind::long_press:
        return {Field::required, Field::forbidden};
    case ActionKind::input_text:
        return {Field::optional, Field::required};
    case ActionKind::scroll:
        return {Field::optional, Field::required};
    case ActionKind::open_app:
    case ActionKind::answer:
        return {Field::forbidden, Field::required};
    case ActionKind::navigate_back:
    case ActionKind::complete:
        return {Field::forbidden, Field::forbidden};
    }
    return {Field::forbidden, Field::forbidden};
}

void check_field(Field rule, bool present, std::string_view kind, std::string_view field)
{
    if (rule == Field::required && !present) {
        throw ActionSchemaError(std::string(kind) + " requires " + std::string(field));
    }
    if (rule == Field::forbidden && present) {
        throw ActionSchemaError(std::string(kind) + " does not take " + std::string(field));
    }
}

}  // namespace

std::string_view to_string(Difficulty d)
{
    for (const auto& [value, name] : kDifficulties) {
        if (value == d) return name;
    }
    return "unrated";
}

Difficulty parse_difficulty(std::string_view text)
{
    for (const auto& [value, name] : kDifficulties) {
        if (name == text) return value;
    }
    throw InvariantError("unknown difficulty '" + std::string(text) + "'");
}

Goal::Goal(std::string text, Difficulty difficulty) : text_(std::move(text)), difficulty_(difficulty)
{
    if (text_.empty()) {
        throw InvariantError("goal text must be non-empty");
    }
}

std::string_view to_string(ElementRole role)
{
    for (const auto& [value, name] : kRoles) {
        if (value == role) return name;
    }
    return "other";
}

ElementRole parse_element_role(std::string_view text)
{
    for (const auto& [value, name] : kRoles) {
        if (name == text) return value;
    }
    throw InvariantError("unknown element role '" + std::string(text) + "'");
}

bool is_valid_element_id(std::string_view id)
{
    if (id.empty()) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.' || c == ':';
        if (!ok) return false;
    }
    return true;
}

void check(const UiElement& element)
{
    if (!is_valid_element_id(element.element_id)) {
        throw InvariantError("invalid element id '" + element.element_id + "'");
    }
    const auto& b = element.bbox;
    if (!in_unit(b.left) || !in_unit(b.top) || !in_unit(b.right) || !in_unit(b.bottom) || !(b.left < b.right) ||
        !(b.top < b.bottom)) {
        throw InvariantError("invalid bbox for element '" + element.element_id + "'");
    }
}

std::string_view to_string(ActionKind kind)
{
    for (const auto& [value, name] : kKinds) {
        if (value == kind) return name;
    }
    return "complete";
}

std::optional<ActionKind> parse_action_kind(std::string_view text)
{
    for (const auto& [value, name] : kKinds) {
        if (name == text) return value;
    }
    return std::nullopt;
}

Action Action::click(std::string element_id) { return {ActionKind::click, ActionTarget{std::move(element_id)}, {}}; }
Action Action::long_press(std::string element_id)
{
    return {ActionKind::long_press, ActionTarget{std::move(element_id)}, {}};
}
Action Action::input_text(std::string text, std::optional<std::string> element_id)
{
    Action a{ActionKind::input_text, {}, std::move(text)};
    if (element_id) a.target = ActionTarget{std::move(*element_id)};
    return a;
}
Action Action::scroll(std::string direction) { return {ActionKind::scroll, {}, std::move(direction)}; }
Action Action::navigate_back() { return {ActionKind::navigate_back, {}, {}}; }
Action Action::open_app(std::string app) { return {ActionKind::open_app, {}, std::move(app)}; }
Action Action::answer(std::string text) { return {ActionKind::answer, {}, std::move(text)}; }
Action Action::complete() { return {ActionKind::complete, {}, {}}; }

void check(const Action& action)
{
    const auto kind = to_string(action.kind);
    const auto rule = rule_for(action.kind);
    check_field(rule.target, action.target.has_value(), kind, "target");
    check_field(rule.text, action.text.has_value(), kind, "text");
    if (action.target) {
        if (const auto* id = std::get_if<std::string>(&*action.target)) {
            if (!is_valid_element_id(*id)) {
                throw ActionSchemaError("invalid target element id '" + *id + "'");
            }
        } else {
            const auto& p = std::get<NormPoint>(*action.target);
            if (!in_unit(p.x) || !in_unit(p.y)) {
                throw ActionSchemaError("target point outside [0,1]");
            }
        }
    }
    if (action.kind == ActionKind::scroll) {
        const auto& dir = *action.text;
        if (dir != "up" && dir != "down" && dir != "left" && dir != "right") {
            throw ActionSchemaError("scroll direction must be up, down, left or right");
        }
    }
    if ((action.kind == ActionKind::open_app) && action.text->empty()) {
        throw ActionSchemaError("open_app requires a non-empty app name");
    }
}

std::string render_action(const Action& action)
{
    std::string out(to_string(action.kind));
    out += '(';
    bool first = true;
    if (action.target) {
        if (const auto* id = std::get_if<std::string>(&*action.target)) {
            out += *id;
        } else {
            const auto& p = std::get<NormPoint>(*action.target);
            out += '(' + format_number(p.x) + ", " + format_number(p.y) + ')';
        }
        first = false;
    }
    if (action.text) {
        if (!first) out += ", ";
        out += quote(*action.text);
    }
    out += ')';
    return out;
}

Action action_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ActionParseError("action must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (key != "kind" && key != "target" && key != "text") {
            throw ActionSchemaError("unknown action field '" + key + "'");
        }
    }
    const auto kind_it = j.find("kind");
    if (kind_it == j.end() || !kind_it->is_string()) {
        throw ActionSchemaError("action requires a string 'kind'");
    }
    const auto kind = parse_action_kind(kind_it->get<std::string>());
    if (!kind) {
        throw ActionSchemaError("unknown action kind '" + kind_it->get<std::string>() + "'");
    }
    Action action{*kind, {}, {}};
    if (const auto t = j.find("target"); t != j.end()) {
        if (t->is_string()) {
            action.target = ActionTarget{t->get<std::string>()};
        } else if (t->is_object() && t->size() == 2 && t->contains("x") && t->contains("y") &&
                   t->at("x").is_number() && t->at("y").is_number()) {
            action.target = ActionTarget{NormPoint{t->at("x").get<double>(), t->at("y").get<double>()}};
        } else {
            throw ActionSchemaError("target must be an element id or {\"x\", \"y\"} point");
        }
    }
    if (const auto t = j.find("text"); t != j.end()) {
        if (!t->is_string()) {
            throw ActionSchemaError("text must be a string");
        }
        action.text = t->get<std::string>();
    }
    check(action);
    return action;
}

Action validate_action(std::string_view raw)
{
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception& e) {
        throw ActionParseError(std::string("malformed action object: ") + e.what());
    }
    return action_from_json(j);
}

json action_to_json(const Action& action)
{
    json j{{"kind", to_string(action.kind)}};
    if (action.target) {
        if (const auto* id = std::get_if<std::string>(&*action.target)) {
            j["target"] = *id;
        } else {
            const auto& p = std::get<NormPoint>(*action.target);
            j["target"] = {{"x", p.x}, {"y", p.y}};
        }
    }
    if (action.text) j["text"] = *action.text;
    return j;
}

Transcript append_step(const Transcript& transcript, Step step)
{
    if (step.observation.step_index != transcript.steps.size()) {
        throw IndexMismatchError("step index " + std::to_string(step.observation.step_index) + " does not follow " +
                                 std::to_string(transcript.steps.size()) + " existing steps");
    }
    Transcript out = transcript;
    out.steps.push_back(std::move(step));
    return out;
}

std::string render_history_line(const Step& step, std::size_t number)
{
    return "Step " + std::to_string(number) + " - thought: " + step.thought + "; action: " + render_action(step.action);
}

std::vector<std::string> render_history_lines(std::span<const Step> steps, std::size_t first_number)
{
    std::vector<std::string> lines;
    lines.reserve(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        lines.push_back(render_history_line(steps[i], first_number + i));
    }
    return lines;
}

std::vector<std::string> render_history_lines(const Transcript& transcript)
{
    return render_history_lines(transcript.steps, 1);
}

std::string render_candidate(const Candidate& candidate)
{
    return "thought: " + candidate.thought + "; action: " + render_action(candidate.action);
}

CandidateSet::CandidateSet(std::vector<Candidate> candidates) : candidates_(std::move(candidates))
{
    if (candidates_.empty()) {
        throw InvariantError("candidate set must hold at least one candidate");
    }
}

json element_to_json(const UiElement& element)
{
    const auto& b = element.bbox;
    return {{"id", element.element_id},
            {"role", to_string(element.role)},
            {"label", element.label},
            {"bbox", {b.left, b.top, b.right, b.bottom}}};
}

UiElement element_from_json(const json& j)
{
    UiElement e;
    e.element_id = j.at("id").get<std::string>();
    e.role = parse_element_role(j.value("role", std::string("other")));
    e.label = j.value("label", std::string());
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) {
        throw InvariantError("bbox must be [left, top, right, bottom]");
    }
    e.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    check(e);
    return e;
}

json observation_to_json(const Observation& obs, BlobStore& blobs)
{
    json elements = json::array();
    for (const auto& e : obs.elements) elements.push_back(element_to_json(e));
    json screenshot = nullptr;
    if (!obs.screenshot.empty()) {
        screenshot = {{"sha256", blobs.put(obs.screenshot)}, {"media_type", obs.screenshot.media_type}};
    }
    return {{"step_index", obs.step_index}, {"screenshot", screenshot}, {"elements", elements}};
}

Observation observation_from_json(const json& j, const BlobStore& blobs)
{
    Observation obs;
    obs.step_index = j.at("step_index").get<std::size_t>();
    const auto& shot = j.at("screenshot");
    if (!shot.is_null()) {
        obs.screenshot = blobs.get(shot.at("sha256").get<std::string>(), shot.at("media_type").get<std::string>());
    }
    for (const auto& e : j.at("elements")) obs.elements.push_back(element_from_json(e));
    return obs;
}

json step_to_json(const Step& step, BlobStore& blobs)
{
    return {{"thought", step.thought},
            {"action", action_to_json(step.action)},
            {"observation", observation_to_json(step.observation, blobs)}};
}

Step step_from_json(const json& j, const BlobStore& blobs)
{
    return {j.at("thought").get<std::string>(), action_from_json(j.at("action")),
            observation_from_json(j.at("observation"), blobs)};
}

void write_transcript(const Transcript& transcript, std::ostream& out, BlobStore& blobs)
{
    json header{{"type", "goal"},
                {"text", transcript.goal.text()},
                {"difficulty", to_string(transcript.goal.difficulty())},
                {"steps", transcript.steps.size()}};
    out << header.dump() << '\n';
    for (const auto& step : transcript.steps) {
        auto record = step_to_json(step, blobs);
        record["type"] = "step";
        out << record.dump() << '\n';
    }
}

Transcript read_transcript(std::istream& in, const BlobStore& blobs)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("transcript stream is empty");
    }
    const auto header = json::parse(line);
    if (header.value("type", "") != "goal") {
        throw IoError("transcript must start with a goal record");
    }
    Transcript t{Goal(header.at("text").get<std::string>(), parse_difficulty(header.at("difficulty").get<std::string>())),
                 {}};
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto record = json::parse(line);
        t = append_step(t, step_from_json(record, blobs));
    }
    return t;
}

}  // namespace guipra
