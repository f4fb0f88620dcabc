// SPDX-License-Identifier: Apache-2.0

#include "guipra/env_sim.hpp"

#include "guipra/text.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

namespace guipra::env {

using nlohmann::json;

namespace {

Rgb seeded_color(std::uint64_t seed, std::uint64_t salt, int lo, int hi)
{
    std::mt19937_64 rng(seed ^ (salt * 0x9E3779B97F4A7C15ULL));
    const auto channel = [&] { return static_cast<std::uint8_t>(lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1))); };
    const auto r = channel();
    const auto g = channel();
    const auto b = channel();
    return Rgb{r, g, b};
}

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// A 3x5 pseudo-glyph per character; enough to make labels visibly distinct.
void draw_label(Raster& raster, std::string_view label, int x, int y, int x_max, Rgb color)
{
    constexpr int scale = 2;
    for (unsigned char c : label) {
        if (x + 3 * scale > x_max) break;
        if (c != ' ') {
            const std::uint32_t bits = static_cast<std::uint32_t>(fnv1a(std::string_view(reinterpret_cast<const char*>(&c), 1)));
            for (int row = 0; row < 5; ++row) {
                for (int col = 0; col < 3; ++col) {
                    if ((bits >> (row * 3 + col)) & 1U) {
                        raster.fill_rect(x + col * scale, y + row * scale, x + (col + 1) * scale, y + (row + 1) * scale, color);
                    }
                }
            }
        }
        x += 4 * scale;
    }
}

bool same_text(const std::string& a, const std::string& b)
{
    auto fold = [](std::string s) {
        s = text::normalize_space(s);
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    };
    return fold(a) == fold(b);
}

[[noreturn]] void invalid(const TaskGraph& graph, const std::string& what)
{
    throw InvalidGraphError("task '" + graph.task_id + "': " + what);
}

void check_predicate(const Predicate& p, const TaskGraph& graph)
{
    switch (p.op) {
    case Predicate::Op::on_screen:
        if (!graph.screens.count(p.arg)) invalid(graph, "predicate refers to unknown screen '" + p.arg + "'");
        break;
    case Predicate::Op::performed:
    case Predicate::Op::never_performed:
        if (!p.pattern) invalid(graph, "action predicate without a pattern");
        break;
    case Predicate::Op::negate:
        if (p.children.size() != 1) invalid(graph, "'not' takes exactly one operand");
        break;
    default:
        break;
    }
    for (const auto& child : p.children) check_predicate(child, graph);
}

const ScreenSpec& screen_of(const TaskGraph& graph, const std::string& id)
{
    const auto it = graph.screens.find(id);
    if (it == graph.screens.end()) invalid(graph, "unknown screen '" + id + "'");
    return it->second;
}

Observation observe_screen(const ScreenSpec& screen, std::size_t step_index)
{
    return Observation{render_screen(screen), screen.elements, step_index};
}

// Each action atom is checked against the screen that was current when the
// action was taken, so replay the log.
bool ever_performed(const ActionPattern& pattern, const EnvState& state, const TaskGraph& graph)
{
    std::string screen = graph.initial;
    for (const auto& action : state.actions_taken) {
        const auto& spec = screen_of(graph, screen);
        if (matches(pattern, action, spec)) return true;
        if (const auto* t = find_transition(graph, screen, action)) screen = t->to;
    }
    return false;
}

}  // namespace

std::string_view to_string(Verdict verdict) { return verdict == Verdict::pass ? "pass" : "fail"; }

void check(const TaskGraph& graph)
{
    if (graph.task_id.empty()) invalid(graph, "missing id");
    if (graph.goal_text.empty()) invalid(graph, "missing goal text");
    if (graph.step_budget <= 0) invalid(graph, "step budget must be positive");
    if (graph.screens.empty()) invalid(graph, "no screens");
    if (!graph.screens.count(graph.initial)) invalid(graph, "initial screen '" + graph.initial + "' does not exist");
    for (const auto& [id, screen] : graph.screens) {
        if (id != screen.screen_id) invalid(graph, "screen key '" + id + "' does not match its id");
        std::set<std::string> seen;
        for (const auto& element : screen.elements) {
            try {
                guipra::check(element);
            } catch (const InvariantError& e) {
                invalid(graph, "screen '" + id + "': " + e.what());
            }
            if (!seen.insert(element.element_id).second) {
                invalid(graph, "screen '" + id + "' repeats element id '" + element.element_id + "'");
            }
        }
    }
    for (const auto& t : graph.transitions) {
        if (!graph.screens.count(t.from)) invalid(graph, "transition from unknown screen '" + t.from + "'");
        if (!graph.screens.count(t.to)) invalid(graph, "transition to unknown screen '" + t.to + "'");
    }
    check_predicate(graph.goal_predicate, graph);
}

std::optional<std::string> resolve_target(const Action& action, const ScreenSpec& screen)
{
    if (!action.target) return std::nullopt;
    if (const auto* id = std::get_if<std::string>(&*action.target)) return *id;
    const auto& p = std::get<NormPoint>(*action.target);
    // Later elements are drawn on top.
    for (auto it = screen.elements.rbegin(); it != screen.elements.rend(); ++it) {
        const auto& b = it->bbox;
        if (p.x >= b.left && p.x <= b.right && p.y >= b.top && p.y <= b.bottom) return it->element_id;
    }
    return std::nullopt;
}

bool matches(const ActionPattern& pattern, const Action& action, const ScreenSpec& screen)
{
    if (pattern.kind != action.kind) return false;
    if (pattern.target) {
        const auto target = resolve_target(action, screen);
        if (!target || *target != *pattern.target) return false;
    }
    if (pattern.text) {
        if (!action.text || !same_text(*action.text, *pattern.text)) return false;
    }
    return true;
}

const Transition* find_transition(const TaskGraph& graph, const std::string& screen_id, const Action& action)
{
    const auto& screen = screen_of(graph, screen_id);
    const Transition* best = nullptr;
    for (const auto& t : graph.transitions) {
        if (t.from != screen_id || !matches(t.pattern, action, screen)) continue;
        if (!best || t.pattern.specificity() > best->pattern.specificity()) best = &t;
    }
    return best;
}

Image render_screen(const ScreenSpec& screen)
{
    static std::mutex cache_mutex;
    static std::map<std::string, Image> cache;
    json key_doc = {{"id", screen.screen_id}, {"seed", screen.render_seed}, {"elements", json::array()}};
    for (const auto& e : screen.elements) key_doc["elements"].push_back(element_to_json(e));
    const auto key = key_doc.dump();
    {
        std::lock_guard lock(cache_mutex);
        if (const auto it = cache.find(key); it != cache.end()) return it->second;
    }

    Raster raster(kScreenWidth, kScreenHeight, seeded_color(screen.render_seed, 0, 225, 250));
    raster.fill_rect(0, 0, kScreenWidth, 18, seeded_color(screen.render_seed, 1, 40, 90));
    draw_label(raster, screen.screen_id, 6, 4, kScreenWidth - 6, Rgb{255, 255, 255});
    for (const auto& e : screen.elements) {
        const int x0 = static_cast<int>(e.bbox.left * kScreenWidth);
        const int y0 = static_cast<int>(e.bbox.top * kScreenHeight);
        const int x1 = static_cast<int>(e.bbox.right * kScreenWidth);
        const int y1 = static_cast<int>(e.bbox.bottom * kScreenHeight);
        const auto salt = fnv1a(e.element_id);
        raster.fill_rect(x0, y0, x1, y1, seeded_color(screen.render_seed, salt, 150, 235));
        raster.stroke_rect(x0, y0, x1, y1, Rgb{60, 60, 60});
        draw_label(raster, e.label, x0 + 4, y0 + 4, x1 - 2, Rgb{20, 20, 20});
    }
    auto image = encode_png(raster);
    std::lock_guard lock(cache_mutex);
    cache.emplace(key, image);
    return image;
}

std::pair<EnvState, Observation> reset(const TaskGraph& graph)
{
    check(graph);
    EnvState state;
    state.current_screen = graph.initial;
    return {state, observe_screen(screen_of(graph, graph.initial), 0)};
}

std::pair<EnvState, Observation> step(const EnvState& state, const TaskGraph& graph, const Action& action)
{
    if (state.terminated) throw AlreadyTerminatedError("task '" + graph.task_id + "' has already terminated");
    EnvState next = state;
    next.actions_taken.push_back(action);
    if (const auto* t = find_transition(graph, state.current_screen, action)) next.current_screen = t->to;
    if (action.kind == ActionKind::answer && action.text) next.answers.push_back(*action.text);
    if (action.kind == ActionKind::complete) next.terminated = true;
    if (next.actions_taken.size() >= static_cast<std::size_t>(graph.step_budget)) next.terminated = true;
    auto obs = observe_screen(screen_of(graph, next.current_screen), next.actions_taken.size());
    return {std::move(next), std::move(obs)};
}

bool evaluate(const Predicate& p, const EnvState& state, const TaskGraph& graph)
{
    switch (p.op) {
    case Predicate::Op::always:
        return true;
    case Predicate::Op::on_screen:
        return state.current_screen == p.arg;
    case Predicate::Op::answered:
        return std::any_of(state.answers.begin(), state.answers.end(),
                           [&](const std::string& a) { return same_text(a, p.arg); });
    case Predicate::Op::performed:
        return ever_performed(*p.pattern, state, graph);
    case Predicate::Op::never_performed:
        return !ever_performed(*p.pattern, state, graph);
    case Predicate::Op::all:
        return std::all_of(p.children.begin(), p.children.end(),
                           [&](const Predicate& c) { return evaluate(c, state, graph); });
    case Predicate::Op::any:
        return std::any_of(p.children.begin(), p.children.end(),
                           [&](const Predicate& c) { return evaluate(c, state, graph); });
    case Predicate::Op::negate:
        return !evaluate(p.children.at(0), state, graph);
    }
    return false;
}

Verdict validate(const EnvState& state, const TaskGraph& graph)
{
    if (!state.terminated) throw NotTerminatedError("task '" + graph.task_id + "' is still running");
    return evaluate(graph.goal_predicate, state, graph) ? Verdict::pass : Verdict::fail;
}

// --- JSON -------------------------------------------------------------------

ActionPattern pattern_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw InvalidGraphError("action pattern needs a string \"kind\": " + j.dump());
    }
    const auto kind = parse_action_kind(j["kind"].get<std::string>());
    if (!kind) throw InvalidGraphError("unknown action kind in pattern: " + j.dump());
    ActionPattern p;
    p.kind = *kind;
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") continue;
        if (!value.is_string()) throw InvalidGraphError("pattern field '" + key + "' must be a string");
        if (key == "target") {
            p.target = value.get<std::string>();
        } else if (key == "text") {
            p.text = value.get<std::string>();
        } else {
            throw InvalidGraphError("unknown pattern field '" + key + "'");
        }
    }
    return p;
}

json pattern_to_json(const ActionPattern& p)
{
    json j = {{"kind", std::string(to_string(p.kind))}};
    if (p.target) j["target"] = *p.target;
    if (p.text) j["text"] = *p.text;
    return j;
}

Predicate predicate_from_json(const json& j)
{
    Predicate p;
    if (j.is_boolean() && j.get<bool>()) return p;
    if (j.is_object() && j.empty()) return p;
    if (!j.is_object() || j.size() != 1) throw InvalidGraphError("predicate must be a single-key object: " + j.dump());
    const auto& [key, value] = *j.items().begin();
    if (key == "true") return p;
    if (key == "on_screen" || key == "answered") {
        if (!value.is_string()) throw InvalidGraphError("'" + key + "' takes a string");
        p.op = key == "on_screen" ? Predicate::Op::on_screen : Predicate::Op::answered;
        p.arg = value.get<std::string>();
    } else if (key == "performed" || key == "never_performed") {
        p.op = key == "performed" ? Predicate::Op::performed : Predicate::Op::never_performed;
        p.pattern = pattern_from_json(value);
    } else if (key == "all" || key == "any") {
        if (!value.is_array()) throw InvalidGraphError("'" + key + "' takes a list");
        p.op = key == "all" ? Predicate::Op::all : Predicate::Op::any;
        for (const auto& child : value) p.children.push_back(predicate_from_json(child));
    } else if (key == "not") {
        p.op = Predicate::Op::negate;
        p.children.push_back(predicate_from_json(value));
    } else {
        throw InvalidGraphError("unknown predicate '" + key + "'");
    }
    return p;
}

json predicate_to_json(const Predicate& p)
{
    switch (p.op) {
    case Predicate::Op::always:
        return json(true);
    case Predicate::Op::on_screen:
        return {{"on_screen", p.arg}};
    case Predicate::Op::answered:
        return {{"answered", p.arg}};
    case Predicate::Op::performed:
        return {{"performed", pattern_to_json(*p.pattern)}};
    case Predicate::Op::never_performed:
        return {{"never_performed", pattern_to_json(*p.pattern)}};
    case Predicate::Op::all:
    case Predicate::Op::any: {
        json list = json::array();
        for (const auto& c : p.children) list.push_back(predicate_to_json(c));
        return {{p.op == Predicate::Op::all ? "all" : "any", list}};
    }
    case Predicate::Op::negate:
        return {{"not", predicate_to_json(p.children.at(0))}};
    }
    return json(true);
}

TaskGraph graph_from_json(const json& j)
{
    TaskGraph graph;
    try {
        graph.task_id = j.at("id").get<std::string>();
        graph.goal_text = j.at("goal").get<std::string>();
        graph.difficulty = parse_difficulty(j.value("difficulty", std::string("unrated")));
        graph.step_budget = j.at("step_budget").get<int>();
        graph.initial = j.at("initial").get<std::string>();
        if (j.contains("tags")) graph.tags = j["tags"].get<std::vector<std::string>>();
        for (const auto& s : j.at("screens")) {
            ScreenSpec screen;
            screen.screen_id = s.at("id").get<std::string>();
            screen.render_seed = s.value("render_seed", std::uint64_t{0});
            for (const auto& e : s.value("elements", json::array())) screen.elements.push_back(element_from_json(e));
            if (!graph.screens.emplace(screen.screen_id, screen).second) {
                invalid(graph, "duplicate screen '" + screen.screen_id + "'");
            }
        }
        for (const auto& t : j.value("transitions", json::array())) {
            graph.transitions.push_back(
                Transition{t.at("from").get<std::string>(), pattern_from_json(t.at("on")), t.at("to").get<std::string>()});
        }
        graph.goal_predicate = predicate_from_json(j.value("goal_predicate", json(true)));
        for (const auto& a : j.value("optimal", json::array())) graph.optimal.push_back(action_from_json(a));
    } catch (const InvalidGraphError&) {
        throw;
    } catch (const json::exception& e) {
        throw InvalidGraphError(std::string("malformed task document: ") + e.what());
    } catch (const Error& e) {
        throw InvalidGraphError(std::string("malformed task document: ") + e.what());
    }
    check(graph);
    return graph;
}

json graph_to_json(const TaskGraph& graph)
{
    json screens = json::array();
    for (const auto& [id, s] : graph.screens) {
        json elements = json::array();
        for (const auto& e : s.elements) elements.push_back(element_to_json(e));
        screens.push_back({{"id", id}, {"render_seed", s.render_seed}, {"elements", elements}});
    }
    json transitions = json::array();
    for (const auto& t : graph.transitions) {
        transitions.push_back({{"from", t.from}, {"on", pattern_to_json(t.pattern)}, {"to", t.to}});
    }
    json optimal = json::array();
    for (const auto& a : graph.optimal) optimal.push_back(action_to_json(a));
    return {{"id", graph.task_id},
            {"goal", graph.goal_text},
            {"difficulty", std::string(to_string(graph.difficulty))},
            {"tags", graph.tags},
            {"step_budget", graph.step_budget},
            {"initial", graph.initial},
            {"screens", screens},
            {"transitions", transitions},
            {"goal_predicate", predicate_to_json(graph.goal_predicate)},
            {"optimal", optimal}};
}

TaskGraph load_task(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open task file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidGraphError(path.string() + ": " + e.what());
    }
    return graph_from_json(doc);
}

std::vector<perception::StubScreen> stub_screens(const TaskGraph& graph)
{
    std::vector<perception::StubScreen> out;
    for (const auto& [id, screen] : graph.screens) out.push_back({render_screen(screen), screen.elements});
    return out;
}

// --- adapter ----------------------------------------------------------------

SimEnvironment::SimEnvironment(TaskGraph graph) : graph_(std::move(graph))
{
    reset();
}

Observation SimEnvironment::reset()
{
    std::tie(state_, current_) = env::reset(graph_);
    return current_;
}

Observation SimEnvironment::step(const Action& action)
{
    std::tie(state_, current_) = env::step(state_, graph_, action);
    return current_;
}

Observation SimEnvironment::observe() const { return current_; }

Verdict SimEnvironment::validate() const { return env::validate(state_, graph_); }

}  // namespace guipra::env
