// SPDX-License-Identifier: Apache-2.0
//
// Deterministic GUI simulator over declarative task graphs. A graph maps
// (screen, action pattern) pairs to screens; unmatched actions leave the
// screen unchanged. Episodes end on `complete` or when the step budget runs
// out, and a goal predicate decides pass or fail.

#pragma once

#include "guipra/error.hpp"
#include "guipra/perception.hpp"
#include "guipra/transcript.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace guipra::env {

inline constexpr int kScreenWidth = 270;
inline constexpr int kScreenHeight = 480;

struct ScreenSpec {
    std::string screen_id;
    std::vector<UiElement> elements;
    std::uint64_t render_seed = 0;
};

// Unset fields are wildcards. A pointed target matches the element under the
// point on the current screen.
struct ActionPattern {
    ActionKind kind = ActionKind::click;
    std::optional<std::string> target;
    std::optional<std::string> text;

    int specificity() const { return 1 + (target ? 1 : 0) + (text ? 1 : 0); }
};

struct Transition {
    std::string from;
    ActionPattern pattern;
    std::string to;
};

struct Predicate {
    enum class Op { always, on_screen, answered, performed, never_performed, all, any, negate };
    Op op = Op::always;
    std::string arg;
    std::optional<ActionPattern> pattern;
    std::vector<Predicate> children;
};

struct TaskGraph {
    std::string task_id;
    std::string goal_text;
    Difficulty difficulty = Difficulty::unrated;
    std::vector<std::string> tags;
    std::map<std::string, ScreenSpec> screens;
    std::vector<Transition> transitions;
    std::string initial;
    Predicate goal_predicate;
    int step_budget = 1;
    // Documented shortest passing sequence.
    std::vector<Action> optimal;

    Goal goal() const { return Goal(goal_text, difficulty); }
};

struct EnvState {
    std::string current_screen;
    std::vector<Action> actions_taken;
    std::vector<std::string> answers;
    bool terminated = false;

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

enum class Verdict { pass, fail };

std::string_view to_string(Verdict verdict);

// Throws InvalidGraphError on a dangling reference, duplicate element id or
// non-positive budget.
void check(const TaskGraph& graph);

// Element id addressed by `action` on `screen`, if any.
std::optional<std::string> resolve_target(const Action& action, const ScreenSpec& screen);
bool matches(const ActionPattern& pattern, const Action& action, const ScreenSpec& screen);
// The most specific matching transition from `screen_id`; earlier entries win
// ties.
const Transition* find_transition(const TaskGraph& graph, const std::string& screen_id, const Action& action);

// Synthetic screenshot: element boxes and label glyphs over a seeded backdrop.
Image render_screen(const ScreenSpec& screen);

std::pair<EnvState, Observation> reset(const TaskGraph& graph);
// Throws AlreadyTerminatedError.
std::pair<EnvState, Observation> step(const EnvState& state, const TaskGraph& graph, const Action& action);
// Throws NotTerminatedError.
Verdict validate(const EnvState& state, const TaskGraph& graph);
bool evaluate(const Predicate& predicate, const EnvState& state, const TaskGraph& graph);

ActionPattern pattern_from_json(const nlohmann::json& j);
nlohmann::json pattern_to_json(const ActionPattern& pattern);
Predicate predicate_from_json(const nlohmann::json& j);
nlohmann::json predicate_to_json(const Predicate& predicate);
// Throws InvalidGraphError (including for malformed documents).
TaskGraph graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const TaskGraph& graph);
TaskGraph load_task(const std::filesystem::path& path);

// Element table and rendering for every screen, for the offline tool server.
std::vector<perception::StubScreen> stub_screens(const TaskGraph& graph);

// What a live-device driver would implement.
class Environment {
public:
    virtual ~Environment() = default;
    virtual Observation reset() = 0;
    virtual Observation step(const Action& action) = 0;
    virtual Observation observe() const = 0;
    virtual bool terminated() const = 0;
    virtual std::size_t steps_taken() const = 0;
    virtual Verdict validate() const = 0;
};

class SimEnvironment final : public Environment {
public:
    explicit SimEnvironment(TaskGraph graph);

    Observation reset() override;
    Observation step(const Action& action) override;
    Observation observe() const override;
    bool terminated() const override { return state_.terminated; }
    std::size_t steps_taken() const override { return state_.actions_taken.size(); }
    Verdict validate() const override;

    const EnvState& state() const { return state_; }
    const TaskGraph& graph() const { return graph_; }

private:
    TaskGraph graph_;
    EnvState state_;
    Observation current_;
};

}  // namespace guipra::env
