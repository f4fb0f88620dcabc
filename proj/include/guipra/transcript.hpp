// SPDX-License-Identifier: Apache-2.0
//
// Episode data model shared by every other module: goals, observations,
// actions, thought/action/observation steps and candidate sets. All types are
// plain values; once built they are never mutated in place.

#pragma once

#include "guipra/image.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace guipra {

class BlobStore;

enum class Difficulty { easy, medium, hard, unrated };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view text);

class Goal {
public:
    // Throws InvariantError on empty text.
    explicit Goal(std::string text, Difficulty difficulty = Difficulty::unrated);

    const std::string& text() const { return text_; }
    Difficulty difficulty() const { return difficulty_; }

    friend bool operator==(const Goal&, const Goal&) = default;

private:
    std::string text_;
    Difficulty difficulty_;
};

enum class ElementRole { button, text, input, icon, list_item, other };

std::string_view to_string(ElementRole role);
ElementRole parse_element_role(std::string_view text);

// Normalized [0,1] box with left < right and top < bottom.
struct BBox {
    double left = 0;
    double top = 0;
    double right = 0;
    double bottom = 0;

    double center_x() const { return (left + right) / 2; }
    double center_y() const { return (top + bottom) / 2; }
    friend bool operator==(const BBox&, const BBox&) = default;
};

bool is_valid_element_id(std::string_view id);

struct UiElement {
    std::string element_id;
    ElementRole role = ElementRole::other;
    std::string label;
    BBox bbox;

    friend bool operator==(const UiElement&, const UiElement&) = default;
};

// Throws InvariantError when the id or box is malformed.
void check(const UiElement& element);

struct NormPoint {
    double x = 0;
    double y = 0;
    friend bool operator==(const NormPoint&, const NormPoint&) = default;
};

enum class ActionKind { click, long_press, input_text, scroll, navigate_back, open_app, answer, complete };

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> parse_action_kind(std::string_view text);

using ActionTarget = std::variant<std::string, NormPoint>;

struct Action {
    ActionKind kind = ActionKind::complete;
    std::optional<ActionTarget> target;
    std::optional<std::string> text;

    static Action click(std::string element_id);
    static Action long_press(std::string element_id);
    static Action input_text(std::string text, std::optional<std::string> element_id = std::nullopt);
    static Action scroll(std::string direction);
    static Action navigate_back();
    static Action open_app(std::string app);
    static Action answer(std::string text);
    static Action complete();

    friend bool operator==(const Action&, const Action&) = default;
};

// Throws ActionSchemaError if the kind's field requirements are not met.
void check(const Action& action);

// Canonical one-line rendering used in every prompt, e.g. `click(btn_new)`,
// `input_text(el_2, "Jane")`, `complete()`. Text payloads are JSON-quoted.
std::string render_action(const Action& action);

// Strict parse of an agent's structured action object. Unknown keys, unknown
// kinds and missing or forbidden fields are rejected.
// Throws ActionParseError (not a JSON object) or ActionSchemaError.
Action validate_action(std::string_view raw);
Action action_from_json(const nlohmann::json& j);
nlohmann::json action_to_json(const Action& action);

struct Observation {
    Image screenshot;
    std::vector<UiElement> elements;
    std::size_t step_index = 0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct Step {
    std::string thought;
    Action action;
    Observation observation;

    friend bool operator==(const Step&, const Step&) = default;
};

struct Transcript {
    Goal goal;
    std::vector<Step> steps;

    friend bool operator==(const Transcript&, const Transcript&) = default;
};

// Returns a copy with `step` appended. Throws IndexMismatchError unless
// step.observation.step_index == transcript.steps.size().
Transcript append_step(const Transcript& transcript, Step step);

// "Step {n} - thought: {u}; action: {a}", numbered from `first_number`.
std::string render_history_line(const Step& step, std::size_t number);
std::vector<std::string> render_history_lines(std::span<const Step> steps, std::size_t first_number = 1);
std::vector<std::string> render_history_lines(const Transcript& transcript);

struct Candidate {
    std::string thought;
    Action action;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Candidate text submitted to the judge: "thought: {u}; action: {a}".
std::string render_candidate(const Candidate& candidate);

class CandidateSet {
public:
    // Throws InvariantError when empty.
    explicit CandidateSet(std::vector<Candidate> candidates);

    std::size_t k() const { return candidates_.size(); }
    const std::vector<Candidate>& candidates() const { return candidates_; }
    const Candidate& operator[](std::size_t i) const { return candidates_.at(i); }

private:
    std::vector<Candidate> candidates_;
};

// Serialization. Screenshots go out-of-line into `blobs` and are referenced by
// content hash.
nlohmann::json element_to_json(const UiElement& element);
UiElement element_from_json(const nlohmann::json& j);
nlohmann::json observation_to_json(const Observation& obs, BlobStore& blobs);
Observation observation_from_json(const nlohmann::json& j, const BlobStore& blobs);
nlohmann::json step_to_json(const Step& step, BlobStore& blobs);
Step step_from_json(const nlohmann::json& j, const BlobStore& blobs);

// One JSON record per line: a goal header followed by one record per step.
void write_transcript(const Transcript& transcript, std::ostream& out, BlobStore& blobs);
Transcript read_transcript(std::istream& in, const BlobStore& blobs);

}  // namespace guipra
