// SPDX-License-Identifier: Apache-2.0

#include "guipra/harness.hpp"

#include "guipra/text.hpp"

#include <fstream>
#include <sstream>

namespace guipra::harness {

using nlohmann::json;

namespace {

json image_ref(const Image& image, BlobStore& blobs)
{
    return {{"sha256", blobs.put(image)}, {"media_type", image.media_type}};
}

json candidate_json(const Candidate& c)
{
    return {{"thought", c.thought}, {"action", action_to_json(c.action)}, {"rendered", render_candidate(c)}};
}

json memory_json(const memory::CompressedHistory& m)
{
    json recent = json::array();
    const auto lines = render_history_lines(m.recent, m.first_recent_index() + 1);
    for (const auto& line : lines) recent.push_back(line);
    return {{"summary", m.summary}, {"recent", recent}, {"source_length", m.source_length}};
}

json evidence_json(const perception::UIEvidence& ev, BlobStore& blobs)
{
    json items = json::array();
    for (const auto& item : ev.items) {
        items.push_back({{"call", perception::call_to_json(item.source)},
                         {"text", item.structured_text},
                         {"image", item.annotated_image ? image_ref(*item.annotated_image, blobs) : json(nullptr)}});
    }
    return {{"text", ev.final_text},
            {"items", items},
            {"tool_calls", ev.calls_made},
            {"judge_calls", ev.judge_calls},
            {"terminated_explicitly", ev.terminated_explicitly},
            {"conclusion", ev.conclusion ? json(*ev.conclusion) : json(nullptr)}};
}

}  // namespace

json episode_header(const EpisodeResult& r)
{
    return {{"type", "episode"},
            {"task_id", r.task_id},
            {"difficulty", std::string(to_string(r.difficulty))},
            {"mode", std::string(to_string(r.mode))},
            {"k", r.k},
            {"step_budget", r.step_budget},
            {"passed", r.passed},
            {"steps_used", r.steps_used},
            {"final_screen", r.final_screen},
            {"error", r.error ? json(*r.error) : json(nullptr)}};
}

json turn_to_json(const TurnRecord& t, BlobStore& blobs)
{
    json candidates = json::array();
    for (std::size_t i = 0; i < t.candidates.size(); ++i) {
        auto c = candidate_json(t.candidates[i]);
        c["seed"] = i < t.seeds.size() ? json(t.seeds[i]) : json(nullptr);
        candidates.push_back(c);
    }
    json scores = json::array();
    for (const auto& s : t.scores) {
        scores.push_back({{"candidate", s.candidate_index},
                          {"score", s.score},
                          {"original_step", s.original_step},
                          {"original_step_mismatch", s.original_step_mismatch},
                          {"parse_failed", s.parse_failed},
                          {"attempts", s.attempts},
                          {"raw_reply", s.raw_reply}});
    }
    json calls = json::array();
    for (const auto& c : t.calls) calls.push_back({{"category", std::string(to_string(c.category))}, {"fingerprint", c.fingerprint}});
    return {{"type", "turn"},
            {"turn", t.turn},
            {"screenshot", image_ref(t.observation.screenshot, blobs)},
            {"elements", [&] {
                 json e = json::array();
                 for (const auto& el : t.observation.elements) e.push_back(el.element_id);
                 return e;
             }()},
            {"calls", calls},
            {"candidates", candidates},
            {"used_fallback", t.used_fallback},
            {"scores", scores},
            {"chosen_index", t.chosen_index},
            {"chosen", candidate_json(t.chosen)},
            {"memory", t.memory ? memory_json(*t.memory) : json(nullptr)},
            {"evidence", t.evidence ? evidence_json(*t.evidence, blobs) : json(nullptr)}};
}

void write_trajectory(const EpisodeResult& result, std::ostream& out, BlobStore& blobs)
{
    out << episode_header(result).dump() << '\n';
    for (const auto& turn : result.per_turn) out << turn_to_json(turn, blobs).dump() << '\n';
    out.flush();
    if (!out) throw IoError("failed to write trajectory for task '" + result.task_id + "'");
}

LoggedEpisode read_trajectory(std::istream& in)
{
    LoggedEpisode episode;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (text::trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("trajectory line " + std::to_string(number) + ": " + e.what());
        }
        const auto type = record.value("type", std::string());
        if (type == "episode") {
            if (!episode.header.is_null()) throw IoError("trajectory has two episode headers");
            episode.header = std::move(record);
        } else if (type == "turn") {
            if (episode.header.is_null()) throw IoError("trajectory turn before the episode header");
            episode.turns.push_back(std::move(record));
        } else {
            throw IoError("trajectory line " + std::to_string(number) + " has unknown type '" + type + "'");
        }
    }
    if (episode.header.is_null()) throw IoError("trajectory has no episode header");
    return episode;
}

LoggedEpisode read_trajectory(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_trajectory(in);
}

std::string render_replay(const LoggedEpisode& episode)
{
    const auto& h = episode.header;
    std::ostringstream out;
    out << "task " << h.value("task_id", "?") << " [" << h.value("difficulty", "?") << "] mode "
        << h.value("mode", "?") << " k=" << h.value("k", 0) << "\n";
    for (const auto& t : episode.turns) {
        out << "\nturn " << t.value("turn", 0) << " (screen " << t["screenshot"].value("sha256", "").substr(0, 12)
            << ")\n";
        if (t.contains("memory") && !t["memory"].is_null()) {
            const auto& m = t["memory"];
            if (!m.value("summary", "").empty()) out << "  memory summary: " << m.value("summary", "") << "\n";
            out << "  memory recent: " << m["recent"].size() << " of " << m.value("source_length", 0) << " steps\n";
        }
        if (t.contains("evidence") && !t["evidence"].is_null()) {
            const auto& ev = t["evidence"];
            out << "  evidence (" << ev.value("tool_calls", 0) << " tool calls):\n";
            std::istringstream lines(ev.value("text", ""));
            for (std::string line; std::getline(lines, line);) out << "    " << line << "\n";
        }
        const auto& scores = t["scores"];
        const auto& candidates = t["candidates"];
        const auto chosen = t.value("chosen_index", 0);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            out << (i == static_cast<std::size_t>(chosen) ? "  * " : "    ") << "[" << i << "] "
                << candidates[i].value("rendered", "");
            if (i < scores.size()) out << "  -> " << scores[i].value("score", 0);
            out << "\n";
        }
    }
    out << "\nresult: " << (h.value("passed", false) ? "pass" : "fail") << " after " << h.value("steps_used", 0)
        << " of " << h.value("step_budget", 0) << " steps";
    if (h.contains("error") && !h["error"].is_null()) out << " (" << h["error"].get<std::string>() << ")";
    out << "\n";
    return out.str();
}

void write_suite_logs(const std::vector<EpisodeResult>& results, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir / "episodes", ec);
    if (ec) throw IoError("cannot create " + (dir / "episodes").string() + ": " + ec.message());
    DirectoryBlobStore blobs(dir / "blobs");
    for (const auto& r : results) {
        const auto path = dir / "episodes" / (r.task_id + ".jsonl");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        write_trajectory(r, out, blobs);
    }
}

}  // namespace guipra::harness
