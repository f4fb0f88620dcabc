// SPDX-License-Identifier: Apache-2.0

#include "guipra/error.hpp"
#include "guipra/harness.hpp"
#include "guipra/prompts.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace guipra;
using namespace guipra::harness;
using nlohmann::json;

namespace {

const std::vector<TaskFixture>& fixtures()
{
    static const auto all = load_fixture_dir(testsupport::fixture_dir());
    return all;
}

const TaskFixture& fixture(const std::string& id)
{
    for (const auto& f : fixtures()) {
        if (f.graph.task_id == id) return f;
    }
    throw std::runtime_error("no fixture " + id);
}

RunConfig config(SupervisionMode mode)
{
    RunConfig cfg;
    cfg.mode = mode;
    return cfg;
}

EpisodeResult run(const std::string& id, SupervisionMode mode)
{
    const auto& f = fixture(id);
    const auto b = scripted_backends(f);
    return run_episode(f.graph, config(mode), *b.agent, *b.judge, *b.tools);
}

std::set<std::string> passing(SupervisionMode mode)
{
    std::set<std::string> out;
    for (const auto& r : run_suite(fixtures(), config(mode), scripted_backends, 2)) {
        if (r.passed) out.insert(r.task_id);
    }
    return out;
}

std::string slurp_dir(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += std::filesystem::relative(f, dir).string() + "\n" + testsupport::read_file(f);
    return all;
}

}  // namespace

TEST(Mode, Parsing)
{
    EXPECT_EQ(parse_mode("none"), SupervisionMode::none);
    EXPECT_EQ(parse_mode("standard_prm"), SupervisionMode::standard_prm);
    EXPECT_EQ(parse_mode("prm"), SupervisionMode::standard_prm);
    EXPECT_EQ(parse_mode("gui-pra"), SupervisionMode::gui_pra);
    EXPECT_THROW(parse_mode("best"), ConfigError);
    EXPECT_EQ(config(SupervisionMode::none).effective_k(), 1u);
    EXPECT_EQ(config(SupervisionMode::gui_pra).effective_k(), 8u);
}

TEST(Config, DefaultsAndSettings)
{
    Settings s;
    apply_setting(s, "k", "4");
    apply_setting(s, "mode", "standard_prm");
    apply_setting(s, "judge.temperature", "0.2");
    apply_setting(s, "memory.fallback_window", "3");
    apply_setting(s, "perception.max_iterations", "3");
    apply_setting(s, "seeds", "1,2,3,4");
    EXPECT_EQ(s.run.k, 4u);
    EXPECT_EQ(s.run.mode, SupervisionMode::standard_prm);
    EXPECT_DOUBLE_EQ(s.run.judge_params.temperature, 0.2);
    EXPECT_DOUBLE_EQ(s.run.agent_params.temperature, 0.5);
    EXPECT_EQ(s.run.memory_cfg.fallback_window, 3u);
    EXPECT_EQ(s.run.perception_cfg.max_iterations, 3u);
    EXPECT_EQ(s.run.seed_schedule.seeds, (std::vector<std::int64_t>{1, 2, 3, 4}));
    EXPECT_THROW(apply_setting(s, "colour", "blue"), ConfigError);
    EXPECT_THROW(apply_setting(s, "k", "many"), ConfigError);

    RunConfig too_many;
    too_many.k = 9;
    EXPECT_THROW(check(too_many), ConfigError);
}

TEST(Config, FileAndEnvironment)
{
    const auto path = std::filesystem::temp_directory_path() / "guipra_cfg_test.json";
    std::ofstream(path) << "# comment\nk = 2\nmode = none  # trailing\n\nagent.endpoint = http://a/v1/chat/completions\n";
    Settings s;
    load_config_file(s, path);
    EXPECT_EQ(s.run.k, 2u);
    EXPECT_EQ(s.run.mode, SupervisionMode::none);
    EXPECT_EQ(s.endpoints.agent, "http://a/v1/chat/completions");
    std::filesystem::remove(path);
    EXPECT_THROW(load_config_file(s, path), IoError);

    ::setenv("GUIPRA_JUDGE_ENDPOINT", "http://j/v1/chat/completions", 1);
    ::setenv("GUIPRA_API_KEY", "sk-test", 1);
    apply_environment(s);
    ::unsetenv("GUIPRA_JUDGE_ENDPOINT");
    ::unsetenv("GUIPRA_API_KEY");
    EXPECT_EQ(s.endpoints.judge, "http://j/v1/chat/completions");
    const auto eff = effective_config(s);
    EXPECT_EQ(eff.dump().find("sk-test"), std::string::npos);
}

TEST(Config, EffectiveDefaults)
{
    const auto eff = effective_config(Settings{});
    const auto flat = eff.flatten();
    EXPECT_EQ(flat.at("/k"), 8);
    EXPECT_EQ(flat.at("/mode"), "gui_pra");
    EXPECT_EQ(flat.at("/memory/activation_threshold"), 5);
    EXPECT_EQ(flat.at("/perception/max_iterations"), 2);
}

TEST(AgentPrompt, CarriesGoalElementsAndScreenshot)
{
    const auto& f = fixture("open_display");
    const auto [state, obs] = env::reset(f.graph);
    const Transcript t{f.graph.goal(), {}};
    const auto req = build_agent_prompt(t, obs, RunConfig{});
    EXPECT_NE(req.user_text.find("Open the Display settings."), std::string::npos);
    EXPECT_NE(req.user_text.find(render_elements(obs.elements)), std::string::npos);
    EXPECT_EQ(render_elements({UiElement{"btn_a", ElementRole::button, "A", {}}}), "- [btn_a] button 'A'");
    ASSERT_EQ(req.images.size(), 1u);
    EXPECT_EQ(req.images[0], obs.screenshot);
    EXPECT_EQ(req.max_output_tokens, 1024);
}

TEST(Calls, Classification)
{
    auto req = [](prompts::Template t) {
        return gateway::ChatRequest{std::string(prompts::text(t)), "u", {}, {}, 1024};
    };
    EXPECT_EQ(classify_call(req(prompts::Template::memory_stage1_system), false), CallCategory::memory_stage1);
    EXPECT_EQ(classify_call(req(prompts::Template::memory_stage2_system), false), CallCategory::memory_stage2);
    EXPECT_EQ(classify_call(req(prompts::Template::routing_system), false), CallCategory::routing);
    EXPECT_EQ(classify_call(req(prompts::Template::bon_gui_pra_system), false), CallCategory::scoring);
    EXPECT_EQ(classify_call(req(prompts::Template::bon_prm_system), false), CallCategory::scoring);
    EXPECT_EQ(classify_call(gateway::ChatRequest{"x", "u", {}, {}, 1}, true), CallCategory::agent);
}

TEST(Episode, CallCountsPerMode)
{
    const auto none = run("open_display", SupervisionMode::none);
    for (const auto& t : none.per_turn) {
        EXPECT_EQ(t.count(CallCategory::agent), 1u);
        EXPECT_EQ(t.calls.size(), 1u);
        EXPECT_TRUE(t.scores.empty());
    }
    const auto prm = run("open_display", SupervisionMode::standard_prm);
    for (const auto& t : prm.per_turn) {
        EXPECT_EQ(t.count(CallCategory::agent), 8u);
        EXPECT_EQ(t.count(CallCategory::scoring), t.candidates.size());
        EXPECT_EQ(t.count(CallCategory::routing), 0u);
        EXPECT_EQ(t.count(CallCategory::memory_stage1), 0u);
        EXPECT_FALSE(t.evidence);
    }
    const auto gui = run("open_display", SupervisionMode::gui_pra);
    for (const auto& t : gui.per_turn) {
        EXPECT_EQ(t.count(CallCategory::agent), 8u);
        EXPECT_GE(t.count(CallCategory::scoring), t.candidates.size());
        EXPECT_GE(t.count(CallCategory::routing), 1u);
        EXPECT_LE(t.count(CallCategory::routing), 4u);
        ASSERT_TRUE(t.evidence);
        EXPECT_LE(t.evidence->calls_made, 2u);
        EXPECT_EQ(t.count(CallCategory::other), 0u);
    }
}

TEST(Episode, MemoryActivatesOnLongEpisodes)
{
    const auto r = run("newsletter_form", SupervisionMode::gui_pra);
    ASSERT_TRUE(r.passed);
    ASSERT_EQ(r.per_turn.size(), 7u);
    for (const auto& t : r.per_turn) {
        ASSERT_TRUE(t.memory);
        const bool active = t.turn > 5;
        EXPECT_EQ(t.count(CallCategory::memory_stage1) > 0, active) << t.turn;
        EXPECT_EQ(t.memory->source_length, t.turn);
    }
    EXPECT_FALSE(r.per_turn.back().memory->summary.empty());
    EXPECT_EQ(r.per_turn.back().memory->recent.size(), 3u);
}

TEST(Episode, ChosenIsArgmaxOfScores)
{
    for (const auto mode : {SupervisionMode::standard_prm, SupervisionMode::gui_pra}) {
        for (const auto& f : fixtures()) {
            const auto b = scripted_backends(f);
            const auto r = run_episode(f.graph, config(mode), *b.agent, *b.judge, *b.tools);
            for (const auto& t : r.per_turn) {
                std::vector<int> scores;
                for (const auto& s : t.scores) scores.push_back(s.score);
                ASSERT_EQ(t.chosen_index, testsupport::first_argmax(scores)) << f.graph.task_id;
                ASSERT_EQ(t.chosen, t.candidates.at(t.chosen_index));
            }
        }
    }
}

TEST(Suite, OutcomesPerMode)
{
    EXPECT_EQ(passing(SupervisionMode::none), (std::set<std::string>{"battery_level", "newsletter_form", "open_display"}));
    EXPECT_EQ(passing(SupervisionMode::standard_prm),
              (std::set<std::string>{"alarm_seven", "battery_level", "contact_name", "newsletter_form", "open_display",
                                     "wifi_on"}));
    EXPECT_EQ(passing(SupervisionMode::gui_pra),
              (std::set<std::string>{"alarm_seven", "battery_level", "contact_name", "newsletter_form", "note_no_save",
                                     "open_display", "refresh_once", "unread_message", "wifi_on"}));
}

TEST(Suite, PassVerdictsMatchOracleReplay)
{
    const auto docs = testsupport::fixture_documents();
    for (const auto& r : run_suite(fixtures(), config(SupervisionMode::gui_pra), scripted_backends, 2)) {
        const auto doc = std::find_if(docs.begin(), docs.end(), [&](const json& d) { return d["id"] == r.task_id; });
        ASSERT_NE(doc, docs.end());
        std::vector<json> actions;
        for (const auto& t : r.per_turn) actions.push_back(action_to_json(t.chosen.action));
        const auto o = testsupport::GraphOracle(*doc).run(actions);
        EXPECT_EQ(o.passed, r.passed) << r.task_id;
        EXPECT_EQ(o.screen, r.final_screen) << r.task_id;
    }
}

TEST(Suite, FilterAndOrder)
{
    auto cfg = config(SupervisionMode::none);
    cfg.task_filter = {"hard"};
    const auto results = run_suite(fixtures(), cfg, scripted_backends, 3);
    std::vector<std::string> ids;
    for (const auto& r : results) ids.push_back(r.task_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"note_no_save", "unread_message", "newsletter_form", "photos_storage"}));
}

TEST(Episode, BackendFailureEndsEpisodeAsFailed)
{
    const auto& f = fixture("newsletter_form");
    const auto b = scripted_backends(f);
    std::atomic<int> calls{0};
    class Dying final : public gateway::ModelBackend {
    public:
        Dying(const gateway::ModelBackend& inner, std::atomic<int>& calls) : inner_(inner), calls_(calls) {}
        std::string chat(const gateway::ChatRequest& r) const override
        {
            if (++calls_ > 16) throw BackendUnreachableError("agent went away");
            return inner_.chat(r);
        }

    private:
        const gateway::ModelBackend& inner_;
        std::atomic<int>& calls_;
    } dying(*b.agent, calls);
    const auto r = run_episode(f.graph, config(SupervisionMode::gui_pra), dying, *b.judge, *b.tools);
    EXPECT_FALSE(r.passed);
    ASSERT_TRUE(r.error);
    EXPECT_NE(r.error->find("agent went away"), std::string::npos);
    EXPECT_EQ(r.per_turn.size(), 2u);
}

TEST(Episode, StepBudgetOverride)
{
    const auto& f = fixture("newsletter_form");
    const auto b = scripted_backends(f);
    auto cfg = config(SupervisionMode::none);
    cfg.step_budget_override = 2;
    const auto r = run_episode(f.graph, cfg, *b.agent, *b.judge, *b.tools);
    EXPECT_EQ(r.steps_used, 2u);
    EXPECT_FALSE(r.passed);
}

TEST(Metrics, Examples)
{
    const auto m = compute_metrics(std::vector<EpisodeOutcome>{
        {Difficulty::easy, true}, {Difficulty::easy, false}, {Difficulty::hard, true}, {Difficulty::hard, false},
        {Difficulty::hard, false}, {Difficulty::medium, false}, {Difficulty::medium, false}, {Difficulty::medium, false},
        {Difficulty::medium, true}, {Difficulty::medium, false}});
    EXPECT_DOUBLE_EQ(m.sr, 30.0);
    EXPECT_DOUBLE_EQ(m.dsr.at(Difficulty::easy), 50.0);
    EXPECT_NEAR(m.dsr.at(Difficulty::hard), 100.0 / 3.0, 1e-9);
    EXPECT_DOUBLE_EQ(m.dsr.at(Difficulty::medium), 20.0);
    EXPECT_THROW(compute_metrics(std::vector<EpisodeOutcome>{}), EmptyInputError);
    const auto j = metrics_to_json(m);
    EXPECT_EQ(j["counts"]["hard"]["total"], 3);
}

TEST(Metrics, MatchesOracleOnRandomSets)
{
    testsupport::Gen g(5);
    const std::vector<Difficulty> levels = {Difficulty::easy, Difficulty::medium, Difficulty::hard};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<EpisodeOutcome> outcomes;
        std::vector<std::pair<std::string, bool>> plain;
        const auto n = 1 + g.below(60);
        for (std::size_t i = 0; i < n; ++i) {
            const auto d = g.pick(levels);
            const bool ok = g.coin();
            outcomes.push_back({d, ok});
            plain.emplace_back(std::string(to_string(d)), ok);
        }
        const auto got = compute_metrics(outcomes);
        const auto want = testsupport::metrics_oracle(plain);
        ASSERT_NEAR(got.sr, want.sr, 1e-9);
        ASSERT_EQ(got.dsr.size(), want.dsr.size());
        for (const auto& [d, v] : got.dsr) ASSERT_NEAR(v, want.dsr.at(std::string(to_string(d))), 1e-9);
    }
}

TEST(Trajectory, RoundTripAndReplay)
{
    const auto r = run("note_no_save", SupervisionMode::gui_pra);
    MemoryBlobStore blobs;
    std::stringstream ss;
    write_trajectory(r, ss, blobs);
    const auto logged = read_trajectory(ss);
    EXPECT_EQ(logged.header["task_id"], "note_no_save");
    EXPECT_EQ(logged.header["passed"], true);
    EXPECT_EQ(logged.header["mode"], "gui_pra");
    ASSERT_EQ(logged.turns.size(), r.per_turn.size());
    EXPECT_EQ(logged.turns[0]["chosen_index"], r.per_turn[0].chosen_index);
    EXPECT_EQ(logged.turns[0]["screenshot"]["sha256"], content_hash(r.per_turn[0].observation.screenshot));
    EXPECT_EQ(blobs.get(content_hash(r.per_turn[0].observation.screenshot), "image/png"), r.per_turn[0].observation.screenshot);
    const auto replay = render_replay(logged);
    EXPECT_NE(replay.find("note_no_save"), std::string::npos);
    EXPECT_NE(replay.find("complete()"), std::string::npos);

    std::stringstream bad("{\"type\": \"turn\"}\n");
    EXPECT_THROW(read_trajectory(bad), IoError);
}

TEST(Trajectory, SuiteLogsAreByteIdentical)
{
    const auto base = std::filesystem::temp_directory_path() / "guipra_det_test";
    std::filesystem::remove_all(base);
    for (const auto* name : {"a", "b"}) {
        const auto results = run_suite(fixtures(), config(SupervisionMode::gui_pra), scripted_backends, 4);
        write_suite_logs(results, base / name);
    }
    const auto a = slurp_dir(base / "a");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp_dir(base / "b"));
    std::filesystem::remove_all(base);
}
