// SPDX-License-Identifier: Apache-2.0

#include "guipra/env_sim.hpp"
#include "guipra/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace guipra;
using namespace guipra::env;
using nlohmann::json;

namespace {

json tiny_doc()
{
    return json::parse(R"({
      "id": "tiny", "goal": "Reach B and say hi.", "difficulty": "easy", "step_budget": 4, "initial": "a",
      "screens": [
        {"id": "a", "render_seed": 1, "elements": [
          {"id": "btn_go", "role": "button", "label": "Go", "bbox": [0.1, 0.1, 0.5, 0.2]},
          {"id": "btn_top", "role": "button", "label": "Top", "bbox": [0.3, 0.15, 0.6, 0.3]}]},
        {"id": "b", "render_seed": 2, "elements": [
          {"id": "input_name", "role": "input", "label": "Name", "bbox": [0.1, 0.1, 0.9, 0.2]}]},
        {"id": "c", "render_seed": 3, "elements": []}
      ],
      "transitions": [
        {"from": "a", "on": {"kind": "click", "target": "btn_go"}, "to": "b"},
        {"from": "b", "on": {"kind": "input_text"}, "to": "c"},
        {"from": "b", "on": {"kind": "input_text", "target": "input_name", "text": "Ada"}, "to": "b"},
        {"from": "b", "on": {"kind": "navigate_back"}, "to": "a"}
      ],
      "goal_predicate": {"all": [{"on_screen": "b"}, {"answered": "hi"}]},
      "optimal": [{"kind": "click", "target": "btn_go"}, {"kind": "answer", "text": "hi"}, {"kind": "complete"}]
    })");
}

Action act(const std::string& text) { return validate_action(text); }

}  // namespace

TEST(Env, ResetGivesInitialScreen)
{
    const auto g = graph_from_json(tiny_doc());
    const auto [state, obs] = reset(g);
    EXPECT_EQ(state.current_screen, "a");
    EXPECT_FALSE(state.terminated);
    EXPECT_EQ(obs.elements.size(), 2u);
    EXPECT_EQ(obs.step_index, 0u);
    const auto raster = decode_png(obs.screenshot);
    EXPECT_EQ(raster.width(), kScreenWidth);
    EXPECT_EQ(raster.height(), kScreenHeight);
}

TEST(Env, OptimalSequencePasses)
{
    const auto g = graph_from_json(tiny_doc());
    auto [s, obs] = reset(g);
    for (const auto& a : g.optimal) s = step(s, g, a).first;
    EXPECT_TRUE(s.terminated);
    EXPECT_EQ(validate(s, g), Verdict::pass);
}

TEST(Env, UnmatchedActionsSelfLoop)
{
    const auto g = graph_from_json(tiny_doc());
    auto s = reset(g).first;
    s = step(s, g, Action::scroll("down")).first;
    EXPECT_EQ(s.current_screen, "a");
    s = step(s, g, Action::click("btn_top")).first;
    EXPECT_EQ(s.current_screen, "a");
    EXPECT_EQ(s.actions_taken.size(), 2u);
}

TEST(Env, MostSpecificTransitionWins)
{
    const auto g = graph_from_json(tiny_doc());
    auto s = step(reset(g).first, g, Action::click("btn_go")).first;
    EXPECT_EQ(step(s, g, Action::input_text("ada", "input_name")).first.current_screen, "b");
    EXPECT_EQ(step(s, g, Action::input_text("Bob", "input_name")).first.current_screen, "c");
    EXPECT_EQ(step(s, g, Action::input_text("  ADA ", "input_name")).first.current_screen, "b");
}

TEST(Env, PointTargetResolvesToTopmostElement)
{
    const auto g = graph_from_json(tiny_doc());
    const auto& a = g.screens.at("a");
    EXPECT_EQ(resolve_target(act(R"({"kind": "click", "target": {"x": 0.2, "y": 0.12}})"), a), "btn_go");
    EXPECT_EQ(resolve_target(act(R"({"kind": "click", "target": {"x": 0.4, "y": 0.18}})"), a), "btn_top");
    EXPECT_FALSE(resolve_target(act(R"({"kind": "click", "target": {"x": 0.9, "y": 0.9}})"), a));
    const auto s = step(reset(g).first, g, act(R"({"kind": "click", "target": {"x": 0.2, "y": 0.12}})")).first;
    EXPECT_EQ(s.current_screen, "b");
}

TEST(Env, CompleteAndBudgetTerminate)
{
    const auto g = graph_from_json(tiny_doc());
    auto s = step(reset(g).first, g, Action::complete()).first;
    EXPECT_TRUE(s.terminated);
    EXPECT_EQ(validate(s, g), Verdict::fail);
    EXPECT_THROW(step(s, g, Action::scroll("up")), AlreadyTerminatedError);

    s = reset(g).first;
    for (int i = 0; i < 3; ++i) s = step(s, g, Action::scroll("up")).first;
    EXPECT_FALSE(s.terminated);
    EXPECT_THROW(validate(s, g), NotTerminatedError);
    s = step(s, g, Action::scroll("up")).first;
    EXPECT_TRUE(s.terminated);
    EXPECT_EQ(s.actions_taken.size(), 4u);
}

TEST(Env, AnswersAreCaseInsensitive)
{
    const auto g = graph_from_json(tiny_doc());
    auto s = step(reset(g).first, g, Action::click("btn_go")).first;
    s = step(s, g, Action::answer("  HI ")).first;
    s = step(s, g, Action::complete()).first;
    EXPECT_EQ(validate(s, g), Verdict::pass);
}

TEST(Env, PerformedUsesScreenAtActionTime)
{
    auto doc = tiny_doc();
    doc["goal_predicate"] = json::parse(R"({"never_performed": {"kind": "click", "target": "btn_go"}})");
    const auto g = graph_from_json(doc);
    auto s = step(reset(g).first, g, act(R"({"kind": "click", "target": {"x": 0.2, "y": 0.12}})")).first;
    s = step(s, g, Action::complete()).first;
    EXPECT_EQ(validate(s, g), Verdict::fail);
}

TEST(Env, InvalidGraphsAreRejected)
{
    auto bad = [](auto mutate) {
        auto doc = tiny_doc();
        mutate(doc);
        return doc;
    };
    EXPECT_THROW(graph_from_json(bad([](json& d) { d["initial"] = "zzz"; })), InvalidGraphError);
    EXPECT_THROW(graph_from_json(bad([](json& d) { d["transitions"][0]["to"] = "zzz"; })), InvalidGraphError);
    EXPECT_THROW(graph_from_json(bad([](json& d) { d["step_budget"] = 0; })), InvalidGraphError);
    EXPECT_THROW(graph_from_json(bad([](json& d) { d["screens"][0]["elements"][1]["id"] = "btn_go"; })),
                 InvalidGraphError);
    EXPECT_THROW(graph_from_json(bad([](json& d) { d["goal_predicate"] = {{"on_screen", "nowhere"}}; })),
                 InvalidGraphError);
}

TEST(Env, RenderingIsDeterministicAndScreenSpecific)
{
    const auto g = graph_from_json(tiny_doc());
    EXPECT_EQ(render_screen(g.screens.at("a")), render_screen(g.screens.at("a")));
    EXPECT_NE(content_hash(render_screen(g.screens.at("a"))), content_hash(render_screen(g.screens.at("b"))));
    EXPECT_NE(content_hash(render_screen(g.screens.at("b"))), content_hash(render_screen(g.screens.at("c"))));
}

TEST(Env, JsonRoundTrip)
{
    for (const auto& doc : testsupport::fixture_documents()) {
        const auto g = graph_from_json(doc);
        const auto again = graph_from_json(graph_to_json(g));
        EXPECT_EQ(graph_to_json(again), graph_to_json(g)) << g.task_id;
        EXPECT_EQ(again.optimal, g.optimal);
    }
}

TEST(Env, SimEnvironmentWrapsPureFunctions)
{
    SimEnvironment sim(graph_from_json(tiny_doc()));
    auto obs = sim.reset();
    EXPECT_EQ(obs, sim.observe());
    obs = sim.step(Action::click("btn_go"));
    EXPECT_EQ(obs.elements.front().element_id, "input_name");
    EXPECT_EQ(obs.step_index, 1u);
    EXPECT_THROW(sim.validate(), NotTerminatedError);
    sim.step(Action::answer("hi"));
    sim.step(Action::complete());
    EXPECT_TRUE(sim.terminated());
    EXPECT_EQ(sim.steps_taken(), 3u);
    EXPECT_EQ(sim.validate(), Verdict::pass);
}

TEST(Env, StubScreensCoverEveryScreen)
{
    const auto g = graph_from_json(tiny_doc());
    const auto screens = stub_screens(g);
    EXPECT_EQ(screens.size(), 3u);
    const perception::StubToolServer stub(screens);
    const auto out = stub.invoke({"omni_parser", render_screen(g.screens.at("a")), std::nullopt});
    EXPECT_NE(out.structured_text.find("button 'Go'"), std::string::npos);
}

// --- shipped fixtures against the independent interpreter -------------------

TEST(Fixtures, OptimalSequencesPassAndAreShortest)
{
    const auto docs = testsupport::fixture_documents();
    ASSERT_EQ(docs.size(), 10u);
    for (const auto& doc : docs) {
        const testsupport::GraphOracle oracle(doc);
        const auto g = graph_from_json(doc);
        std::vector<json> optimal;
        for (const auto& a : doc.at("optimal")) optimal.push_back(a);
        EXPECT_TRUE(oracle.run(optimal).passed) << g.task_id;

        auto s = reset(g).first;
        for (const auto& a : g.optimal) s = step(s, g, a).first;
        ASSERT_TRUE(s.terminated) << g.task_id;
        EXPECT_EQ(validate(s, g), Verdict::pass) << g.task_id;

        const auto shortest = oracle.shortest_pass();
        ASSERT_TRUE(shortest) << g.task_id;
        EXPECT_EQ(*shortest, optimal.size()) << g.task_id;
    }
}

TEST(Fixtures, RandomWalksAgreeWithOracle)
{
    const auto docs = testsupport::fixture_documents();
    testsupport::Gen gen(99);
    std::size_t walks = 0;
    for (const auto& doc : docs) {
        const testsupport::GraphOracle oracle(doc);
        const auto g = graph_from_json(doc);
        for (int w = 0; w < 150; ++w, ++walks) {
            std::vector<json> seq;
            auto s = reset(g).first;
            std::string screen = g.initial;
            while (!s.terminated) {
                const auto options = oracle.alphabet(screen);
                // Bias away from complete so walks go deep.
                json a = gen.pick(options);
                if (a["kind"] == "complete" && gen.coin(0.7)) a = options.front();
                seq.push_back(a);
                s = step(s, g, action_from_json(a)).first;
                screen = s.current_screen;
                ASSERT_LE(s.actions_taken.size(), static_cast<std::size_t>(g.step_budget));
                ASSERT_EQ(screen, oracle.run(seq).screen) << g.task_id;
            }
            const auto o = oracle.run(seq);
            ASSERT_EQ(validate(s, g) == Verdict::pass, o.passed) << g.task_id << " " << json(seq).dump();
        }
    }
    EXPECT_GE(walks, 1000u);
}

TEST(Fixtures, ReplayIsDeterministic)
{
    for (const auto& doc : testsupport::fixture_documents()) {
        const auto g = graph_from_json(doc);
        auto run_once = [&] {
            std::vector<std::string> hashes;
            auto [s, obs] = reset(g);
            hashes.push_back(content_hash(obs.screenshot));
            for (const auto& a : g.optimal) {
                auto next = step(s, g, a);
                s = next.first;
                hashes.push_back(content_hash(next.second.screenshot));
            }
            return hashes;
        };
        EXPECT_EQ(run_once(), run_once()) << g.task_id;
    }
}
