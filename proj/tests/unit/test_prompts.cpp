// SPDX-License-Identifier: Apache-2.0

#include "guipra/memory.hpp"
#include "guipra/perception.hpp"
#include "guipra/prompts.hpp"
#include "guipra/pylist.hpp"
#include "guipra/scoring.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace guipra;
using prompts::Template;

namespace {

std::string golden(const std::string& name)
{
    auto s = testsupport::read_file(testsupport::source_dir() / "tests" / "golden" / (name + ".txt"));
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

const std::map<std::string, std::string>& fixture_values()
{
    static const std::map<std::string, std::string> values = {
        {"goal", "Open the Display settings."},
        {"history",
         "['Step 1 - thought: Open the settings app.; action: open_app(\"Settings\")', 'Step 2 - thought: Display is "
         "listed.; action: click(row_display)']"},
        {"actions", "['Step 1 - thought: Open the settings app.; action: open_app(\"Settings\")']"},
        {"initial_prompt",
         "Goal: Open the Display settings.\nScreen elements (img_1):\n- [row_display] list_item 'Display'\nRecent "
         "steps:\nNone"},
        {"history_str", "None"},
        {"action", "thought: Display is listed.; action: click(row_display)"},
        {"previous", "None"},
    };
    return values;
}

Transcript two_step_transcript()
{
    return Transcript{Goal("Open the Display settings."),
                      {Step{"Open the settings app.", Action::open_app("Settings"), Observation{{}, {}, 0}},
                       Step{"Display is listed.", Action::click("row_display"), Observation{{}, {}, 1}}}};
}

}  // namespace

class Golden : public ::testing::TestWithParam<Template> {};

TEST_P(Golden, FilledTemplateMatchesTranscription)
{
    const auto t = GetParam();
    auto values = fixture_values();
    values["action_prompt"] = t == Template::bon_gui_pra_user
                                  ? "Open the Display settings.\nRecent steps:\nNone\nUI evidence:\nNone"
                                  : "Open the Display settings.\nAction history:\nNone";
    EXPECT_EQ(prompts::fill(prompts::text(t), values), golden(std::string(prompts::asset_name(t))));
}

INSTANTIATE_TEST_SUITE_P(ShippedTemplates, Golden,
                         ::testing::Values(Template::memory_stage1_system, Template::memory_stage1_user,
                                           Template::memory_stage2_system, Template::memory_stage2_user,
                                           Template::routing_system, Template::routing_user,
                                           Template::bon_gui_pra_system, Template::bon_gui_pra_user,
                                           Template::bon_prm_system, Template::bon_prm_user),
                         [](const auto& info) { return std::string(prompts::asset_name(info.param)); });

TEST(GoldenAssembly, MemoryPromptsMatchGoldens)
{
    const auto t = two_step_transcript();
    EXPECT_EQ(memory::stage1_user_prompt(t), golden("memory_stage1_user"));
    EXPECT_EQ(memory::stage2_user_prompt(std::span<const Step>(t.steps).first(1)), golden("memory_stage2_user"));
}

TEST(GoldenAssembly, RoutingAndScoringPromptsMatchGoldens)
{
    const Observation obs{{}, {UiElement{"row_display", ElementRole::list_item, "Display", BBox{0.1, 0.1, 0.9, 0.2}}}, 0};
    const Goal goal("Open the Display settings.");
    const memory::CompressedHistory empty{};
    EXPECT_EQ(perception::routing_question(goal, obs, empty), fixture_values().at("initial_prompt"));

    scoring::ScoringContext ctx{goal, obs, empty, {}, std::nullopt, {}};
    const Candidate c{"Display is listed.", Action::click("row_display")};
    const auto gui = scoring::build_scoring_prompt(ctx, c, scoring::Mode::gui_pra);
    EXPECT_EQ(gui.system_text, golden("bon_gui_pra_system"));
    EXPECT_EQ(gui.user_text, golden("bon_gui_pra_user"));
    const auto prm = scoring::build_scoring_prompt(ctx, c, scoring::Mode::standard_prm);
    EXPECT_EQ(prm.system_text, golden("bon_prm_system"));
    EXPECT_EQ(prm.user_text, golden("bon_prm_user"));
}

TEST(Templates, PlaceholderSetsAreExact)
{
    using V = std::vector<std::string>;
    EXPECT_EQ(prompts::placeholders(prompts::text(Template::memory_stage1_user)), (V{"goal", "history"}));
    EXPECT_EQ(prompts::placeholders(prompts::text(Template::memory_stage2_user)), (V{"actions"}));
    EXPECT_EQ(prompts::placeholders(prompts::text(Template::routing_user)), (V{"initial_prompt", "history_str"}));
    EXPECT_EQ(prompts::placeholders(prompts::text(Template::bon_gui_pra_user)),
              (V{"action_prompt", "action", "previous"}));
    EXPECT_EQ(prompts::placeholders(prompts::text(Template::bon_prm_user)), (V{"action_prompt", "action"}));
    EXPECT_TRUE(prompts::placeholders(prompts::text(Template::routing_system)).empty());
    EXPECT_TRUE(prompts::placeholders(prompts::text(Template::bon_gui_pra_system)).empty());
}

TEST(Fill, SinglePassLeavesJsonAndUnknownKeysAlone)
{
    EXPECT_EQ(prompts::fill("{a} {\"k\": 1} {b}", {{"a", "{b}"}}), "{b} {\"k\": 1} {b}");
    EXPECT_EQ(prompts::fill("{a}{a}", {{"a", "x"}}), "xx");
}

TEST(Templates, EveryAssetIsNonEmptyAndNamed)
{
    EXPECT_EQ(prompts::all_templates().size(), 12u);
    for (auto t : prompts::all_templates()) {
        EXPECT_FALSE(prompts::text(t).empty()) << prompts::asset_name(t);
        EXPECT_NE(prompts::text(t).back(), '\n') << prompts::asset_name(t);
    }
}

TEST(PythonList, MatchesReprQuoting)
{
    EXPECT_EQ(format_python_list({}), "[]");
    EXPECT_EQ(format_python_list({"a", ""}), "['a', '']");
    EXPECT_EQ(format_python_list({"it's"}), "[\"it's\"]");
    EXPECT_EQ(format_python_list({"it's \"x\""}), "['it\\'s \"x\"']");
    EXPECT_EQ(format_python_list({"a\\b\n"}), "['a\\\\b\\n']");
}

TEST(PythonList, ParsesLooseReplies)
{
    const auto items = parse_python_list("Here you go:\n['', \"Step 2 -B\", 'x\\'y',]\nThanks");
    ASSERT_TRUE(items);
    EXPECT_EQ(*items, (std::vector<std::string>{"", "Step 2 -B", "x'y"}));
    EXPECT_FALSE(parse_python_list("no list here"));
    EXPECT_FALSE(parse_python_list("['unterminated"));
}

TEST(PythonListProperty, FormatThenParseIsIdentity)
{
    testsupport::Gen gen(17);
    for (int i = 0; i < 1500; ++i) {
        std::vector<std::string> items(gen.below(8));
        for (auto& s : items) s = gen.nasty_text(16);
        const auto parsed = parse_python_list(format_python_list(items));
        ASSERT_TRUE(parsed) << format_python_list(items);
        EXPECT_EQ(*parsed, items);
    }
}
