// SPDX-License-Identifier: Apache-2.0
//
// Prompt template assets. The text under assets/prompts/ is compiled into the
// library; placeholders are `{name}` and are filled in a single pass.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace guipra::prompts {

enum class Template {
    memory_stage1_system,
    memory_stage1_user,
    memory_stage2_system,
    memory_stage2_user,
    routing_system,
    routing_user,
    bon_gui_pra_system,
    bon_gui_pra_user,
    bon_prm_system,
    bon_prm_user,
    agent_system,
    agent_user,
};

std::string_view text(Template t);
std::string_view asset_name(Template t);
const std::vector<Template>& all_templates();

// Replaces each `{name}` whose name is a key of `values`. Other braces (JSON
// examples in the templates) are copied through untouched, and substituted
// values are never rescanned.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values);

// Placeholder names that occur in `tmpl`, in order of first appearance,
// restricted to identifier-shaped `{...}` groups.
std::vector<std::string> placeholders(std::string_view tmpl);

}  // namespace guipra::prompts
