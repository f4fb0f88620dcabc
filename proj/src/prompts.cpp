// SPDX-License-Identifier: Apache-2.0

#include "guipra/prompts.hpp"

#include "guipra/prompt_assets.hpp"

#include <algorithm>
#include <cctype>

namespace guipra::prompts {

namespace {

struct Entry {
    Template id;
    std::string_view name;
    std::string_view text;
};

const std::vector<Entry>& registry()
{
    static const std::vector<Entry> entries{
        {Template::memory_stage1_system, "memory_stage1_system", assets::memory_stage1_system},
        {Template::memory_stage1_user, "memory_stage1_user", assets::memory_stage1_user},
        {Template::memory_stage2_system, "memory_stage2_system", assets::memory_stage2_system},
        {Template::memory_stage2_user, "memory_stage2_user", assets::memory_stage2_user},
        {Template::routing_system, "routing_system", assets::routing_system},
        {Template::routing_user, "routing_user", assets::routing_user},
        {Template::bon_gui_pra_system, "bon_gui_pra_system", assets::bon_gui_pra_system},
        {Template::bon_gui_pra_user, "bon_gui_pra_user", assets::bon_gui_pra_user},
        {Template::bon_prm_system, "bon_prm_system", assets::bon_prm_system},
        {Template::bon_prm_user, "bon_prm_user", assets::bon_prm_user},
        {Template::agent_system, "agent_system", assets::agent_system},
        {Template::agent_user, "agent_user", assets::agent_user},
    };
    return entries;
}

const Entry& lookup(Template t)
{
    const auto& entries = registry();
    return *std::find_if(entries.begin(), entries.end(), [t](const Entry& e) { return e.id == t; });
}

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// Length of an identifier-shaped placeholder starting at tmpl[pos] == '{',
// or 0 when the brace does not open one.
std::size_t placeholder_length(std::string_view tmpl, std::size_t pos)
{
    std::size_t end = pos + 1;
    while (end < tmpl.size() && is_ident_char(tmpl[end])) ++end;
    if (end == pos + 1 || end >= tmpl.size() || tmpl[end] != '}') return 0;
    return end - pos + 1;
}

}  // namespace

std::string_view text(Template t) { return lookup(t).text; }

std::string_view asset_name(Template t) { return lookup(t).name; }

const std::vector<Template>& all_templates()
{
    static const std::vector<Template> ids = [] {
        std::vector<Template> out;
        for (const auto& e : registry()) out.push_back(e.id);
        return out;
    }();
    return ids;
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            if (const auto len = placeholder_length(tmpl, i); len != 0) {
                const auto name = std::string(tmpl.substr(i + 1, len - 2));
                if (const auto it = values.find(name); it != values.end()) {
                    out += it->second;
                    i += len;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::vector<std::string> placeholders(std::string_view tmpl)
{
    std::vector<std::string> names;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] != '{') continue;
        if (const auto len = placeholder_length(tmpl, i); len != 0) {
            auto name = std::string(tmpl.substr(i + 1, len - 2));
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
        }
    }
    return names;
}

}  // namespace guipra::prompts
