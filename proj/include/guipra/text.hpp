// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace guipra::text {

std::string_view trim(std::string_view s);

// Collapses whitespace runs to one space and trims.
std::string normalize_space(std::string_view s);

// First balanced `{...}` span in `s` that parses as a JSON object. String
// literals are respected when matching braces.
std::optional<nlohmann::json> first_json_object(std::string_view s);

}  // namespace guipra::text
