// SPDX-License-Identifier: Apache-2.0
//
// Python list-of-strings literals, the format the memory prompts exchange.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace guipra {

// Same output as Python's repr() of a list of str.
std::string format_python_list(const std::vector<std::string>& items);

// Parses the first list literal in `text` (leading prose or code fences are
// skipped, trailing text is ignored). Only string elements are accepted.
std::optional<std::vector<std::string>> parse_python_list(std::string_view text);

}  // namespace guipra
