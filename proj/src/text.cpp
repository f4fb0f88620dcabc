// SPDX-License-Identifier: Apache-2.0

#include "guipra/text.hpp"

#include <cctype>

namespace guipra::text {

std::string_view trim(std::string_view s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string normalize_space(std::string_view s)
{
    std::string out;
    bool pending = false;
    for (char c : trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending = true;
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

namespace {

// End offset (one past the closing brace) of the object opening at `start`.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t start)
{
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::nullopt;
}

}  // namespace

std::optional<nlohmann::json> first_json_object(std::string_view s)
{
    for (auto start = s.find('{'); start != std::string_view::npos; start = s.find('{', start + 1)) {
        const auto end = balanced_end(s, start);
        if (!end) continue;
        auto parsed = nlohmann::json::parse(s.substr(start, *end - start), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    return std::nullopt;
}

}  // namespace guipra::text
