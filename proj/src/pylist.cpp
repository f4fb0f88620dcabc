// SPDX-License-Identifier: Apache-2.0

#include "guipra/pylist.hpp"

#include <cstdint>
#include <cstdio>

namespace guipra {

namespace {

std::string repr(const std::string& s)
{
    const bool has_single = s.find('\'') != std::string::npos;
    const bool has_double = s.find('"') != std::string::npos;
    const char q = (has_single && !has_double) ? '"' : '\'';
    std::string out(1, q);
    for (unsigned char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c == static_cast<unsigned char>(q)) {
                out += '\\';
                out += static_cast<char>(c);
            } else if (c < 0x20 || c == 0x7f) {
                char buf[5];
                std::snprintf(buf, sizeof buf, "\\x%02x", c);
                out += buf;
            } else {
                out += static_cast<char>(c);
            }
        }
    }
    out += q;
    return out;
}

void append_utf8(std::string& out, std::uint32_t cp)
{
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    std::optional<std::vector<std::string>> list()
    {
        skip_ws();
        if (!eat('[')) return std::nullopt;
        std::vector<std::string> items;
        skip_ws();
        if (eat(']')) return items;
        while (true) {
            skip_ws();
            if (eat(']')) return items;  // trailing comma
            auto item = string_literal();
            if (!item) return std::nullopt;
            items.push_back(std::move(*item));
            skip_ws();
            if (eat(']')) return items;
            if (!eat(',')) return std::nullopt;
        }
    }

private:
    std::optional<std::string> string_literal()
    {
        if (pos_ >= text_.size()) return std::nullopt;
        const char q = text_[pos_];
        if (q != '\'' && q != '"') return std::nullopt;
        ++pos_;
        std::string out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_++];
            if (c == q) return out;
            if (c == '\n') return std::nullopt;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (pos_ >= text_.size()) return std::nullopt;
            const char e = text_[pos_++];
            switch (e) {
            case '\\': out += '\\'; break;
            case '\'': out += '\''; break;
            case '"': out += '"'; break;
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            case 't': out += '\t'; break;
            case 'x': {
                auto cp = hex(2);
                if (!cp) return std::nullopt;
                append_utf8(out, *cp);
                break;
            }
            case 'u': {
                auto cp = hex(4);
                if (!cp) return std::nullopt;
                append_utf8(out, *cp);
                break;
            }
            default:
                // Python keeps unknown escapes verbatim.
                out += '\\';
                out += e;
            }
        }
        return std::nullopt;
    }

    std::optional<std::uint32_t> hex(int digits)
    {
        if (pos_ + static_cast<std::size_t>(digits) > text_.size()) return std::nullopt;
        std::uint32_t v = 0;
        for (int i = 0; i < digits; ++i) {
            const char c = text_[pos_++];
            v <<= 4;
            if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
            else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
            else return std::nullopt;
        }
        return v;
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
            ++pos_;
        }
    }

    bool eat(char c)
    {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string format_python_list(const std::vector<std::string>& items)
{
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i != 0) out += ", ";
        out += repr(items[i]);
    }
    out += ']';
    return out;
}

std::optional<std::vector<std::string>> parse_python_list(std::string_view text)
{
    for (auto start = text.find('['); start != std::string_view::npos; start = text.find('[', start + 1)) {
        if (auto items = Parser(text.substr(start)).list()) return items;
    }
    return std::nullopt;
}

}  // namespace guipra
