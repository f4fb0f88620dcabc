// SPDX-License-Identifier: Apache-2.0

#include "http_util.hpp"

#include "guipra/error.hpp"

#include <regex>

namespace guipra::http {

SplitUrl split_url(const std::string& url)
{
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) {
        throw ConfigError("malformed endpoint URL '" + url + "'");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string()};
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, std::chrono::seconds timeout)
{
    auto client = std::make_unique<httplib::Client>(origin);
    client->set_connection_timeout(std::chrono::seconds(5));
    client->set_read_timeout(timeout);
    client->set_write_timeout(timeout);
    return client;
}

}  // namespace guipra::http
