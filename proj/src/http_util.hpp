// SPDX-License-Identifier: Apache-2.0
//
// Internal helpers around cpp-httplib. Not part of the installed surface.

#pragma once

#include <httplib.h>

#include <chrono>
#include <memory>
#include <string>

namespace guipra::http {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // may be empty
};

// Throws ConfigError for anything that is not http(s)://host[:port][/path].
SplitUrl split_url(const std::string& url);

std::unique_ptr<httplib::Client> make_client(const std::string& origin, std::chrono::seconds timeout);

}  // namespace guipra::http
