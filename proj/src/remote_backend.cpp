// SPDX-License-Identifier: Apache-2.0

#include "guipra/model_gateway.hpp"

#include "guipra/error.hpp"
#include "http_util.hpp"

namespace guipra::gateway {

using nlohmann::json;

json to_wire(const ChatRequest& request, const std::string& model)
{
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.user_text}});
    for (const auto& image : request.images) {
        content.push_back({{"type", "image_url"},
                           {"image_url", {{"url", "data:" + image.media_type + ";base64," + base64_encode(image.bytes)}}}});
    }
    json messages = json::array();
    if (!request.system_text.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_text}});
    }
    messages.push_back({{"role", "user"}, {"content", content}});
    json body{{"messages", messages},
              {"temperature", request.params.temperature},
              {"top_p", request.params.top_p},
              {"top_k", request.params.top_k},
              {"seed", request.params.seed},
              {"max_tokens", request.max_output_tokens}};
    if (!model.empty()) body["model"] = model;
    return body;
}

std::string reply_from_wire(const json& body)
{
    const auto choices = body.find("choices");
    if (choices == body.end() || !choices->is_array() || choices->empty()) {
        throw BackendUnreachableError("chat response carries no choices");
    }
    const auto& choice = choices->front();
    if (choice.value("finish_reason", std::string()) == "length") {
        throw ReplyTruncatedError("reply hit the output token cap");
    }
    const auto& message = choice.at("message");
    const auto& content = message.at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return content as a list of text parts.
    std::string out;
    for (const auto& part : content) {
        if (part.value("type", std::string()) == "text") out += part.value("text", std::string());
    }
    return out;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config))
{
    auto url = http::split_url(config_.endpoint);
    scheme_host_port_ = std::move(url.origin);
    path_ = url.path.empty() ? "/v1/chat/completions" : std::move(url.path);
}

std::string RemoteBackend::chat(const ChatRequest& request) const
{
    const auto payload = to_wire(request, config_.model).dump();
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        auto client = http::make_client(scheme_host_port_, config_.timeout);
        auto res = client->Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendUnreachableError("chat endpoint rejected request: HTTP " + std::to_string(res->status) + " " +
                                          res->body);
        }
        auto body = json::parse(res->body, nullptr, false);
        if (body.is_discarded()) {
            throw BackendUnreachableError("chat endpoint returned a non-JSON body");
        }
        return reply_from_wire(body);
    }
    throw BackendUnreachableError("chat endpoint " + config_.endpoint + " unreachable: " + last_error);
}

}  // namespace guipra::gateway
