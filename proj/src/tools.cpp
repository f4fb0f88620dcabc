// SPDX-License-Identifier: Apache-2.0

#include "guipra/perception.hpp"

#include "guipra/text.hpp"
#include "http_util.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <thread>

namespace guipra::perception {

using nlohmann::json;

namespace {

json image_to_json(const Image& image)
{
    return {{"data", base64_encode(image.bytes)}, {"media_type", image.media_type}};
}

Image image_from_json(const json& j)
{
    return Image{base64_decode(j.at("data").get<std::string>()), j.value("media_type", std::string("image/png"))};
}

std::string two_decimals(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string lower(std::string_view s)
{
    std::string out;
    for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

constexpr std::array<Rgb, 6> kMarkPalette{{
    {230, 25, 75}, {60, 180, 75}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180}, {70, 240, 240},
}};

}  // namespace

json request_to_json(const ToolRequest& request)
{
    json j{{"tool", request.tool}, {"image", image_to_json(request.image)}};
    j["param"] = request.param ? json(*request.param) : json(nullptr);
    return j;
}

ToolRequest request_from_json(const json& j)
{
    ToolRequest r;
    r.tool = j.at("tool").get<std::string>();
    r.image = image_from_json(j.at("image"));
    if (const auto p = j.find("param"); p != j.end() && p->is_string()) r.param = p->get<std::string>();
    return r;
}

json response_to_json(const ToolResponse& response)
{
    return {{"structured_text", response.structured_text},
            {"annotated_image", response.annotated_image ? image_to_json(*response.annotated_image) : json(nullptr)}};
}

ToolResponse response_from_json(const json& j)
{
    ToolResponse r;
    r.structured_text = j.at("structured_text").get<std::string>();
    if (const auto a = j.find("annotated_image"); a != j.end() && a->is_object()) r.annotated_image = image_from_json(*a);
    return r;
}

RemoteToolClient::RemoteToolClient(std::string endpoint, std::chrono::seconds timeout, int retries)
    : endpoint_(std::move(endpoint)), timeout_(timeout), retries_(retries)
{
    auto url = http::split_url(endpoint_);
    origin_ = std::move(url.origin);
    path_ = url.path.empty() ? "/tool" : std::move(url.path);
}

ToolResponse RemoteToolClient::invoke(const ToolRequest& request) const
{
    const auto payload = request_to_json(request).dump();
    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        auto client = http::make_client(origin_, timeout_);
        auto res = client->Post(path_, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw ToolUnreachableError("tool server rejected request: HTTP " + std::to_string(res->status));
        }
        auto body = json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("structured_text")) {
            throw ToolUnreachableError("tool server returned a malformed body");
        }
        return response_from_json(body);
    }
    throw ToolUnreachableError("tool server " + endpoint_ + " unreachable: " + last_error);
}

std::string render_inventory(const std::vector<UiElement>& elements)
{
    std::string out;
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& e = elements[i];
        if (i != 0) out += '\n';
        out += "[" + std::to_string(i) + "] " + std::string(to_string(e.role)) + " '" + e.label + "' @ (" +
               two_decimals(e.bbox.left) + ", " + two_decimals(e.bbox.top) + ", " + two_decimals(e.bbox.right) + ", " +
               two_decimals(e.bbox.bottom) + ")";
    }
    return out;
}

std::optional<NormPoint> ground_description(const std::vector<UiElement>& elements, std::string_view description)
{
    const auto open = description.find('\'');
    const auto close = description.rfind('\'');
    std::string label;
    std::string role_word;
    if (open != std::string_view::npos && close > open) {
        label = lower(text::trim(description.substr(open + 1, close - open - 1)));
        role_word = lower(text::trim(description.substr(0, open)));
    } else {
        label = lower(text::trim(description));
    }
    if (label.empty()) return std::nullopt;

    const UiElement* best = nullptr;
    for (const auto& e : elements) {
        if (lower(e.label) != label) continue;
        const bool role_match = !role_word.empty() && lower(to_string(e.role)) == role_word;
        if (best == nullptr || (role_match && lower(to_string(best->role)) != role_word)) best = &e;
    }
    if (best == nullptr) return std::nullopt;
    return NormPoint{best->bbox.center_x(), best->bbox.center_y()};
}

std::string format_point_report(NormPoint p, std::string_view description)
{
    return "point: (" + two_decimals(p.x) + ", " + two_decimals(p.y) + ") for '" + std::string(description) + "'";
}

std::optional<NormPoint> parse_point_report(std::string_view text)
{
    double x = 0;
    double y = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "point: (%lf, %lf)", &x, &y) != 2) return std::nullopt;
    if (x < 0 || x > 1 || y < 0 || y > 1) return std::nullopt;
    return NormPoint{x, y};
}

StubToolServer::StubToolServer(std::vector<StubScreen> screens)
{
    for (auto& screen : screens) {
        auto hash = content_hash(screen.screenshot);
        screens_.try_emplace(std::move(hash), std::move(screen));
    }
}

ToolResponse StubToolServer::invoke(const ToolRequest& request) const
{
    const auto it = screens_.find(content_hash(request.image));
    const std::vector<UiElement> none;
    const auto& elements = it == screens_.end() ? none : it->second.elements;

    if (request.tool == "omni_parser") {
        if (elements.empty()) return {"no elements detected", request.image};
        return {render_inventory(elements), overlay_marks(request.image, elements)};
    }
    if (request.tool == "point") {
        const auto description = request.param.value_or("");
        if (const auto p = ground_description(elements, description)) {
            return {format_point_report(*p, description), std::nullopt};
        }
        return {"not found: '" + description + "'", std::nullopt};
    }
    throw ToolUnreachableError("stub tool server has no tool named '" + request.tool + "'");
}

struct ToolHttpServer::Impl {
    const ToolClient& tools;
    httplib::Server server;
    std::thread thread;

    explicit Impl(const ToolClient& t) : tools(t)
    {
        server.Post("/tool", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object()) {
                res.status = 400;
                res.set_content(R"({"error":"malformed request"})", "application/json");
                return;
            }
            try {
                const auto response = tools.invoke(request_from_json(body));
                res.set_content(response_to_json(response).dump(), "application/json");
            } catch (const json::exception& e) {
                res.status = 400;
                res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            } catch (const Error& e) {
                res.status = 502;
                res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            }
        });
    }
};

ToolHttpServer::ToolHttpServer(const ToolClient& tools) : impl_(std::make_unique<Impl>(tools)) {}

ToolHttpServer::~ToolHttpServer() { stop(); }

int ToolHttpServer::start(const std::string& host, int port)
{
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw IoError("cannot bind tool server to " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ToolHttpServer::run_blocking(const std::string& host, int port)
{
    if (!impl_->server.listen(host, port)) {
        throw IoError("cannot serve tools on " + host + ":" + std::to_string(port));
    }
}

void ToolHttpServer::stop()
{
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

Image overlay_point(const Image& image, double x, double y)
{
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
        throw CoordinateRangeError("point (" + std::to_string(x) + ", " + std::to_string(y) + ") outside [0,1]");
    }
    auto raster = decode_png(image);
    const double cx = x * raster.width();
    const double cy = y * raster.height();
    const double outer = std::max(6.0, std::min(raster.width(), raster.height()) / 24.0);
    const double inner = outer * 0.382;

    std::array<std::pair<double, double>, 10> star{};
    for (int i = 0; i < 10; ++i) {
        const double r = (i % 2 == 0) ? outer : inner;
        const double a = -M_PI / 2 + i * M_PI / 5;
        star[static_cast<std::size_t>(i)] = {cx + r * std::cos(a), cy + r * std::sin(a)};
    }
    auto inside = [&star](double px, double py) {
        bool in = false;
        for (std::size_t i = 0, j = star.size() - 1; i < star.size(); j = i++) {
            const auto [xi, yi] = star[i];
            const auto [xj, yj] = star[j];
            if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) in = !in;
        }
        return in;
    };
    const int x0 = static_cast<int>(std::floor(cx - outer));
    const int x1 = static_cast<int>(std::ceil(cx + outer));
    const int y0 = static_cast<int>(std::floor(cy - outer));
    const int y1 = static_cast<int>(std::ceil(cy + outer));
    for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
            if (inside(px + 0.5, py + 0.5)) raster.set(px, py, {255, 0, 0});
        }
    }
    return encode_png(raster);
}

Image overlay_marks(const Image& image, const std::vector<UiElement>& elements)
{
    auto raster = decode_png(image);
    const int w = raster.width();
    const int h = raster.height();
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& b = elements[i].bbox;
        const auto color = kMarkPalette[i % kMarkPalette.size()];
        const int x0 = static_cast<int>(std::floor(b.left * w));
        const int y0 = static_cast<int>(std::floor(b.top * h));
        const int x1 = static_cast<int>(std::ceil(b.right * w));
        const int y1 = static_cast<int>(std::ceil(b.bottom * h));
        raster.stroke_rect(x0, y0, x1, y1, color, 2);
        // Index tag: i+1 small squares along the top edge.
        for (std::size_t k = 0; k <= i && k < 8; ++k) {
            const int tx = x0 + 3 + static_cast<int>(k) * 5;
            raster.fill_rect(tx, y0 + 3, tx + 3, y0 + 6, color);
        }
    }
    return encode_png(raster);
}

}  // namespace guipra::perception
