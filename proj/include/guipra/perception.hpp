// SPDX-License-Identifier: Apache-2.0
//
// Adaptive UI perception: a K-bounded loop in which the judge picks one of the
// perception tools (global parser, point grounder) or terminates, and the tool
// outputs are aggregated into the evidence block used for scoring.

#pragma once

#include "guipra/error.hpp"
#include "guipra/image.hpp"
#include "guipra/memory.hpp"
#include "guipra/model_gateway.hpp"
#include "guipra/transcript.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace guipra::perception {

enum class ToolName { omni_parser, point, terminate };

std::string_view to_string(ToolName name);
// Accepts the spellings routers use ("Point", "omni_parser", "OmniParser",
// "Terminate", ...). Case and separators are ignored.
std::optional<ToolName> parse_tool_name(std::string_view text);

struct ToolCall {
    ToolName name = ToolName::terminate;
    std::string image_ref = "img_1";
    // Element description for point; final answer for terminate.
    std::optional<std::string> param;
    std::string thought;

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

// Throws InvariantError when point or terminate lack a param.
void check(const ToolCall& call);

// {"name": ..., "arguments": {...}} in the router's own vocabulary.
nlohmann::json call_to_json(const ToolCall& call);

struct ToolOutput {
    ToolCall source;
    std::string structured_text;
    std::optional<Image> annotated_image;
};

struct UIEvidence {
    std::vector<ToolOutput> items;
    std::string final_text;
    std::size_t calls_made = 0;
    bool terminated_explicitly = false;
    // The router's Terminate answer, when it gave one.
    std::optional<std::string> conclusion;
    std::size_t judge_calls = 0;
};

struct PerceptionConfig {
    std::size_t max_iterations = 2;
    bool allow_repeat_tools = false;

    friend bool operator==(const PerceptionConfig&, const PerceptionConfig&) = default;
};

void check(const PerceptionConfig& cfg);

// --- tool wire contract ----------------------------------------------------

struct ToolRequest {
    std::string tool;  // "omni_parser" or "point"
    Image image;
    std::optional<std::string> param;
};

struct ToolResponse {
    std::string structured_text;
    std::optional<Image> annotated_image;
};

nlohmann::json request_to_json(const ToolRequest& request);
ToolRequest request_from_json(const nlohmann::json& j);
nlohmann::json response_to_json(const ToolResponse& response);
ToolResponse response_from_json(const nlohmann::json& j);

class ToolClient {
public:
    virtual ~ToolClient() = default;
    // Must tolerate concurrent calls. Throws ToolUnreachableError.
    virtual ToolResponse invoke(const ToolRequest& request) const = 0;
};

// POSTs the wire contract to `<endpoint>` (e.g. http://127.0.0.1:8765/tool).
class RemoteToolClient final : public ToolClient {
public:
    explicit RemoteToolClient(std::string endpoint, std::chrono::seconds timeout = std::chrono::seconds(60),
                              int retries = 1);
    ToolResponse invoke(const ToolRequest& request) const override;

private:
    std::string endpoint_;
    std::string origin_;
    std::string path_;
    std::chrono::seconds timeout_;
    int retries_;
};

// A screen the stub tools can recognise, keyed by screenshot content hash.
struct StubScreen {
    Image screenshot;
    std::vector<UiElement> elements;
};

// Offline stand-in for the parser and grounding models: answers from the
// declared element table of whichever screen the request image is.
class StubToolServer final : public ToolClient {
public:
    explicit StubToolServer(std::vector<StubScreen> screens);

    ToolResponse invoke(const ToolRequest& request) const override;
    std::size_t screen_count() const { return screens_.size(); }

private:
    std::map<std::string, StubScreen> screens_;
};

// Serves any ToolClient over HTTP (POST /tool) on a background thread.
class ToolHttpServer {
public:
    explicit ToolHttpServer(const ToolClient& tools);
    ~ToolHttpServer();
    ToolHttpServer(const ToolHttpServer&) = delete;
    ToolHttpServer& operator=(const ToolHttpServer&) = delete;

    // Binds and starts serving; port 0 picks a free port. Returns the bound
    // port. Throws IoError when binding fails.
    int start(const std::string& host, int port);
    // Serves on the calling thread until stop() is called from elsewhere.
    void run_blocking(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "[idx] role 'label' @ (l, t, r, b)" per element, two decimals.
std::string render_inventory(const std::vector<UiElement>& elements);
// Bounding-box centre of the element whose label the description quotes, or
// nullopt. "Icon 'Gmail'" matches label "Gmail"; the role word breaks ties.
std::optional<NormPoint> ground_description(const std::vector<UiElement>& elements, std::string_view description);
std::string format_point_report(NormPoint p, std::string_view description);
std::optional<NormPoint> parse_point_report(std::string_view text);

// --- image overlays --------------------------------------------------------

// Copy of `image` with a red five-pointed star centred at (x*width, y*height).
// Throws CoordinateRangeError unless 0 <= x, y <= 1.
Image overlay_point(const Image& image, double x, double y);
// Copy of `image` with a numbered-colour box around every element.
Image overlay_marks(const Image& image, const std::vector<UiElement>& elements);

// --- loop ------------------------------------------------------------------

std::string routing_question(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory);
std::string render_tool_history(const std::vector<ToolOutput>& evidence);

// One routing decision with a single parse retry. Invalid replies end as
// terminate("parse-failure").
ToolCall select_tool(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory,
                     const std::vector<ToolOutput>& evidence_so_far, const gateway::Judge& judge);

// Parses a router reply; nullopt when no valid tool action is present.
std::optional<ToolCall> parse_tool_reply(std::string_view reply);

// Requires call.name != terminate. Throws ToolUnreachableError.
ToolOutput invoke_tool(const ToolCall& call, const Image& screenshot, const ToolClient& client);

// "Evidence {i} ({tool}): {structured_text}" blocks joined by newlines.
std::string aggregate(const std::vector<ToolOutput>& items);

// Errors raised mid-loop carry the evidence gathered so far.
struct PartialEvidence {
    UIEvidence evidence;
};

class PerceptionBackendError : public BackendUnreachableError, public PartialEvidence {
public:
    PerceptionBackendError(const std::string& what, UIEvidence partial)
        : BackendUnreachableError(what), PartialEvidence{std::move(partial)} {}
};

class PerceptionToolError : public ToolUnreachableError, public PartialEvidence {
public:
    PerceptionToolError(const std::string& what, UIEvidence partial)
        : ToolUnreachableError(what), PartialEvidence{std::move(partial)} {}
};

// Makes at most cfg.max_iterations tool invocations and at most
// cfg.max_iterations + 2 judge calls.
UIEvidence run_perception(const Goal& goal, const Observation& prev_obs, const memory::CompressedHistory& memory,
                          const gateway::Judge& judge, const ToolClient& client, const PerceptionConfig& cfg);

}  // namespace guipra::perception
