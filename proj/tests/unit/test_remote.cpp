// SPDX-License-Identifier: Apache-2.0

#include "guipra/error.hpp"
#include "guipra/model_gateway.hpp"
#include "guipra/perception.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace guipra;
using namespace guipra::gateway;
using nlohmann::json;

namespace {

// A chat-completions endpoint whose behaviour each test scripts.
class FakeServer {
public:
    using Handler = std::function<void(const json& body, const httplib::Request&, httplib::Response&)>;

    explicit FakeServer(Handler handler) : handler_(std::move(handler))
    {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            handler_(json::parse(req.body), req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer()
    {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    std::atomic<int> hits{0};

private:
    Handler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

void reply(httplib::Response& res, const std::string& content, const std::string& finish = "stop")
{
    json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", finish}}}}};
    res.set_content(body.dump(), "application/json");
}

ChatRequest sample()
{
    ChatRequest r{"system text", "user text", {Image{"\x89PNG", "image/png"}}, {}, 512};
    r.params.seed = 3407;
    return r;
}

}  // namespace

TEST(Wire, RequestShape)
{
    const auto body = to_wire(sample(), "m1");
    EXPECT_EQ(body["model"], "m1");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][0]["content"], "system text");
    EXPECT_EQ(body["messages"][1]["content"][0]["text"], "user text");
    EXPECT_EQ(body["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64," + base64_encode("\x89PNG"));
    EXPECT_EQ(body["seed"], 3407);
    EXPECT_EQ(body["max_tokens"], 512);
    EXPECT_EQ(body["top_k"], 80);
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.5);
    EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 0.9);
}

TEST(Wire, ReplyForms)
{
    EXPECT_EQ(reply_from_wire(json::parse(R"({"choices": [{"message": {"content": "hi"}}]})")), "hi");
    EXPECT_EQ(reply_from_wire(json::parse(
                  R"({"choices": [{"message": {"content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}]}}]})")),
              "ab");
    EXPECT_THROW(reply_from_wire(json::parse(R"({"choices": []})")), BackendUnreachableError);
    EXPECT_THROW(reply_from_wire(json::parse(R"({"choices": [{"message": {"content": "x"}, "finish_reason": "length"}]})")),
                 ReplyTruncatedError);
}

TEST(Remote, RoundTripWithAuth)
{
    std::string auth;
    FakeServer server([&](const json& body, const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        reply(res, "seed=" + body["seed"].dump());
    });
    RemoteBackend backend({server.endpoint(), "secret", "m", std::chrono::seconds(5), 1});
    EXPECT_EQ(backend.chat(sample()), "seed=3407");
    EXPECT_EQ(auth, "Bearer secret");
}

TEST(Remote, RetriesServerErrorsOnce)
{
    FakeServer server([&](const json&, const httplib::Request&, httplib::Response& res) {
        if (server.hits == 1) {
            res.status = 503;
            return;
        }
        reply(res, "ok");
    });
    RemoteBackend backend({server.endpoint(), "", "", std::chrono::seconds(5), 1});
    EXPECT_EQ(backend.chat(sample()), "ok");
    EXPECT_EQ(server.hits.load(), 2);
}

TEST(Remote, PersistentFailureIsUnreachable)
{
    FakeServer server([](const json&, const httplib::Request&, httplib::Response& res) { res.status = 500; });
    RemoteBackend backend({server.endpoint(), "", "", std::chrono::seconds(5), 1});
    EXPECT_THROW(backend.chat(sample()), BackendUnreachableError);
    EXPECT_EQ(server.hits.load(), 2);
}

TEST(Remote, ClientErrorIsNotRetried)
{
    FakeServer server([](const json&, const httplib::Request&, httplib::Response& res) { res.status = 400; });
    RemoteBackend backend({server.endpoint(), "", "", std::chrono::seconds(5), 3});
    EXPECT_THROW(backend.chat(sample()), BackendUnreachableError);
    EXPECT_EQ(server.hits.load(), 1);
}

TEST(Remote, TruncationSurfaces)
{
    FakeServer server([](const json&, const httplib::Request&, httplib::Response& res) { reply(res, "half", "length"); });
    RemoteBackend backend({server.endpoint(), "", "", std::chrono::seconds(5), 1});
    EXPECT_THROW(backend.chat(sample()), ReplyTruncatedError);
}

TEST(Remote, NothingListening)
{
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    RemoteBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "", "",
                           std::chrono::seconds(2), 0});
    EXPECT_THROW(backend.chat(sample()), BackendUnreachableError);
}

TEST(Remote, ConcurrentCandidateBatch)
{
    FakeServer server([](const json& body, const httplib::Request&, httplib::Response& res) {
        reply(res, "Thought: s" + body["seed"].dump() + "\nAction: {\"kind\": \"complete\"}");
    });
    RemoteBackend backend({server.endpoint(), "", "", std::chrono::seconds(5), 1});
    const auto batch = generate_candidate_batch(backend, sample(), 8, SeedSchedule{});
    ASSERT_EQ(batch.candidates.k(), 8u);
    EXPECT_EQ(batch.candidates[2].thought, "s3407");
    EXPECT_EQ(server.hits.load(), 8);
}

TEST(RemoteTools, HttpRoundTripThroughStubServer)
{
    const Image shot = encode_png(Raster(20, 20, {10, 20, 30}));
    const perception::StubToolServer stub(
        {perception::StubScreen{shot, {UiElement{"btn_ok", ElementRole::button, "OK", {0.1, 0.1, 0.3, 0.2}}}}});
    perception::ToolHttpServer http(stub);
    const int port = http.start("127.0.0.1", 0);
    const perception::RemoteToolClient client("http://127.0.0.1:" + std::to_string(port) + "/tool",
                                              std::chrono::seconds(5));
    const perception::ToolRequest req{"point", shot, "Button 'OK'"};
    const auto remote = client.invoke(req);
    const auto local = stub.invoke(req);
    EXPECT_EQ(remote.structured_text, local.structured_text);
    const auto omni = client.invoke({"omni_parser", shot, std::nullopt});
    ASSERT_TRUE(omni.annotated_image);
    EXPECT_EQ(*omni.annotated_image, *stub.invoke({"omni_parser", shot, std::nullopt}).annotated_image);
    EXPECT_THROW(client.invoke({"crop", shot, std::nullopt}), ToolUnreachableError);
    http.stop();
    EXPECT_THROW(client.invoke(req), ToolUnreachableError);
}
