// SPDX-License-Identifier: Apache-2.0
//
// guipra: run fixture suites under a supervision mode, summarize and replay
// logs, dump the effective configuration, or serve the offline tool stub.

#include "guipra/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace guipra;
using nlohmann::json;

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> overrides;
};

harness::Settings load_settings(const CommonOptions& opts)
{
    harness::Settings settings;
    if (!opts.config_file.empty()) harness::load_config_file(settings, opts.config_file);
    harness::apply_environment(settings);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        harness::apply_setting(settings, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return settings;
}

harness::BackendFactory make_factory(const harness::Settings& s)
{
    std::shared_ptr<const gateway::ModelBackend> agent;
    std::shared_ptr<const gateway::ModelBackend> judge;
    std::shared_ptr<const perception::ToolClient> tools;
    if (!s.endpoints.agent.empty()) {
        agent = std::make_shared<gateway::RemoteBackend>(
            gateway::RemoteConfig{s.endpoints.agent, s.endpoints.api_key, s.endpoints.agent_model});
    }
    const auto judge_endpoint = s.endpoints.judge.empty() ? s.endpoints.agent : s.endpoints.judge;
    if (!judge_endpoint.empty()) {
        const auto model = s.endpoints.judge_model.empty() ? s.endpoints.agent_model : s.endpoints.judge_model;
        judge = std::make_shared<gateway::RemoteBackend>(gateway::RemoteConfig{judge_endpoint, s.endpoints.api_key, model});
    }
    if (!s.endpoints.tools.empty()) tools = std::make_shared<perception::RemoteToolClient>(s.endpoints.tools);
    return [agent, judge, tools](const harness::TaskFixture& fixture) {
        auto b = harness::scripted_backends(fixture);
        if (agent) b.agent = agent;
        if (judge) b.judge = judge;
        if (tools) b.tools = tools;
        return b;
    };
}

void print_table(const std::vector<json>& headers, std::ostream& out)
{
    std::fprintf(stdout, "%-28s %-8s %-13s %-6s %s\n", "task", "level", "mode", "result", "steps");
    for (const auto& h : headers) {
        std::fprintf(stdout, "%-28s %-8s %-13s %-6s %zu/%d%s\n", h.value("task_id", "").c_str(),
                     h.value("difficulty", "").c_str(), h.value("mode", "").c_str(),
                     h.value("passed", false) ? "pass" : "fail", h.value("steps_used", std::size_t{0}),
                     h.value("step_budget", 0), h["error"].is_null() ? "" : "  (error)");
    }
    out.flush();
}

json summarize(const std::vector<json>& headers)
{
    std::map<std::string, std::vector<harness::EpisodeOutcome>> by_mode;
    for (const auto& h : headers) {
        by_mode[h.value("mode", "")].push_back(
            {parse_difficulty(h.value("difficulty", "unrated")), h.value("passed", false)});
    }
    json summary = json::object();
    for (const auto& [mode, outcomes] : by_mode) summary[mode] = harness::metrics_to_json(harness::compute_metrics(outcomes));
    return summary;
}

void print_summary(const json& summary)
{
    for (const auto& [mode, m] : summary.items()) {
        std::printf("%s: SR %.1f%%", mode.c_str(), m["sr"].get<double>());
        for (const auto& [level, c] : m["counts"].items()) {
            std::printf("  %s %zu/%zu (%.1f%%)", level.c_str(), c["passed"].get<std::size_t>(),
                        c["total"].get<std::size_t>(), m["dsr"][level].get<double>());
        }
        std::printf("\n");
    }
}

std::vector<json> read_headers(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<json> headers;
    for (const auto& f : files) headers.push_back(harness::read_trajectory(f).header);
    if (headers.empty()) throw IoError("no trajectory logs under " + dir.string());
    return headers;
}

void write_json(const std::filesystem::path& path, const json& doc)
{
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Inference-time process supervision for GUI agents"};
    app.require_subcommand(1);

    CommonOptions common;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_file, "key = value configuration file");
        cmd->add_option("--set", common.overrides, "Override one setting (key=value)");
    };

    auto* run = app.add_subcommand("run", "Run a fixture suite");
    add_common(run);
    std::string mode;
    std::string tasks_dir = "fixtures/tasks";
    std::string out_dir;
    std::string seeds;
    std::string endpoint;
    std::string judge_endpoint;
    std::string tools_endpoint;
    std::optional<std::size_t> k;
    std::optional<std::size_t> parallel;
    run->add_option("--mode", mode, "none | standard_prm | gui_pra");
    run->add_option("--tasks", tasks_dir, "Fixture directory")->check(CLI::ExistingDirectory);
    run->add_option("--k", k, "Candidates per turn");
    run->add_option("--seeds", seeds, "Comma-separated seed schedule");
    run->add_option("--endpoint", endpoint, "Agent chat-completions URL");
    run->add_option("--judge-endpoint", judge_endpoint, "Judge chat-completions URL (defaults to --endpoint)");
    run->add_option("--tools-endpoint", tools_endpoint, "Tool server URL");
    run->add_option("--out", out_dir, "Log directory")->required();
    run->add_option("--parallel", parallel, "Episodes in flight");

    auto* report = app.add_subcommand("report", "Summarize trajectory logs");
    std::string logs_dir;
    report->add_option("logs", logs_dir, "Log directory")->required()->check(CLI::ExistingDirectory);

    auto* replay = app.add_subcommand("replay", "Render a logged episode turn by turn");
    std::string replay_path;
    replay->add_option("log", replay_path, "Episode .jsonl file")->required()->check(CLI::ExistingFile);

    auto* config = app.add_subcommand("config", "Print the effective configuration");
    add_common(config);

    auto* serve = app.add_subcommand("serve-tools", "Serve the offline parser and grounding stub over HTTP");
    std::string serve_tasks = "fixtures/tasks";
    std::string host = "127.0.0.1";
    int port = 8765;
    serve->add_option("--tasks", serve_tasks, "Fixture directory")->check(CLI::ExistingDirectory);
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto settings = load_settings(common);
            if (!mode.empty()) harness::apply_setting(settings, "mode", mode);
            if (k) settings.run.k = *k;
            if (!seeds.empty()) harness::apply_setting(settings, "seeds", seeds);
            if (!endpoint.empty()) settings.endpoints.agent = endpoint;
            if (!judge_endpoint.empty()) settings.endpoints.judge = judge_endpoint;
            if (!tools_endpoint.empty()) settings.endpoints.tools = tools_endpoint;
            if (parallel) harness::apply_setting(settings, "parallel", std::to_string(*parallel));
            harness::check(settings.run);

            const auto fixtures = harness::load_fixture_dir(tasks_dir);
            const auto results = harness::run_suite(fixtures, settings.run, make_factory(settings), settings.parallel);
            if (results.empty()) throw ConfigError("no tasks selected");
            harness::write_suite_logs(results, out_dir);
            std::vector<json> headers;
            for (const auto& r : results) headers.push_back(harness::episode_header(r));
            print_table(headers, std::cout);
            const auto summary = summarize(headers);
            print_summary(summary);
            write_json(std::filesystem::path(out_dir) / "summary.json", summary);
            write_json(std::filesystem::path(out_dir) / "config.json", harness::effective_config(settings));
        } else if (*report) {
            const auto headers = read_headers(logs_dir);
            print_table(headers, std::cout);
            const auto summary = summarize(headers);
            print_summary(summary);
            write_json(std::filesystem::path(logs_dir) / "summary.json", summary);
        } else if (*replay) {
            std::cout << harness::render_replay(harness::read_trajectory(std::filesystem::path(replay_path)));
        } else if (*config) {
            const auto settings = load_settings(common);
            harness::check(settings.run);
            std::cout << harness::effective_config(settings).dump(2) << '\n';
        } else if (*serve) {
            std::vector<perception::StubScreen> screens;
            for (const auto& f : harness::load_fixture_dir(serve_tasks)) {
                for (auto& s : env::stub_screens(f.graph)) screens.push_back(std::move(s));
            }
            perception::StubToolServer stub(std::move(screens));
            perception::ToolHttpServer server(stub);
            std::cerr << "serving " << stub.screen_count() << " screens on http://" << host << ":" << port << "/tool\n";
            server.run_blocking(host, port);
        }
    } catch (const guipra::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
