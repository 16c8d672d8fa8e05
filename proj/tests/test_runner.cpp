#include "test_support.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace agentsoc;
using agentsoc::testing::FunctionBackend;
using agentsoc::testing::TempDir;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.world.num_agents = 4;
    c.world.num_steps = 6;
    c.world.rng_seed = 21;
    c.backend.fallback_seed = 4;
    return c;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
}

std::map<std::string, std::string> without_manifests(std::map<std::string, std::string> files) {
    for (auto it = files.begin(); it != files.end();)
        it = it->first.find("manifest.json") != std::string::npos ? files.erase(it) : std::next(it);
    return files;
}

} // namespace

TEST(Run, WritesExpectedLayout) {
    TempDir tmp;
    const auto out = cmd_run(small_config(), tmp / "run");
    EXPECT_EQ(out.status, RunStatus::Complete);
    for (const char* f : {"config.toml", "manifest.json", "transcript.jsonl", "metrics/clusters.tsv",
                          "metrics/move_distribution.tsv", "metrics/parse_failures.tsv",
                          "metrics/hashtag_progression.tsv", "metrics/hashtags.tsv", "metrics/stay_events.tsv",
                          "metrics/hallucinations.tsv", "metrics/word_frequencies.tsv"})
        EXPECT_TRUE(fs::exists(tmp / "run" / f)) << f;
    EXPECT_FALSE(fs::exists(tmp / "run" / "mbti"));
    const auto m = nlohmann::json::parse(read_file(tmp / "run" / "manifest.json"));
    EXPECT_EQ(m["status"], "complete");
    EXPECT_EQ(m["steps_completed"], 6);
    EXPECT_EQ(m["seed"], 21);
    EXPECT_EQ(m["template_digest"], default_prompt_templates().digest());
    EXPECT_EQ(detail::count_data_lines(tmp / "run" / "metrics" / "clusters.tsv"), 24);
    // config.toml reproduces the run configuration
    EXPECT_EQ(to_toml(load_run_config(tmp / "run" / "config.toml")), to_toml(small_config()));
}

TEST(Run, RefusesToOverwriteATranscript) {
    TempDir tmp;
    cmd_run(small_config(), tmp / "run");
    EXPECT_THROW(cmd_run(small_config(), tmp / "run"), ConfigError);
}

TEST(Run, BadTemplateDirCreatesNothing) {
    TempDir tmp;
    auto c = small_config();
    c.template_dir = (tmp / "missing").string();
    EXPECT_THROW(cmd_run(c, tmp / "run"), ConfigError);
    EXPECT_FALSE(fs::exists(tmp / "run"));
}

TEST(Run, SameSeedIsByteIdentical) {
    TempDir tmp;
    cmd_run(small_config(), tmp / "a");
    cmd_run(small_config(), tmp / "b");
    EXPECT_EQ(without_manifests(snapshot(tmp / "a")), without_manifests(snapshot(tmp / "b")));
}

TEST(Analyze, RegeneratesMetricsByteForByte) {
    TempDir tmp;
    auto c = small_config();
    c.mbti.enabled = true;
    cmd_run(c, tmp / "run");
    const auto before = snapshot(tmp / "run" / "metrics");
    fs::remove_all(tmp / "run" / "metrics");
    EXPECT_EQ(cmd_analyze(tmp / "run"), 1);
    EXPECT_EQ(snapshot(tmp / "run" / "metrics"), before);
    EXPECT_THROW(cmd_analyze(tmp.path()), ConfigError);
}

TEST(Analyze, CorruptTranscriptNamesLine) {
    TempDir tmp;
    cmd_run(small_config(), tmp / "run");
    auto text = read_file(tmp / "run" / "transcript.jsonl");
    write_file(tmp / "run" / "transcript.jsonl", text.substr(0, text.size() - 15));
    try {
        cmd_analyze(tmp / "run");
        FAIL();
    } catch (const CorruptTranscript& e) {
        EXPECT_NE(std::string(e.what()).find("transcript.jsonl:24"), std::string::npos) << e.what();
    }
}

TEST(Run, BackendFailureLeavesValidPrefix) {
    TempDir tmp;
    auto p = prepare_run(small_config());
    p.backend = std::make_shared<FunctionBackend>([](const CallContext& ctx, std::string_view) -> std::string {
        if (ctx.step == 4) throw BackendUnavailable("endpoint vanished");
        return ctx.phase == Phase::Move ? "x+1" : "hello #hi";
    });
    const auto out = run_experiment(p, tmp / "run");
    EXPECT_EQ(out.status, RunStatus::Failed);
    EXPECT_EQ(out.transcript.records.size(), 3u);
    const auto m = nlohmann::json::parse(read_file(tmp / "run" / "manifest.json"));
    EXPECT_EQ(m["status"], "failed");
    EXPECT_EQ(m["steps_completed"], 3);
    EXPECT_NE(m["error"].get<std::string>().find("vanished"), std::string::npos);
    const auto loaded = load_run(tmp / "run");
    EXPECT_EQ(loaded.transcript.records.size(), 3u);
    EXPECT_EQ(cmd_analyze(tmp / "run"), 1);
}

TEST(Mbti, RunWritesCheckpointsAndSummary) {
    TempDir tmp;
    auto c = small_config();
    c.mbti.enabled = true;
    cmd_run(c, tmp / "run");
    for (const char* f : {"mbti/step_0/agent0.json", "mbti/step_0/summary.tsv", "mbti/step_6/agent3.json",
                          "mbti/summary.tsv"})
        EXPECT_TRUE(fs::exists(tmp / "run" / f)) << f;
    const auto s = read_file(tmp / "run" / "mbti" / "summary.tsv");
    EXPECT_EQ(s.substr(0, s.find('\n')), "agent\tstep_0\tstep_6");
    EXPECT_EQ(detail::count_data_lines(tmp / "run" / "mbti" / "summary.tsv"), 4);
    const auto j = nlohmann::json::parse(read_file(tmp / "run" / "mbti" / "step_6" / "agent1.json"));
    EXPECT_EQ(j["type"].get<std::string>().size(), 4u);
    EXPECT_EQ(j["bank_digest"], synthetic_question_bank().digest());
}

TEST(Mbti, CommandAddsCheckpointToExistingRun) {
    TempDir tmp;
    cmd_run(small_config(), tmp / "run");
    const auto res = cmd_mbti(tmp / "run", 3);
    EXPECT_EQ(res.results.size(), 4u);
    EXPECT_TRUE(fs::exists(tmp / "run" / "mbti" / "step_3" / "summary.tsv"));
    EXPECT_THROW(cmd_mbti(tmp / "run", 7), ConfigError);
    // same inputs, same answers
    const auto again = cmd_mbti(tmp / "run", 3);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(again.results[i].type, res.results[i].type);
}

TEST(Sweep, LayoutSeedsAndAggregates) {
    TempDir tmp;
    auto c = small_config();
    c.world.num_steps = 3;
    c.sweep.ranges = {0, 10};
    c.sweep.trials_per_range = 2;
    c.sweep.base_seed = 7;
    c.sweep.jobs = 2;
    const auto out = cmd_sweep(c, tmp / "sweep");
    EXPECT_EQ(out.trials, 4);
    EXPECT_EQ(out.failed, 0);
    for (int r : {0, 10})
        for (int t = 0; t < 2; ++t) {
            const auto dir = trial_dir(tmp / "sweep", r, t);
            ASSERT_TRUE(is_run_dir(dir));
            const auto cfg = load_run_config(dir / "config.toml");
            EXPECT_EQ(cfg.world.message_range, r);
            EXPECT_EQ(cfg.world.rng_seed, 7000u + (r == 10 ? 100u : 0u) + static_cast<unsigned>(t));
        }
    const auto agg = tmp / "sweep" / "aggregate";
    EXPECT_EQ(detail::count_data_lines(agg / "move_distribution.tsv"), 2);
    EXPECT_EQ(detail::count_data_lines(agg / "range_summary.tsv"), 2);
    EXPECT_EQ(detail::count_data_lines(agg / "per_trial.tsv"), 4);
    EXPECT_EQ(detail::count_data_lines(agg / "hashtag_progression.tsv"), 2 * 3);
    EXPECT_EQ(detail::count_data_lines(agg / "failures.tsv"), 0);
    EXPECT_EQ(detail::count_data_lines(agg / "messages.jsonl") + 1, 4 * 3 * 4);

    const auto before = snapshot(agg);
    fs::remove_all(agg);
    EXPECT_EQ(cmd_analyze(tmp / "sweep"), 4);
    EXPECT_EQ(snapshot(agg), before);
    EXPECT_THROW(cmd_sweep(c, tmp / "sweep"), ConfigError);
}

TEST(Sweep, TrialSeedRule) {
    SweepSettings s;
    s.base_seed = 3;
    EXPECT_EQ(s.trial_seed(0, 0), 3000u);
    EXPECT_EQ(s.trial_seed(5, 9), 3509u);
}
