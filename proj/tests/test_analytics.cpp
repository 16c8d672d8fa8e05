#include "test_support.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace agentsoc;
using agentsoc::testing::FunctionBackend;
using agentsoc::testing::static_transcript;

TEST(Hashtags, Extraction) {
    EXPECT_EQ(extract_hashtags("Let's go #Cooperation and #teamwork!"),
              (std::vector<std::string>{"#cooperation", "#teamwork"}));
    EXPECT_EQ(extract_hashtags("#a #A #a"), std::vector<std::string>{"#a"});
    EXPECT_TRUE(extract_hashtags("issue#12 and # alone and ##").empty());
    EXPECT_EQ(extract_hashtags("(#go-team_1)."), std::vector<std::string>{"#go-team_1"});
    EXPECT_EQ(extract_hashtags("#caf\xc3\xa9"), std::vector<std::string>{"#caf\xc3\xa9"});
}

TEST(Hashtags, ProgressionCountsDistinctTagsSoFar) {
    const std::map<int, std::string> msgs{{1, "#a #b"}, {2, "#a"}, {3, "plain"}, {4, "#c"}, {5, "#b #c"}};
    const auto t = static_transcript({{0, 0}}, 5, 5, [&](int s, AgentId) { return msgs.at(s); });
    EXPECT_EQ(unique_hashtag_progression(t), (std::vector<int>{2, 2, 2, 3, 3}));
}

TEST(Hashtags, LifespanIsLongestConsecutiveRun) {
    auto run_for = [](std::vector<int> present, int steps) {
        const auto t = static_transcript({{0, 0}}, steps, 5, [&](int s, AgentId) {
            return std::find(present.begin(), present.end(), s) != present.end() ? "#t" : "";
        });
        return hashtag_lifespans(t).at("#t");
    };
    EXPECT_EQ(run_for({2, 5}, 10), 1);
    EXPECT_EQ(run_for({3, 4, 5, 9, 10}, 10), 3);
    EXPECT_EQ(run_for({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 10), 10);
}

TEST(Hashtags, PresenceIsPopulationWide) {
    // Alternating carriers still form one continuous run.
    const auto t = static_transcript({{0, 0}, {30, 30}}, 6, 5, [](int s, AgentId a) {
        return (s % 2 == static_cast<int>(a)) ? "#relay" : "";
    });
    const auto st = hashtag_stats(t).at("#relay");
    EXPECT_EQ(st.lifespan, 6);
    EXPECT_EQ(st.first_step, 1);
    EXPECT_EQ(st.first_agent, 1);
}

TEST(Hashtags, ClusterRestriction) {
    const auto t = static_transcript({{0, 0}, {1, 1}, {30, 30}}, 3, 2, [](int, AgentId a) {
        return a == 2 ? "#outside" : "#inside";
    });
    const auto tl = cluster_timeline(t);
    const auto in = hashtag_stats_in_cluster(t, tl, tl[0].labels[0]);
    EXPECT_EQ(in.size(), 1u);
    EXPECT_EQ(in.count("#inside"), 1u);
}

TEST(Moves, DistributionAndStayEvents) {
    auto t = static_transcript({{0, 0}, {1, 0}, {30, 30}}, 2, 2, [](int, AgentId) { return ""; });
    t.records[0].agents[0].move_parsed = MoveCommand::XPlus;
    t.records[1].agents[2].move_parsed = MoveCommand::YMinus;
    const auto d = move_distribution(t);
    EXPECT_EQ(d, (MoveCounts{1, 0, 0, 1, 4}));
    const auto stays = stay_events(t, cluster_timeline(t));
    ASSERT_EQ(stays.size(), 4u);
    EXPECT_EQ(stays[0], (StayEvent{1, 1, {1, 0}, true}));
    EXPECT_EQ(stays[1], (StayEvent{2, 1, {30, 30}, false}));
    EXPECT_EQ(stays[2], (StayEvent{0, 2, {0, 0}, true}));
    EXPECT_EQ(stays[3], (StayEvent{1, 2, {1, 0}, true}));
}

TEST(Words, TopWordsWithStopwordsAndAlphabeticalTies) {
    const auto t = static_transcript({{0, 0}, {9, 9}}, 3, 5, [](int s, AgentId a) {
        if (a == 1) return std::string("ignored words here");
        return s == 1 ? std::string("The zebra and the apple") : std::string("Apple, mango! ZEBRA's");
    });
    const auto w = word_frequencies(t, 0, 3);
    EXPECT_EQ(w, (std::vector<WordCount>{{"apple", 3}, {"zebra", 3}, {"mango", 2}}));
    EXPECT_EQ(word_frequencies(t, 0, 100).size(), 3u);
    EXPECT_THROW(word_frequencies(t, 0, 0), std::invalid_argument);
}

TEST(Hallucinations, LexiconWholeWordMatches) {
    const auto t = static_transcript({{0, 0}, {5, 5}}, 2, 5, [](int s, AgentId a) {
        if (a == 0 && s == 1) return std::string("Let's explore the Cave by the trees");
        if (a == 1 && s == 2) return std::string("cavern treasures, caves, hillside");
        return std::string("nothing here");
    });
    const auto r = detect_hallucinations(t, LexiconJudge{});
    EXPECT_FALSE(r.partial);
    EXPECT_EQ(r.events, (std::vector<HallucinationEvent>{{1, 0, "cave", JudgeSource::Lexicon},
                                                         {1, 0, "trees", JudgeSource::Lexicon}}));
}

TEST(Hallucinations, JudgeWordsMustAppearInTheMessage) {
    const auto t = static_transcript({{0, 0}}, 1, 5, [](int, AgentId) {
        return std::string("Meet me at the old Tower near the river");
    });
    FunctionBackend judge([](const CallContext&, std::string_view) {
        return std::string("- tower\n- river\n- castle\n- \"dragon\"");
    });
    const auto r = detect_hallucinations(t, LlmJudge{&judge, {}, std::string(kDefaultJudgePrompt)});
    EXPECT_EQ(r.events, (std::vector<HallucinationEvent>{{1, 0, "tower", JudgeSource::Judge},
                                                         {1, 0, "river", JudgeSource::Judge}}));
}

TEST(Hallucinations, JudgeFailureMarksReportPartial) {
    const auto t = static_transcript({{0, 0}, {1, 1}}, 2, 5, [](int, AgentId) { return std::string("a cave"); });
    FunctionBackend judge([](const CallContext& ctx, std::string_view) -> std::string {
        if (ctx.step == 2) throw BackendUnavailable("judge down");
        return "cave";
    });
    const auto r = detect_hallucinations(t, LlmJudge{&judge, {}, std::string(kDefaultJudgePrompt)});
    EXPECT_TRUE(r.partial);
    EXPECT_EQ(r.events.size(), 2u);
    EXPECT_EQ(r.failed, (std::vector<std::pair<int, AgentId>>{{2, 0}, {2, 1}}));
}

TEST(Hallucinations, JudgeReplyParsing) {
    EXPECT_TRUE(parse_judge_words("NONE").empty());
    EXPECT_EQ(parse_judge_words("Tower, river.; big hill"),
              (std::vector<std::string>{"tower", "river", "big hill"}));
}
