#pragma once

#include "agentsoc/backend.hpp"
#include "agentsoc/clustering.hpp"
#include "agentsoc/errors.hpp"
#include "agentsoc/step.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace agentsoc {

// ---------------------------------------------------------------------------
// Hashtags

namespace detail {

inline bool is_tag_char(char c) noexcept {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || c == '_' || c == '-' || u >= 0x80;
}

} // namespace detail

// '#'-prefixed tokens, lowercased, first-occurrence order, deduplicated.
inline std::vector<std::string> extract_hashtags(std::string_view text) {
    std::vector<std::string> tags;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '#') continue;
        if (i > 0 && (std::isalnum(static_cast<unsigned char>(text[i - 1])) != 0 || text[i - 1] == '_'))
            continue;
        std::size_t j = i + 1;
        while (j < text.size() && detail::is_tag_char(text[j])) ++j;
        if (j == i + 1) continue;
        std::string tag = "#";
        for (std::size_t k = i + 1; k < j; ++k)
            tag += static_cast<char>(std::tolower(static_cast<unsigned char>(text[k])));
        if (std::find(tags.begin(), tags.end(), tag) == tags.end()) tags.push_back(std::move(tag));
        i = j - 1;
    }
    return tags;
}

struct HashtagStats {
    std::string tag;
    int first_step = 0;
    AgentId first_agent = 0;
    std::vector<bool> presence;  // index = step - 1
    int lifespan = 0;            // longest run of consecutive present steps
};

inline int longest_run(const std::vector<bool>& presence) {
    int best = 0, run = 0;
    for (bool p : presence) {
        run = p ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

// Population-wide presence of every tag. Ordered by tag text.
inline std::map<std::string, HashtagStats> hashtag_stats(const Transcript& t) {
    std::map<std::string, HashtagStats> stats;
    const auto steps = t.records.size();
    for (std::size_t s = 0; s < steps; ++s) {
        const auto& rec = t.records[s];
        for (const auto& a : rec.agents) {
            for (auto& tag : extract_hashtags(a.message)) {
                auto [it, fresh] = stats.try_emplace(tag);
                auto& st = it->second;
                if (fresh) {
                    st.tag = tag;
                    st.first_step = rec.step;
                    st.first_agent = a.agent;
                    st.presence.assign(steps, false);
                }
                st.presence[s] = true;
            }
        }
    }
    for (auto& [tag, st] : stats) st.lifespan = longest_run(st.presence);
    return stats;
}

// Same, restricted to the messages of agents carrying `label` in `timeline`.
inline std::map<std::string, HashtagStats> hashtag_stats_in_cluster(
    const Transcript& t, const std::vector<ClusterAssignment>& timeline, int label) {
    Transcript filtered;
    filtered.config = t.config;
    for (std::size_t s = 0; s < t.records.size(); ++s) {
        StepRecord rec{t.records[s].step, {}};
        for (const auto& a : t.records[s].agents)
            if (s < timeline.size() && timeline[s].labels.at(static_cast<std::size_t>(a.agent)) == label)
                rec.agents.push_back(a);
        filtered.records.push_back(std::move(rec));
    }
    return hashtag_stats(filtered);
}

inline std::vector<int> unique_hashtag_progression(const Transcript& t) {
    std::set<std::string> seen;
    std::vector<int> out;
    out.reserve(t.records.size());
    for (const auto& rec : t.records) {
        for (const auto& a : rec.agents)
            for (auto& tag : extract_hashtags(a.message)) seen.insert(std::move(tag));
        out.push_back(static_cast<int>(seen.size()));
    }
    return out;
}

inline std::map<std::string, int> hashtag_lifespans(const Transcript& t) {
    std::map<std::string, int> out;
    for (const auto& [tag, st] : hashtag_stats(t)) out[tag] = st.lifespan;
    return out;
}

// ---------------------------------------------------------------------------
// Movement

using MoveCounts = std::array<long, 5>;  // indexed like kAllMoves

inline std::size_t move_index(MoveCommand m) noexcept {
    return static_cast<std::size_t>(m);
}

inline MoveCounts move_distribution(const Transcript& t) {
    MoveCounts counts{};
    for (const auto& rec : t.records)
        for (const auto& a : rec.agents) ++counts[move_index(a.move_parsed)];
    return counts;
}

struct StayEvent {
    AgentId agent = 0;
    int step = 0;
    Position position;
    bool in_cluster = false;

    friend bool operator==(const StayEvent&, const StayEvent&) = default;
};

// One event per parsed Stay, ordered by (step, agent).
inline std::vector<StayEvent> stay_events(const Transcript& t,
                                          const std::vector<ClusterAssignment>& timeline) {
    std::vector<StayEvent> out;
    for (std::size_t s = 0; s < t.records.size(); ++s) {
        const auto& rec = t.records[s];
        for (const auto& a : rec.agents) {
            if (a.move_parsed != MoveCommand::Stay) continue;
            const bool clustered = s < timeline.size() && timeline[s].in_cluster(a.agent);
            out.push_back({a.agent, rec.step, a.before, clustered});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Words

// Lowercase runs of ASCII letters.
inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c)) != 0) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::vector<std::string> default_stopwords() {
    return {"a",    "about", "all",   "also", "am",    "an",    "and",   "are",  "as",   "at",
            "be",   "been",  "but",   "by",   "can",   "do",    "for",   "from", "has",  "have",
            "he",   "her",   "here",  "his",  "how",   "i",     "if",    "in",   "into", "is",
            "it",   "its",   "just",  "let",  "me",    "more",  "my",    "no",   "not",  "of",
            "on",   "or",    "our",   "s",    "she",   "so",    "some",  "t",    "that", "the",
            "their", "them", "then",  "there", "these", "they", "this",  "to",   "up",   "us",
            "was",  "we",    "what",  "when", "where", "which", "who",   "will", "with", "would",
            "you",  "your"};
}

// One word per line; blank lines and '#' comments ignored. Entries are lowercased.
inline std::vector<std::string> load_word_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open word list: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        std::string w = line.substr(b, e - b + 1);
        for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(std::move(w));
    }
    return out;
}

struct WordCount {
    std::string word;
    long count = 0;

    friend bool operator==(const WordCount&, const WordCount&) = default;
};

// Top-k words over one agent's messages; ties broken alphabetically.
inline std::vector<WordCount> word_frequencies(const Transcript& t, AgentId agent, int k = 100,
                                               const std::vector<std::string>& stopwords = default_stopwords()) {
    if (k < 1) throw std::invalid_argument("word_frequencies: k must be >= 1");
    const std::set<std::string> stop(stopwords.begin(), stopwords.end());
    std::map<std::string, long> counts;
    for (const auto& rec : t.records)
        for (const auto& a : rec.agents)
            if (a.agent == agent)
                for (auto& w : tokenize_words(a.message))
                    if (!stop.count(w)) ++counts[std::move(w)];
    std::vector<WordCount> out;
    for (auto& [w, c] : counts) out.push_back({w, c});
    std::stable_sort(out.begin(), out.end(),
                     [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
    if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
    return out;
}

// ---------------------------------------------------------------------------
// Hallucinations

enum class JudgeSource { Lexicon, Judge };

constexpr std::string_view to_string(JudgeSource s) noexcept {
    return s == JudgeSource::Lexicon ? "lexicon" : "judge";
}

struct HallucinationEvent {
    int step = 0;
    AgentId agent = 0;
    std::string word;
    JudgeSource source = JudgeSource::Lexicon;

    friend bool operator==(const HallucinationEvent&, const HallucinationEvent&) = default;
};

struct HallucinationReport {
    std::vector<HallucinationEvent> events;
    bool partial = false;
    std::vector<std::pair<int, AgentId>> failed;  // (step, agent) the judge could not classify
};

inline std::vector<std::string> default_environment_words() {
    return {"cave", "hill", "treasure", "trees"};
}

// Whole-word, case-insensitive. Multi-word phrases match as consecutive tokens.
inline bool contains_word(std::string_view text, std::string_view word) {
    const auto hay = tokenize_words(text);
    const auto needle = tokenize_words(word);
    if (needle.empty()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// Judge definition: each hallucination judge yields candidate words per message.
// Every candidate is checked for verbatim presence before it becomes an event.
struct LexiconJudge {
    std::vector<std::string> words = default_environment_words();
};

inline constexpr std::string_view kDefaultJudgePrompt =
    "Nothing exists in the environment these agents live in: it is an empty two-dimensional "
    "field. A hallucination is any word in the message that names a feature or object in the "
    "environment (for example terrain, plants, buildings or items).\n"
    "List every such word that appears in the message below, separated by commas. "
    "If there are none, reply NONE.\n\nMessage:\n";

struct LlmJudge {
    const LlmBackend* backend = nullptr;
    GenerationParams params;
    std::string instruction{kDefaultJudgePrompt};
};

// Comma/newline/semicolon separated list; bullets, quotes and trailing punctuation
// stripped; "none" yields nothing.
inline std::vector<std::string> parse_judge_words(std::string_view reply) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        std::string w;
        for (char c : cur)
            if (std::isalpha(static_cast<unsigned char>(c)) != 0 || c == ' ')
                w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const auto b = w.find_first_not_of(' ');
        if (b != std::string::npos) {
            w = w.substr(b, w.find_last_not_of(' ') - b + 1);
            if (w != "none" && std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
        }
        cur.clear();
    };
    for (char c : reply) {
        if (c == ',' || c == '\n' || c == ';') flush();
        else cur += c;
    }
    flush();
    return out;
}

inline HallucinationReport detect_hallucinations(const Transcript& t, const LexiconJudge& judge) {
    HallucinationReport report;
    for (const auto& rec : t.records)
        for (const auto& a : rec.agents)
            for (const auto& w : judge.words)
                if (contains_word(a.message, w))
                    report.events.push_back({rec.step, a.agent, w, JudgeSource::Lexicon});
    return report;
}

inline HallucinationReport detect_hallucinations(const Transcript& t, const LlmJudge& judge) {
    if (!judge.backend) throw std::invalid_argument("detect_hallucinations: judge has no backend");
    HallucinationReport report;
    for (const auto& rec : t.records) {
        for (const auto& a : rec.agents) {
            std::string reply;
            try {
                reply = judge.backend->generate({"judge", rec.step, Phase::Message},
                                                judge.instruction + a.message, judge.params);
            } catch (const BackendUnavailable&) {
                report.partial = true;
                report.failed.emplace_back(rec.step, a.agent);
                continue;
            } catch (const ProtocolError&) {
                report.partial = true;
                report.failed.emplace_back(rec.step, a.agent);
                continue;
            }
            for (auto& w : parse_judge_words(reply))
                if (contains_word(a.message, w))
                    report.events.push_back({rec.step, a.agent, std::move(w), JudgeSource::Judge});
        }
    }
    return report;
}

} // namespace agentsoc
