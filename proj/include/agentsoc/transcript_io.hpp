#pragma once

#include "agentsoc/errors.hpp"
#include "agentsoc/step.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace agentsoc {

// One line per (step, agent). Field order is part of the format.
inline std::string transcript_line(int step, const AgentStepRecord& a) {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["agent"] = a.agent;
    j["name"] = a.name;
    j["x_before"] = a.before.x;
    j["y_before"] = a.before.y;
    j["message"] = a.message;
    auto inbox = nlohmann::ordered_json::array();
    for (const auto& e : a.inbox) inbox.push_back(nlohmann::ordered_json{{"from", e.sender}, {"text", e.body}});
    j["inbox"] = std::move(inbox);
    j["memory"] = a.memory;
    j["move_raw"] = a.move_raw;
    j["move_parsed"] = std::string(to_string(a.move_parsed));
    j["parse_ok"] = a.parse_ok;
    j["x_after"] = a.after.x;
    j["y_after"] = a.after.y;
    return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

inline void write_step(std::ostream& out, const StepRecord& rec) {
    for (const auto& a : rec.agents) out << transcript_line(rec.step, a) << '\n';
}

inline void write_transcript(std::ostream& out, const Transcript& t) {
    for (const auto& rec : t.records) write_step(out, rec);
}

// Appends each step as it is produced and flushes, so an interrupted run leaves a
// readable prefix.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::filesystem::path& path)
        : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw ConfigError("cannot create transcript: " + path.string());
    }

    void operator()(const StepRecord& rec) {
        write_step(out_, rec);
        out_.flush();
    }

private:
    std::ofstream out_;
};

namespace detail {

inline AgentStepRecord parse_transcript_line(const std::string& line, int& step,
                                             const std::string& origin, std::size_t lineno) {
    auto fail = [&](const std::string& why) -> void { throw CorruptTranscript(origin, lineno, why); };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("record is not an object");
    auto need = [&](const char* key, auto check, const char* kind) -> const nlohmann::json& {
        if (!j.contains(key) || !check(j[key])) fail(std::string("field '") + key + "' missing or not " + kind);
        return j[key];
    };
    auto is_int = [](const nlohmann::json& v) { return v.is_number_integer(); };
    auto is_str = [](const nlohmann::json& v) { return v.is_string(); };
    AgentStepRecord a;
    step = need("step", is_int, "an integer").get<int>();
    a.agent = need("agent", is_int, "an integer").get<int>();
    a.name = need("name", is_str, "a string").get<std::string>();
    a.before.x = need("x_before", is_int, "an integer").get<int>();
    a.before.y = need("y_before", is_int, "an integer").get<int>();
    a.message = need("message", is_str, "a string").get<std::string>();
    for (const auto& e : need("inbox", [](const nlohmann::json& v) { return v.is_array(); }, "an array")) {
        if (!e.is_object() || !e.contains("from") || !e.contains("text") || !e["from"].is_string() ||
            !e["text"].is_string())
            fail("inbox entry must be {from, text}");
        a.inbox.push_back({e["from"].get<std::string>(), e["text"].get<std::string>()});
    }
    a.memory = need("memory", is_str, "a string").get<std::string>();
    a.move_raw = need("move_raw", is_str, "a string").get<std::string>();
    const auto parsed = move_from_string(need("move_parsed", is_str, "a string").get<std::string>());
    if (!parsed) fail("unknown move_parsed value");
    a.move_parsed = *parsed;
    a.parse_ok = need("parse_ok", [](const nlohmann::json& v) { return v.is_boolean(); }, "a boolean").get<bool>();
    a.after.x = need("x_after", is_int, "an integer").get<int>();
    a.after.y = need("y_after", is_int, "an integer").get<int>();
    if (j.size() != 13) fail("unexpected extra fields");
    return a;
}

} // namespace detail

// Reads whole steps of `config.num_agents` records each, steps contiguous from 1.
// A transcript shorter than config.num_steps is a valid prefix of an interrupted
// run; anything malformed raises CorruptTranscript naming the line.
inline Transcript read_transcript(std::istream& in, const WorldConfig& config, const std::string& origin) {
    Transcript t;
    t.config = config;
    std::string line;
    std::size_t lineno = 0;
    const auto n = static_cast<std::size_t>(config.num_agents);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        int step = 0;
        auto a = detail::parse_transcript_line(line, step, origin, lineno);
        if (t.records.empty() || t.records.back().agents.size() == n) {
            const int expected = static_cast<int>(t.records.size()) + 1;
            if (step != expected)
                throw CorruptTranscript(origin, lineno, "expected step " + std::to_string(expected) +
                                                            ", got " + std::to_string(step));
            t.records.push_back({step, {}});
        } else if (step != t.records.back().step) {
            throw CorruptTranscript(origin, lineno, "step " + std::to_string(t.records.back().step) +
                                                        " has too few agent records");
        }
        auto& rec = t.records.back();
        if (a.agent != static_cast<AgentId>(rec.agents.size()))
            throw CorruptTranscript(origin, lineno, "expected agent " + std::to_string(rec.agents.size()) +
                                                        ", got " + std::to_string(a.agent));
        rec.agents.push_back(std::move(a));
    }
    if (!t.records.empty() && t.records.back().agents.size() != n)
        throw CorruptTranscript(origin, lineno, "last step is incomplete (truncated transcript)");
    if (t.records.size() > static_cast<std::size_t>(config.num_steps))
        throw CorruptTranscript(origin, lineno, "more steps than num_steps");
    return t;
}

inline Transcript read_transcript(const std::filesystem::path& path, const WorldConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open transcript: " + path.string());
    return read_transcript(in, config, path.string());
}

} // namespace agentsoc
