#pragma once

#include "agentsoc/errors.hpp"
#include "agentsoc/hash.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>

namespace agentsoc {

enum class Phase { Message, Memory, Move, Mbti };

constexpr std::string_view to_string(Phase p) noexcept {
    switch (p) {
    case Phase::Message: return "message";
    case Phase::Memory: return "memory";
    case Phase::Move: return "move";
    case Phase::Mbti: return "mbti";
    }
    return "message";
}

inline std::optional<Phase> phase_from_string(std::string_view s) noexcept {
    for (auto p : {Phase::Message, Phase::Memory, Phase::Move, Phase::Mbti})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

// Sampling parameters sent with every request. Defaults are the values used for
// the original Llama-2-7b-chat runs.
struct GenerationParams {
    double temperature = 0.7;
    int max_tokens = 256;
    double top_p = 0.95;
    int top_k = 40;

    void validate() const {
        if (temperature < 0) throw ConfigError("temperature must be >= 0");
        if (!(top_p > 0 && top_p <= 1)) throw ConfigError("top_p must be in (0, 1]");
        if (top_k < 1) throw ConfigError("top_k must be >= 1");
        if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    }
};

// Who is asking and why. The remote backend ignores it; the scripted backend keys
// its table on it.
struct CallContext {
    std::string agent;
    int step = 0;
    Phase phase = Phase::Message;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    // Must be safe to call concurrently from several threads.
    virtual std::string generate(const CallContext& ctx, std::string_view prompt,
                                 const GenerationParams& params) const = 0;

    // Short human-readable identity recorded in run manifests.
    virtual std::string descriptor() const = 0;
};

struct ScriptKey {
    std::string agent;
    int step = 0;
    Phase phase = Phase::Message;

    friend auto operator<=>(const ScriptKey& a, const ScriptKey& b) {
        return std::tie(a.agent, a.step, a.phase) <=> std::tie(b.agent, b.step, b.phase);
    }
    friend bool operator==(const ScriptKey&, const ScriptKey&) = default;
};

using ScriptTable = std::map<ScriptKey, std::string>;

// Parses line-delimited {agent, step, phase, text} records. Blank lines are skipped.
inline ScriptTable parse_script(std::istream& in, const std::string& origin) {
    ScriptTable table;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& why) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) fail("record is not an object");
        for (const char* field : {"agent", "step", "phase", "text"})
            if (!rec.contains(field)) fail(std::string("missing field '") + field + "'");
        if (!rec["agent"].is_string() || !rec["step"].is_number_integer() ||
            !rec["phase"].is_string() || !rec["text"].is_string())
            fail("field has wrong type");
        auto phase = phase_from_string(rec["phase"].get<std::string>());
        if (!phase) fail("unknown phase '" + rec["phase"].get<std::string>() + "'");
        ScriptKey key{rec["agent"].get<std::string>(), rec["step"].get<int>(), *phase};
        if (!table.emplace(key, rec["text"].get<std::string>()).second)
            fail("duplicate key (" + key.agent + ", " + std::to_string(key.step) + ", " +
                 std::string(to_string(key.phase)) + ")");
    }
    return table;
}

inline ScriptTable load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    return parse_script(in, path);
}

// Deterministic stand-in for the language model. Looks up (agent, step, phase);
// on a miss returns templated text chosen by a hash of (prompt, fallback_seed).
class ScriptedBackend final : public LlmBackend {
public:
    explicit ScriptedBackend(ScriptTable table, std::uint64_t fallback_seed = 0)
        : table_(std::move(table)), seed_(fallback_seed) {}

    std::string generate(const CallContext& ctx, std::string_view prompt,
                         const GenerationParams&) const override {
        if (auto it = table_.find(ScriptKey{ctx.agent, ctx.step, ctx.phase}); it != table_.end())
            return it->second;
        return fallback(ctx.phase, prompt);
    }

    std::string descriptor() const override {
        return "scripted(entries=" + std::to_string(table_.size()) +
               ",fallback_seed=" + std::to_string(seed_) + ")";
    }

    const ScriptTable& table() const noexcept { return table_; }

    std::string fallback(Phase phase, std::string_view prompt) const {
        const std::uint64_t h = fnv1a64_mix(fnv1a64(prompt), seed_);
        auto pick = [h](const auto& options, int salt) -> std::string_view {
            const std::uint64_t k = fnv1a64_mix(h, static_cast<std::uint64_t>(salt));
            return options[k % options.size()];
        };
        switch (phase) {
        case Phase::Message: {
            static constexpr std::array<std::string_view, 6> openers{
                "Hello everyone, I am exploring this field.",
                "Is anyone nearby? I would like to work together.",
                "Greetings! Let us share what we have seen.",
                "I think we should stay close and talk more.",
                "This place is quiet, I wonder what lies ahead.",
                "Let's cooperate and map the area together."};
            static constexpr std::array<std::string_view, 8> extras{
                "", "", "", " #cooperation", " #exploration", " I saw some trees to the north.",
                " There might be a cave over there.", " Maybe a treasure is hidden on the hill."};
            return std::string(pick(openers, 1)) + std::string(pick(extras, 2));
        }
        case Phase::Memory: {
            static constexpr std::array<std::string_view, 4> memories{
                "I am exploring the field and have not met anyone yet.",
                "I exchanged greetings with nearby agents and we agreed to cooperate.",
                "Key points: stay near other agents, share observations, keep exploring.",
                "I moved around the field looking for others to talk to."};
            return std::string(pick(memories, 3));
        }
        case Phase::Move: {
            static constexpr std::array<std::string_view, 5> moves{"x+1", "x-1", "y+1", "y-1",
                                                                    "stay"};
            return "I will choose " + std::string(pick(moves, 4)) + ".";
        }
        case Phase::Mbti: {
            static constexpr std::array<std::string_view, 2> choices{"A", "B"};
            return "My answer is " + std::string(pick(choices, 5)) + ".";
        }
        }
        return {};
    }

private:
    ScriptTable table_;
    std::uint64_t seed_;
};

} // namespace agentsoc
