#pragma once

#include "agentsoc/errors.hpp"
#include "agentsoc/hash.hpp"
#include "agentsoc/move_parser.hpp"
#include "agentsoc/world.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace agentsoc {

enum class PromptPhase { Message, Memory, Move };

constexpr std::string_view to_string(PromptPhase p) noexcept {
    switch (p) {
    case PromptPhase::Message: return "message";
    case PromptPhase::Memory: return "memory";
    case PromptPhase::Move: return "move";
    }
    return "message";
}

inline constexpr std::array<std::string_view, 6> kPlaceholders{"name",     "x",        "y",
                                                                "memory",   "messages", "commands"};

inline constexpr std::string_view kNoMessages = "No Messages";

namespace default_templates {

inline constexpr std::string_view message = R"(## Current state of yourself
You are {name}, an agent living in a two-dimensional field together with other agents.
Your current position is x={x}, y={y}.

## Instruction
Write a short message that will be sent to the other agents around you.
Reply with the message text only.

## Your own memory
{memory}

## All messages received from your surroundings
{messages}
)";

inline constexpr std::string_view memory = R"(## Current state of yourself
You are {name}, an agent living in a two-dimensional field together with other agents.
Your current position is x={x}, y={y}.

## Instruction
Update your memory: write a summary of your current situation based on your memory
and the messages you received. Reply with the summary only.

## Your own memory
{memory}

## All messages received from your surroundings
{messages}
)";

inline constexpr std::string_view move = R"(## Current state of yourself
You are {name}, an agent living in a two-dimensional field together with other agents.
Your current position is x={x}, y={y}.

## Instruction
Choose your next movement from {commands}.
Reply with exactly one of them.

## Your own memory
{memory}
)";

} // namespace default_templates

struct PromptTemplate {
    PromptPhase phase = PromptPhase::Message;
    std::string body;
};

struct PromptTemplates {
    PromptTemplate message;
    PromptTemplate memory;
    PromptTemplate move;

    // Digest over all three bodies, recorded in run manifests.
    std::string digest() const {
        std::uint64_t h = fnv1a64(message.body);
        h = fnv1a64(memory.body, h);
        h = fnv1a64(move.body, h);
        return hex_digest(h);
    }
};

namespace detail {

struct PlaceholderRef {
    std::size_t begin;  // index of '{'
    std::size_t end;    // one past '}'
    std::string name;
};

// `{identifier}` runs; any other braces are literal text.
inline std::vector<PlaceholderRef> scan_placeholders(std::string_view body) {
    std::vector<PlaceholderRef> refs;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < body.size() &&
               (std::isalnum(static_cast<unsigned char>(body[j])) != 0 || body[j] == '_'))
            ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            refs.push_back({i, j + 1, std::string(body.substr(i + 1, j - i - 1))});
            i = j;
        }
    }
    return refs;
}

inline std::string command_vocabulary() {
    std::string out;
    for (std::size_t i = 0; i < kAllMoves.size(); ++i) {
        if (i) out += ", ";
        out += '"';
        out += to_string(kAllMoves[i]);
        out += '"';
    }
    return out;
}

inline bool is_section_header(std::string_view line) { return line.rfind("## ", 0) == 0; }

inline bool is_instruction_header(std::string_view line) {
    return is_section_header(line) && to_lower(line).find("instruction") != std::string::npos;
}

} // namespace detail

inline std::string render_messages(const Inbox& inbox) {
    if (inbox.empty()) return "[" + std::string(kNoMessages) + "]";
    std::string out = "[\n";
    for (const auto& e : inbox) out += e.sender + ": " + e.body + "\n";
    out += "]";
    return out;
}

// Validates placeholders and, for the move phase, that every command can be named.
inline void validate_template(const PromptTemplate& t, std::string_view origin = {}) {
    const std::string where = origin.empty() ? std::string(to_string(t.phase)) + " template"
                                             : std::string(origin);
    for (const auto& ref : detail::scan_placeholders(t.body)) {
        if (std::find(kPlaceholders.begin(), kPlaceholders.end(), ref.name) == kPlaceholders.end())
            throw TemplateError(where + ": unknown placeholder {" + ref.name + "}");
    }
    if (t.phase == PromptPhase::Move) {
        std::string expanded = t.body;
        if (auto pos = expanded.find("{commands}"); pos != std::string::npos)
            expanded.replace(pos, 10, detail::command_vocabulary());
        for (auto cmd : kAllMoves)
            if (!mentions_move(expanded, cmd))
                throw TemplateError(where + ": move vocabulary does not cover \"" +
                                    std::string(to_string(cmd)) + "\"");
        std::istringstream lines(t.body);
        std::string line;
        int instruction_sections = 0;
        while (std::getline(lines, line))
            if (detail::is_instruction_header(line)) ++instruction_sections;
        if (instruction_sections != 1)
            throw TemplateError(where + ": expected exactly one '## ...Instruction...' section");
    }
}

// Substitutes placeholders. Memory is wrapped in [ ]; the inbox renders as one
// "sender: body" line per entry inside [ ], or [No Messages] when empty.
inline std::string render(const PromptTemplate& t, const AgentState& agent, const Inbox& inbox) {
    std::string out;
    out.reserve(t.body.size() + agent.memory.size() + 64);
    std::size_t cursor = 0;
    for (const auto& ref : detail::scan_placeholders(t.body)) {
        out.append(t.body, cursor, ref.begin - cursor);
        cursor = ref.end;
        if (ref.name == "name") out += agent.name;
        else if (ref.name == "x") out += std::to_string(agent.position.x);
        else if (ref.name == "y") out += std::to_string(agent.position.y);
        else if (ref.name == "memory") out += "[" + agent.memory + "]";
        else if (ref.name == "messages") out += render_messages(inbox);
        else if (ref.name == "commands") out += detail::command_vocabulary();
        else throw TemplateError("unknown placeholder {" + ref.name + "}");
    }
    out.append(t.body, cursor, std::string::npos);
    return out;
}

// Copy of `t` whose instruction section body is replaced by `instruction`.
inline PromptTemplate with_instruction(const PromptTemplate& t, std::string_view instruction) {
    std::istringstream lines(t.body);
    std::string line;
    std::string out;
    bool skipping = false;
    bool replaced = false;
    while (std::getline(lines, line)) {
        if (detail::is_section_header(line)) {
            skipping = false;
            if (!replaced && detail::is_instruction_header(line)) {
                out += line + "\n";
                out += instruction;
                if (!instruction.empty() && instruction.back() != '\n') out += '\n';
                out += '\n';
                skipping = true;
                replaced = true;
                continue;
            }
        }
        if (!skipping) out += line + "\n";
    }
    if (!replaced) throw TemplateError("template has no instruction section");
    return {t.phase, out};
}

inline PromptTemplates default_prompt_templates() {
    PromptTemplates t{{PromptPhase::Message, std::string(default_templates::message)},
                      {PromptPhase::Memory, std::string(default_templates::memory)},
                      {PromptPhase::Move, std::string(default_templates::move)}};
    validate_template(t.message);
    validate_template(t.memory);
    validate_template(t.move);
    return t;
}

// Loads message.txt, memory.txt and move.txt from `dir` and validates them.
inline PromptTemplates load_templates(const std::filesystem::path& dir) {
    auto read = [&](PromptPhase phase) {
        const auto path = dir / (std::string(to_string(phase)) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw TemplateError("missing template file: " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        PromptTemplate t{phase, ss.str()};
        validate_template(t, path.string());
        return t;
    };
    return {read(PromptPhase::Message), read(PromptPhase::Memory), read(PromptPhase::Move)};
}

} // namespace agentsoc
