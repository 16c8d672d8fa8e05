#pragma once

#include "agentsoc/world.hpp"

#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>

namespace agentsoc {

struct ParsedMove {
    MoveCommand command = MoveCommand::Stay;
    bool ok = false;

    friend bool operator==(const ParsedMove&, const ParsedMove&) = default;
};

struct MoveToken {
    std::string_view text;
    MoveCommand command;
};

// Tier 1: the five serialized forms, in tie-break order.
inline constexpr std::array<MoveToken, 5> kLiteralMoveTokens{{
    {"x+1", MoveCommand::XPlus},
    {"x-1", MoveCommand::XMinus},
    {"y+1", MoveCommand::YPlus},
    {"y-1", MoveCommand::YMinus},
    {"stay", MoveCommand::Stay},
}};

// Tier 2: direction words, consulted only when no literal token occurs.
inline constexpr std::array<MoveToken, 10> kSynonymMoveTokens{{
    {"right", MoveCommand::XPlus},
    {"east", MoveCommand::XPlus},
    {"left", MoveCommand::XMinus},
    {"west", MoveCommand::XMinus},
    {"up", MoveCommand::YPlus},
    {"north", MoveCommand::YPlus},
    {"down", MoveCommand::YMinus},
    {"south", MoveCommand::YMinus},
    {"stay still", MoveCommand::Stay},
    {"remain", MoveCommand::Stay},
}};

namespace detail {

inline char lower(char c) noexcept {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

inline bool is_word_char(char c) noexcept {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = lower(c);
    return out;
}

// Position of the first occurrence of `token` in `hay` (already lowercase) that is
// not glued to surrounding word characters, or npos.
inline std::size_t find_token(std::string_view hay, std::string_view token) noexcept {
    std::size_t from = 0;
    while (true) {
        const auto pos = hay.find(token, from);
        if (pos == std::string_view::npos) return pos;
        const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
        const auto end = pos + token.size();
        const bool right_ok = end >= hay.size() || !is_word_char(hay[end]);
        if (left_ok && right_ok) return pos;
        from = pos + 1;
    }
}

template <std::size_t N>
inline std::pair<std::size_t, MoveCommand> earliest(std::string_view hay,
                                                    const std::array<MoveToken, N>& tokens) {
    std::size_t best = std::string_view::npos;
    MoveCommand cmd = MoveCommand::Stay;
    for (const auto& t : tokens) {
        const auto pos = find_token(hay, t.text);
        if (pos < best) {  // strict: earlier table entries win ties
            best = pos;
            cmd = t.command;
        }
    }
    return {best, cmd};
}

} // namespace detail

// Maps free-form move text onto a MoveCommand. Never throws: unrecognized text
// yields {Stay, ok=false}.
inline ParsedMove parse_move(std::string_view text) {
    const auto hay = detail::to_lower(text);
    if (auto [pos, cmd] = detail::earliest(hay, kLiteralMoveTokens); pos != std::string_view::npos)
        return {cmd, true};
    if (auto [pos, cmd] = detail::earliest(hay, kSynonymMoveTokens); pos != std::string_view::npos)
        return {cmd, true};
    return {MoveCommand::Stay, false};
}

// True when `text` names `cmd` by literal form or by any synonym.
inline bool mentions_move(std::string_view text, MoveCommand cmd) {
    const auto hay = detail::to_lower(text);
    for (const auto& t : kLiteralMoveTokens)
        if (t.command == cmd && detail::find_token(hay, t.text) != std::string_view::npos) return true;
    for (const auto& t : kSynonymMoveTokens)
        if (t.command == cmd && detail::find_token(hay, t.text) != std::string_view::npos) return true;
    return false;
}

} // namespace agentsoc
