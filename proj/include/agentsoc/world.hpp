#pragma once

#include "agentsoc/errors.hpp"

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agentsoc {

struct WorldConfig {
    int side_length = 50;
    int num_agents = 10;
    int message_range = 5;  // Chebyshev cells, inclusive
    int num_steps = 100;
    std::uint64_t rng_seed = 0;

    // Throws ConfigError naming the first violated invariant.
    void validate() const {
        if (side_length < 1) throw ConfigError("world.side_length must be >= 1");
        if (num_agents < 1) throw ConfigError("world.num_agents must be >= 1");
        if (message_range < 0 || message_range > side_length / 2)
            throw ConfigError("world.message_range must be in [0, side_length/2], got " +
                              std::to_string(message_range));
        if (num_steps < 1) throw ConfigError("world.num_steps must be >= 1");
    }
};

struct Position {
    int x = 0;
    int y = 0;

    friend bool operator==(const Position&, const Position&) = default;
    friend auto operator<=>(const Position&, const Position&) = default;
};

enum class MoveCommand { XPlus, XMinus, YPlus, YMinus, Stay };

inline constexpr std::array<MoveCommand, 5> kAllMoves{
    MoveCommand::XPlus, MoveCommand::XMinus, MoveCommand::YPlus, MoveCommand::YMinus,
    MoveCommand::Stay};

constexpr std::string_view to_string(MoveCommand cmd) noexcept {
    switch (cmd) {
    case MoveCommand::XPlus: return "x+1";
    case MoveCommand::XMinus: return "x-1";
    case MoveCommand::YPlus: return "y+1";
    case MoveCommand::YMinus: return "y-1";
    case MoveCommand::Stay: return "stay";
    }
    return "stay";
}

inline std::optional<MoveCommand> move_from_string(std::string_view s) noexcept {
    for (auto cmd : kAllMoves)
        if (to_string(cmd) == s) return cmd;
    return std::nullopt;
}

using AgentId = int;

struct InboxEntry {
    std::string sender;
    std::string body;

    friend bool operator==(const InboxEntry&, const InboxEntry&) = default;
};

using Inbox = std::vector<InboxEntry>;

inline constexpr std::string_view kNoMemory = "no memory";

inline std::string agent_name(AgentId id) { return "agent" + std::to_string(id); }

struct AgentState {
    AgentId id = 0;
    std::string name = agent_name(0);
    Position position;
    std::string memory{kNoMemory};
    Inbox inbox;

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

inline int wrap(int v, int side) noexcept {
    int r = v % side;
    return r < 0 ? r + side : r;
}

inline int torus_axis_distance(int a, int b, int side) noexcept {
    int d = std::abs(a - b) % side;
    return std::min(d, side - d);
}

inline int torus_chebyshev(Position a, Position b, int side) noexcept {
    return std::max(torus_axis_distance(a.x, b.x, side), torus_axis_distance(a.y, b.y, side));
}

inline Position apply_move(Position p, MoveCommand cmd, int side) noexcept {
    switch (cmd) {
    case MoveCommand::XPlus: return {wrap(p.x + 1, side), p.y};
    case MoveCommand::XMinus: return {wrap(p.x - 1, side), p.y};
    case MoveCommand::YPlus: return {p.x, wrap(p.y + 1, side)};
    case MoveCommand::YMinus: return {p.x, wrap(p.y - 1, side)};
    case MoveCommand::Stay: return p;
    }
    return p;
}

// Agents j != self_id with torus_chebyshev(pos[self], pos[j]) <= range, ascending.
// `positions` is indexed by agent id.
inline std::vector<AgentId> neighbors_within(const std::vector<Position>& positions,
                                             AgentId self_id, int range, int side) {
    if (self_id < 0 || static_cast<std::size_t>(self_id) >= positions.size())
        throw std::out_of_range("neighbors_within: unknown agent id " + std::to_string(self_id));
    std::vector<AgentId> out;
    const Position me = positions[static_cast<std::size_t>(self_id)];
    for (std::size_t j = 0; j < positions.size(); ++j) {
        if (static_cast<AgentId>(j) == self_id) continue;
        if (torus_chebyshev(me, positions[j], side) <= range) out.push_back(static_cast<AgentId>(j));
    }
    return out;
}

// Unbiased integer in [0, bound) from raw 64-bit draws. Unlike
// std::uniform_int_distribution the sequence is identical on every standard library.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

inline std::vector<AgentState> init_world(const WorldConfig& config, std::mt19937_64& rng) {
    config.validate();
    std::vector<AgentState> agents;
    agents.reserve(static_cast<std::size_t>(config.num_agents));
    const auto side = static_cast<std::uint64_t>(config.side_length);
    for (int id = 0; id < config.num_agents; ++id) {
        AgentState a;
        a.id = id;
        a.name = agent_name(id);
        a.position.x = static_cast<int>(bounded_draw(rng, side));
        a.position.y = static_cast<int>(bounded_draw(rng, side));
        agents.push_back(std::move(a));
    }
    return agents;
}

inline std::vector<AgentState> init_world(const WorldConfig& config) {
    std::mt19937_64 rng(config.rng_seed);
    return init_world(config, rng);
}

inline std::vector<Position> positions_of(const std::vector<AgentState>& agents) {
    std::vector<Position> out;
    out.reserve(agents.size());
    for (const auto& a : agents) out.push_back(a.position);
    return out;
}

} // namespace agentsoc
