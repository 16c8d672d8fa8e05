#pragma once

#include "agentsoc/backend.hpp"
#include "agentsoc/move_parser.hpp"
#include "agentsoc/prompt.hpp"
#include "agentsoc/world.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace agentsoc {

struct AgentStepRecord {
    AgentId agent = 0;
    std::string name;
    Position before;
    std::string message;
    Inbox inbox;  // delivered in this step's delivery phase
    std::string memory;
    std::string move_raw;
    MoveCommand move_parsed = MoveCommand::Stay;
    bool parse_ok = false;
    Position after;

    friend bool operator==(const AgentStepRecord&, const AgentStepRecord&) = default;
};

struct StepRecord {
    int step = 1;
    std::vector<AgentStepRecord> agents;  // indexed by agent id

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct Transcript {
    WorldConfig config;
    std::string backend_descriptor;
    std::string template_digest;
    std::vector<StepRecord> records;

    std::uint64_t rng_seed() const noexcept { return config.rng_seed; }
};

struct StepOptions {
    GenerationParams params;
    int max_in_flight = 1;  // concurrent backend calls within one phase
};

// Runs fn(i) for i in [0, n) on up to `workers` threads. Rethrows the first
// exception after all workers finish. Results must be written to per-index slots.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const auto threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

// Messages generated this step by agents within range of `self`, ascending sender id.
inline Inbox deliver(const std::vector<AgentState>& agents, const std::vector<std::string>& messages,
                     AgentId self, int range, int side) {
    Inbox inbox;
    for (AgentId j : neighbors_within(positions_of(agents), self, range, side))
        inbox.push_back({agents[static_cast<std::size_t>(j)].name, messages[static_cast<std::size_t>(j)]});
    return inbox;
}

struct StepResult {
    std::vector<AgentState> states;
    StepRecord record;
};

// One synchronous step: message, delivery, memory, move generation, parsing, and
// simultaneous movement. Each phase reads a snapshot and writes only at its barrier.
inline StepResult run_step(const std::vector<AgentState>& states, int step_index,
                           const LlmBackend& backend, const PromptTemplates& templates,
                           const WorldConfig& config, const StepOptions& opts = {}) {
    const std::size_t n = states.size();
    const int workers = opts.max_in_flight;

    // (1) messages, from memory and the inbox delivered last step
    std::vector<std::string> messages(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& a = states[i];
        messages[i] = backend.generate({a.name, step_index, Phase::Message},
                                       render(templates.message, a, a.inbox), opts.params);
    });

    // (2) delivery
    std::vector<Inbox> inboxes(n);
    for (std::size_t i = 0; i < n; ++i)
        inboxes[i] = deliver(states, messages, static_cast<AgentId>(i), config.message_range,
                             config.side_length);

    // (3) memory, from old memory and this step's inbox
    std::vector<std::string> memories(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& a = states[i];
        memories[i] = backend.generate({a.name, step_index, Phase::Memory},
                                       render(templates.memory, a, inboxes[i]), opts.params);
    });

    std::vector<AgentState> next = states;
    for (std::size_t i = 0; i < n; ++i) {
        next[i].memory = memories[i];
        next[i].inbox = inboxes[i];
    }

    // (4) move text, from the updated memory
    std::vector<std::string> moves(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& a = next[i];
        moves[i] = backend.generate({a.name, step_index, Phase::Move},
                                    render(templates.move, a, a.inbox), opts.params);
    });

    // (5) parse, (6) move everyone at once
    StepRecord record;
    record.step = step_index;
    record.agents.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto parsed = parse_move(moves[i]);
        auto& r = record.agents[i];
        r.agent = states[i].id;
        r.name = states[i].name;
        r.before = states[i].position;
        r.message = messages[i];
        r.inbox = inboxes[i];
        r.memory = memories[i];
        r.move_raw = moves[i];
        r.move_parsed = parsed.command;
        r.parse_ok = parsed.ok;
        r.after = apply_move(states[i].position, parsed.command, config.side_length);
        next[i].position = r.after;
    }
    return {std::move(next), std::move(record)};
}

using StepSink = std::function<void(const StepRecord&)>;

// Runs config.num_steps steps from init_world(config). `sink` sees each record as
// soon as it is produced; if a step throws, the records already sunk stand as a
// valid prefix and the exception propagates.
inline Transcript run_simulation(const WorldConfig& config, const LlmBackend& backend,
                                 const PromptTemplates& templates, const StepOptions& opts = {},
                                 const StepSink& sink = {}) {
    config.validate();
    Transcript t;
    t.config = config;
    t.backend_descriptor = backend.descriptor();
    t.template_digest = templates.digest();
    t.records.reserve(static_cast<std::size_t>(config.num_steps));
    auto states = init_world(config);
    for (int step = 1; step <= config.num_steps; ++step) {
        auto result = run_step(states, step, backend, templates, config, opts);
        states = std::move(result.states);
        if (sink) sink(result.record);
        t.records.push_back(std::move(result.record));
    }
    return t;
}

} // namespace agentsoc
