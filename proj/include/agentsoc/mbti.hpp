#pragma once

#include "agentsoc/backend.hpp"
#include "agentsoc/errors.hpp"
#include "agentsoc/hash.hpp"
#include "agentsoc/prompt.hpp"
#include "agentsoc/step.hpp"
#include "agentsoc/world.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace agentsoc {

enum class MbtiAxis { EI, SN, TF, JP };

inline constexpr std::array<MbtiAxis, 4> kAllAxes{MbtiAxis::EI, MbtiAxis::SN, MbtiAxis::TF,
                                                  MbtiAxis::JP};

constexpr std::string_view to_string(MbtiAxis a) noexcept {
    switch (a) {
    case MbtiAxis::EI: return "EI";
    case MbtiAxis::SN: return "SN";
    case MbtiAxis::TF: return "TF";
    case MbtiAxis::JP: return "JP";
    }
    return "EI";
}

inline std::optional<MbtiAxis> axis_from_string(std::string_view s) noexcept {
    for (auto a : kAllAxes)
        if (to_string(a) == s) return a;
    return std::nullopt;
}

constexpr char first_pole(MbtiAxis a) noexcept { return to_string(a)[0]; }
constexpr char second_pole(MbtiAxis a) noexcept { return to_string(a)[1]; }
// Tie winner: I, N, F, P.
constexpr char introspective_pole(MbtiAxis a) noexcept { return a == MbtiAxis::EI ? 'I' : second_pole(a); }

inline std::size_t axis_index(MbtiAxis a) noexcept { return static_cast<std::size_t>(a); }

struct MbtiQuestion {
    std::string id;
    std::string text_a;
    std::string text_b;
    MbtiAxis axis = MbtiAxis::EI;
    char pole_a = 'E';
    char pole_b = 'I';
};

struct QuestionBank {
    std::vector<MbtiQuestion> questions;

    std::string digest() const {
        std::uint64_t h = fnv1a64("");
        for (const auto& q : questions) {
            for (std::string_view part : {std::string_view(q.id), std::string_view(q.text_a),
                                          std::string_view(q.text_b), to_string(q.axis)})
                h = fnv1a64(part, fnv1a64_mix(h, part.size()));
            h = fnv1a64_mix(h, static_cast<unsigned char>(q.pole_a));
            h = fnv1a64_mix(h, static_cast<unsigned char>(q.pole_b));
        }
        return hex_digest(h);
    }

    int count(MbtiAxis a) const {
        int n = 0;
        for (const auto& q : questions) n += q.axis == a;
        return n;
    }
};

inline void validate_bank(const QuestionBank& bank) {
    std::set<std::string> ids;
    for (const auto& q : bank.questions) {
        if (!ids.insert(q.id).second) throw ConfigError("question bank: duplicate id '" + q.id + "'");
        const char p = first_pole(q.axis), s = second_pole(q.axis);
        const bool ok = (q.pole_a == p && q.pole_b == s) || (q.pole_a == s && q.pole_b == p);
        if (!ok)
            throw ConfigError("question bank: poles of '" + q.id + "' do not belong to axis " +
                              std::string(to_string(q.axis)));
    }
}

// Line-delimited {id, text_a, text_b, axis, pole_a, pole_b} records.
inline QuestionBank parse_question_bank(std::istream& in, const std::string& origin) {
    QuestionBank bank;
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
        for (const char* f : {"id", "text_a", "text_b", "axis", "pole_a", "pole_b"})
            if (!rec.is_object() || !rec.contains(f) || !rec[f].is_string())
                fail(std::string("missing or non-string field '") + f + "'");
        auto axis = axis_from_string(rec["axis"].get<std::string>());
        if (!axis) fail("unknown axis '" + rec["axis"].get<std::string>() + "'");
        const auto pa = rec["pole_a"].get<std::string>();
        const auto pb = rec["pole_b"].get<std::string>();
        if (pa.size() != 1 || pb.size() != 1) fail("poles must be single letters");
        bank.questions.push_back({rec["id"].get<std::string>(), rec["text_a"].get<std::string>(),
                                  rec["text_b"].get<std::string>(), *axis, pa[0], pb[0]});
    }
    try {
        validate_bank(bank);
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return bank;
}

inline QuestionBank load_question_bank(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open question bank: " + path);
    return parse_question_bank(in, path);
}

// ---------------------------------------------------------------------------
// Administration

enum class Choice { A, B, Abstain };

namespace detail {

inline bool standalone_at(std::string_view s, std::size_t i) {
    const bool left = i == 0 || std::isalnum(static_cast<unsigned char>(s[i - 1])) == 0;
    const bool right = i + 1 >= s.size() || std::isalnum(static_cast<unsigned char>(s[i + 1])) == 0;
    return left && right;
}

inline std::string lowered(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace detail

// First standalone uppercase "A" or "B"; failing that, a reply quoting exactly one
// option's text.
inline Choice parse_choice(std::string_view reply, const MbtiQuestion& q) {
    for (std::size_t i = 0; i < reply.size(); ++i) {
        if ((reply[i] == 'A' || reply[i] == 'B') && detail::standalone_at(reply, i))
            return reply[i] == 'A' ? Choice::A : Choice::B;
    }
    const auto hay = detail::lowered(reply);
    const bool has_a = !q.text_a.empty() && hay.find(detail::lowered(q.text_a)) != std::string::npos;
    const bool has_b = !q.text_b.empty() && hay.find(detail::lowered(q.text_b)) != std::string::npos;
    if (has_a != has_b) return has_a ? Choice::A : Choice::B;
    return Choice::Abstain;
}

struct AgentSnapshot {
    std::string name;
    Position position;
    std::string memory{kNoMemory};
};

inline std::string question_instruction(const MbtiQuestion& q) {
    return "Answer the following question by choosing A or B.\nA. " + q.text_a + "\nB. " +
           q.text_b + "\nReply with A or B.";
}

inline constexpr std::string_view kReaskSuffix =
    "\n\nYour previous reply could not be understood. Reply with the single letter A or B.";

// Move-phase prompt with its instruction section swapped for the question.
inline std::string render_question(const PromptTemplate& move_template, const AgentSnapshot& agent,
                                   const MbtiQuestion& q) {
    static constexpr std::string_view marker = "\x01question\x01";
    const auto templ = with_instruction(move_template, marker);
    AgentState state;
    state.name = agent.name;
    state.position = agent.position;
    state.memory = agent.memory;
    auto prompt = render(templ, state, {});
    if (auto pos = prompt.find(marker); pos != std::string::npos)
        prompt.replace(pos, marker.size(), question_instruction(q));
    return prompt;
}

struct AnswerSheet {
    std::vector<Choice> answers;  // aligned to the bank
    bool incomplete = false;      // backend failed before all questions were asked
    std::string bank_digest;
};

inline AnswerSheet administer(const AgentSnapshot& agent, const QuestionBank& bank,
                              const LlmBackend& backend, const PromptTemplates& templates,
                              int checkpoint_step, const GenerationParams& params = {},
                              int max_in_flight = 1) {
    AnswerSheet sheet;
    sheet.bank_digest = bank.digest();
    const auto n = bank.questions.size();
    sheet.answers.assign(n, Choice::Abstain);
    std::vector<char> failed(n, 0);
    parallel_for(n, max_in_flight, [&](std::size_t i) {
        const auto& q = bank.questions[i];
        const auto prompt = render_question(templates.move, agent, q);
        const CallContext ctx{agent.name, checkpoint_step, Phase::Mbti};
        try {
            auto choice = parse_choice(backend.generate(ctx, prompt, params), q);
            if (choice == Choice::Abstain)
                choice = parse_choice(backend.generate(ctx, prompt + std::string(kReaskSuffix), params), q);
            sheet.answers[i] = choice;
        } catch (const BackendUnavailable&) {
            failed[i] = 1;
        } catch (const ProtocolError&) {
            failed[i] = 1;
        }
    });
    for (char f : failed) sheet.incomplete = sheet.incomplete || f;
    return sheet;
}

// ---------------------------------------------------------------------------
// Scoring

struct AxisScore {
    int first = 0;   // count for E, S, T or J
    int second = 0;  // count for I, N, F or P
    int abstained = 0;
    double first_percent = 0;  // of non-abstained answers
    char letter = '?';
    bool tie = false;
    bool undetermined = false;

    double second_percent() const { return undetermined ? 0 : 100.0 - first_percent; }
};

struct MbtiResult {
    std::array<AxisScore, 4> axes{};
    int abstentions = 0;
    std::string type;  // four letters, '?' where undetermined
    std::string bank_digest;
    bool incomplete = false;

    const AxisScore& axis(MbtiAxis a) const { return axes[axis_index(a)]; }
};

inline MbtiResult score(const std::vector<Choice>& answers, const QuestionBank& bank) {
    if (answers.size() != bank.questions.size())
        throw std::invalid_argument("score: answers not aligned to question bank");
    MbtiResult r;
    r.bank_digest = bank.digest();
    for (std::size_t i = 0; i < answers.size(); ++i) {
        const auto& q = bank.questions[i];
        auto& ax = r.axes[axis_index(q.axis)];
        if (answers[i] == Choice::Abstain) {
            ++ax.abstained;
            ++r.abstentions;
            continue;
        }
        const char pole = answers[i] == Choice::A ? q.pole_a : q.pole_b;
        (pole == first_pole(q.axis) ? ax.first : ax.second) += 1;
    }
    for (auto a : kAllAxes) {
        auto& ax = r.axes[axis_index(a)];
        const int answered = ax.first + ax.second;
        if (answered == 0) {
            ax.undetermined = true;
            ax.letter = '?';
        } else {
            ax.first_percent = 100.0 * ax.first / answered;
            if (ax.first > ax.second) ax.letter = first_pole(a);
            else if (ax.second > ax.first) ax.letter = second_pole(a);
            else {
                ax.tie = true;
                ax.letter = introspective_pole(a);
            }
        }
        r.type += ax.letter;
    }
    return r;
}

inline MbtiResult score(const AnswerSheet& sheet, const QuestionBank& bank) {
    auto r = score(sheet.answers, bank);
    r.incomplete = sheet.incomplete;
    return r;
}

struct MbtiComparison {
    std::array<double, 4> first_percent_delta{};  // after - before
    std::set<MbtiAxis> changed;

    bool type_changed() const { return !changed.empty(); }
};

inline MbtiComparison compare_results(const MbtiResult& before, const MbtiResult& after) {
    if (before.bank_digest != after.bank_digest)
        throw std::invalid_argument("compare_results: results come from different question banks");
    MbtiComparison c;
    for (auto a : kAllAxes) {
        const auto& b = before.axis(a);
        const auto& f = after.axis(a);
        c.first_percent_delta[axis_index(a)] = f.first_percent - b.first_percent;
        if (b.letter != f.letter) c.changed.insert(a);
    }
    return c;
}

// Builds a result carrying only a type code; useful for comparing published types.
inline MbtiResult result_from_type(std::string_view type, std::string bank_digest = "type-only") {
    if (type.size() != 4) throw std::invalid_argument("result_from_type: need 4 letters");
    MbtiResult r;
    r.bank_digest = std::move(bank_digest);
    r.type = std::string(type);
    for (auto a : kAllAxes) {
        auto& ax = r.axes[axis_index(a)];
        ax.letter = type[axis_index(a)];
        if (ax.letter == first_pole(a)) ax.first_percent = 100;
        else if (ax.letter == second_pole(a)) ax.first_percent = 0;
        else throw std::invalid_argument("result_from_type: bad letter in " + std::string(type));
    }
    return r;
}

// Snapshot of every agent at `checkpoint`: 0 is the initial state, k >= 1 the state
// after step k.
inline std::vector<AgentSnapshot> snapshots_at(const Transcript& t, int checkpoint) {
    if (checkpoint < 0 || static_cast<std::size_t>(checkpoint) > t.records.size())
        throw std::out_of_range("checkpoint " + std::to_string(checkpoint) +
                                " beyond transcript of " + std::to_string(t.records.size()) + " steps");
    if (t.records.empty()) throw std::out_of_range("empty transcript");
    std::vector<AgentSnapshot> out;
    if (checkpoint == 0) {
        for (const auto& a : t.records.front().agents)
            out.push_back({a.name, a.before, std::string(kNoMemory)});
    } else {
        for (const auto& a : t.records[static_cast<std::size_t>(checkpoint - 1)].agents)
            out.push_back({a.name, a.after, a.memory});
    }
    return out;
}

// Synthetic 12-item bank (3 per axis) with the same schema as the real instrument.
inline QuestionBank synthetic_question_bank() {
    QuestionBank b;
    auto add = [&](std::string id, std::string ta, std::string tb, MbtiAxis ax, char pa, char pb) {
        b.questions.push_back({std::move(id), std::move(ta), std::move(tb), ax, pa, pb});
    };
    add("s01", "You gain energy from spending time with a group of other agents.",
        "You gain energy from spending time thinking on your own.", MbtiAxis::EI, 'E', 'I');
    add("s02", "You prefer to reflect before you speak.", "You prefer to speak as you think.",
        MbtiAxis::EI, 'I', 'E');
    add("s03", "You start conversations with agents you have not met.",
        "You wait for other agents to approach you.", MbtiAxis::EI, 'E', 'I');
    add("s04", "You trust what you can observe directly.", "You trust hunches and patterns.",
        MbtiAxis::SN, 'S', 'N');
    add("s05", "You enjoy imagining what the field could become.",
        "You focus on what the field is right now.", MbtiAxis::SN, 'N', 'S');
    add("s06", "You describe things with concrete details.", "You describe things with metaphors.",
        MbtiAxis::SN, 'S', 'N');
    add("s07", "You decide by weighing facts logically.", "You decide by considering how others feel.",
        MbtiAxis::TF, 'T', 'F');
    add("s08", "Harmony in the group matters more than being right.",
        "Being right matters more than harmony in the group.", MbtiAxis::TF, 'F', 'T');
    add("s09", "You give frank criticism.", "You give gentle encouragement.", MbtiAxis::TF, 'T', 'F');
    add("s10", "You like to plan your route in advance.", "You like to wander and adapt.",
        MbtiAxis::JP, 'J', 'P');
    add("s11", "You keep your options open.", "You settle on a decision quickly.", MbtiAxis::JP, 'P', 'J');
    add("s12", "You finish one task before starting another.", "You juggle several tasks at once.",
        MbtiAxis::JP, 'J', 'P');
    return b;
}

} // namespace agentsoc
