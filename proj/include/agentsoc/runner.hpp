#pragma once

#include "agentsoc/analytics.hpp"
#include "agentsoc/backend.hpp"
#include "agentsoc/clustering.hpp"
#include "agentsoc/config.hpp"
#include "agentsoc/mbti.hpp"
#include "agentsoc/prompt.hpp"
#include "agentsoc/remote_backend.hpp"
#include "agentsoc/step.hpp"
#include "agentsoc/transcript_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace agentsoc {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

inline constexpr std::string_view kInboxInterpretation =
    "message-phase prompts carry the inbox delivered in the previous step (step 1: No Messages); "
    "memory-phase prompts carry the inbox delivered in the same step";

// ---------------------------------------------------------------------------
// Everything a run needs, loaded and validated before any directory is created.

struct PreparedRun {
    RunConfig config;
    std::shared_ptr<const LlmBackend> backend;
    PromptTemplates templates;
    QuestionBank bank;
    std::vector<std::string> lexicon;
    std::vector<std::string> stopwords;
};

inline std::shared_ptr<const LlmBackend> make_backend(const BackendSettings& s) {
    if (s.kind == BackendKind::Remote) {
        RemoteConfig rc;
        rc.endpoint_url = s.endpoint_url;
        rc.model_name = s.model_name;
        rc.request_timeout = s.request_timeout;
        rc.max_retries = s.max_retries;
        rc.backoff_base = s.backoff_base;
        rc.api_key_env = s.api_key_env;
        rc.send_top_k = s.send_top_k;
        return std::make_shared<RemoteBackend>(rc);
    }
    ScriptTable table;
    if (!s.script_path.empty()) table = load_script(s.script_path);
    return std::make_shared<ScriptedBackend>(std::move(table), s.fallback_seed);
}

inline PreparedRun prepare_run(const RunConfig& cfg) {
    cfg.validate();
    PreparedRun p;
    p.config = cfg;
    p.templates = cfg.template_dir.empty() ? default_prompt_templates() : load_templates(cfg.template_dir);
    p.bank = cfg.mbti.bank_path.empty() ? synthetic_question_bank() : load_question_bank(cfg.mbti.bank_path);
    p.lexicon = cfg.analysis.lexicon_path.empty() ? default_environment_words()
                                                  : load_word_list(cfg.analysis.lexicon_path);
    p.stopwords = cfg.analysis.stopwords_path.empty() ? default_stopwords()
                                                      : load_word_list(cfg.analysis.stopwords_path);
    p.backend = make_backend(cfg.backend);
    return p;
}

// ---------------------------------------------------------------------------
// Small file helpers

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Text cells cannot hold tabs or newlines in the TSV exports.
inline std::string tsv_cell(std::string_view s) {
    std::string out;
    for (char c : s) out += (c == '\t' || c == '\n' || c == '\r') ? ' ' : c;
    return out;
}

// ---------------------------------------------------------------------------
// Per-run metric files. Pure functions of (transcript, config); cmd_analyze
// regenerates them byte for byte.

struct RunMetricsInputs {
    std::vector<std::string> lexicon = default_environment_words();
    std::vector<std::string> stopwords = default_stopwords();
    int top_words = 100;
    const LlmBackend* judge = nullptr;  // set to use the LLM judge instead of the lexicon
    GenerationParams judge_params;
};

inline void write_run_metrics(const fs::path& run_dir, const Transcript& t, const RunMetricsInputs& in) {
    const auto dir = run_dir / "metrics";
    fs::create_directories(dir);
    const auto timeline = cluster_timeline(t);

    {
        std::string s = "step\tagent\tlabel\n";
        for (const auto& ca : timeline)
            for (std::size_t a = 0; a < ca.labels.size(); ++a)
                s += std::to_string(ca.step) + "\t" + std::to_string(a) + "\t" +
                     (ca.labels[a] == kNoise ? std::string("noise") : std::to_string(ca.labels[a])) + "\n";
        write_file(dir / "clusters.tsv", s);
    }
    {
        const auto counts = move_distribution(t);
        std::string s = "command\tcount\n";
        for (auto m : kAllMoves) s += std::string(to_string(m)) + "\t" + std::to_string(counts[move_index(m)]) + "\n";
        write_file(dir / "move_distribution.tsv", s);
    }
    {
        long failures = 0;
        for (const auto& rec : t.records)
            for (const auto& a : rec.agents) failures += !a.parse_ok;
        write_file(dir / "parse_failures.tsv", "unparsed_moves\n" + std::to_string(failures) + "\n");
    }
    {
        const auto prog = unique_hashtag_progression(t);
        std::string s = "step\tunique_hashtags\n";
        for (std::size_t i = 0; i < prog.size(); ++i)
            s += std::to_string(t.records[i].step) + "\t" + std::to_string(prog[i]) + "\n";
        write_file(dir / "hashtag_progression.tsv", s);
    }
    {
        std::string s = "tag\tfirst_step\tfirst_agent\tlifespan\tsteps_present\n";
        for (const auto& [tag, st] : hashtag_stats(t)) {
            std::string steps;
            for (std::size_t i = 0; i < st.presence.size(); ++i)
                if (st.presence[i]) steps += (steps.empty() ? "" : ",") + std::to_string(i + 1);
            s += tsv_cell(tag) + "\t" + std::to_string(st.first_step) + "\t" + std::to_string(st.first_agent) +
                 "\t" + std::to_string(st.lifespan) + "\t" + steps + "\n";
        }
        write_file(dir / "hashtags.tsv", s);
    }
    {
        std::string s = "step\tagent\tx\ty\tin_cluster\n";
        for (const auto& e : stay_events(t, timeline))
            s += std::to_string(e.step) + "\t" + std::to_string(e.agent) + "\t" + std::to_string(e.position.x) +
                 "\t" + std::to_string(e.position.y) + "\t" + (e.in_cluster ? "1" : "0") + "\n";
        write_file(dir / "stay_events.tsv", s);
    }
    {
        const auto report = in.judge ? detect_hallucinations(t, LlmJudge{in.judge, in.judge_params})
                                     : detect_hallucinations(t, LexiconJudge{in.lexicon});
        std::string s = "step\tagent\tword\tsource\n";
        for (const auto& e : report.events)
            s += std::to_string(e.step) + "\t" + std::to_string(e.agent) + "\t" + tsv_cell(e.word) + "\t" +
                 std::string(to_string(e.source)) + "\n";
        write_file(dir / "hallucinations.tsv", s);
        if (report.partial) {
            std::string f = "step\tagent\n";
            for (const auto& [step, agent] : report.failed)
                f += std::to_string(step) + "\t" + std::to_string(agent) + "\n";
            write_file(dir / "hallucinations_failed.tsv", f);
        } else {
            fs::remove(dir / "hallucinations_failed.tsv");
        }
    }
    {
        std::string s = "agent\trank\tword\tcount\n";
        for (int a = 0; a < t.config.num_agents; ++a) {
            int rank = 0;
            for (const auto& wc : word_frequencies(t, a, in.top_words, in.stopwords))
                s += std::to_string(a) + "\t" + std::to_string(++rank) + "\t" + wc.word + "\t" +
                     std::to_string(wc.count) + "\n";
        }
        write_file(dir / "word_frequencies.tsv", s);
    }
}

inline RunMetricsInputs metrics_inputs(const PreparedRun& p) {
    RunMetricsInputs in;
    in.lexicon = p.lexicon;
    in.stopwords = p.stopwords;
    in.top_words = p.config.analysis.top_words;
    if (p.config.analysis.llm_judge) {
        in.judge = p.backend.get();
        in.judge_params = p.config.backend.params;
    }
    return in;
}

// ---------------------------------------------------------------------------
// MBTI outputs

inline std::string mbti_result_json(const std::string& agent, int checkpoint, const AnswerSheet& sheet,
                                    const MbtiResult& r) {
    nlohmann::ordered_json j;
    j["agent"] = agent;
    j["checkpoint"] = checkpoint;
    j["type"] = r.type;
    j["abstentions"] = r.abstentions;
    j["incomplete"] = r.incomplete;
    j["bank_digest"] = r.bank_digest;
    std::string answers;
    for (auto c : sheet.answers) answers += c == Choice::A ? 'A' : c == Choice::B ? 'B' : '-';
    j["answers"] = answers;
    auto axes = nlohmann::ordered_json::object();
    for (auto a : kAllAxes) {
        const auto& ax = r.axis(a);
        nlohmann::ordered_json aj;
        aj[std::string(1, first_pole(a))] = ax.first;
        aj[std::string(1, second_pole(a))] = ax.second;
        aj["abstained"] = ax.abstained;
        aj[std::string("percent_") + first_pole(a)] = ax.first_percent;
        aj[std::string("percent_") + second_pole(a)] = ax.second_percent();
        aj["letter"] = std::string(1, ax.letter);
        aj["tie"] = ax.tie;
        aj["undetermined"] = ax.undetermined;
        axes[std::string(to_string(a))] = std::move(aj);
    }
    j["axes"] = std::move(axes);
    return j.dump(2) + "\n";
}

inline fs::path mbti_step_dir(const fs::path& run_dir, int checkpoint) {
    return run_dir / "mbti" / ("step_" + std::to_string(checkpoint));
}

// Rebuilds mbti/summary.tsv (agent x checkpoint type table) from the step dirs present.
inline void write_mbti_summary(const fs::path& run_dir) {
    const auto root = run_dir / "mbti";
    if (!fs::exists(root)) return;
    std::map<int, std::map<std::string, std::string>> types;  // checkpoint -> agent -> type
    std::vector<std::string> agents;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto name = entry.path().filename().string();
        if (!entry.is_directory() || name.rfind("step_", 0) != 0) continue;
        const int cp = std::stoi(name.substr(5));
        std::istringstream in(read_file(entry.path() / "summary.tsv"));
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            std::istringstream row(line);
            std::string agent, type;
            std::getline(row, agent, '\t');
            std::getline(row, type, '\t');
            types[cp][agent] = type;
            if (std::find(agents.begin(), agents.end(), agent) == agents.end()) agents.push_back(agent);
        }
    }
    std::sort(agents.begin(), agents.end(), [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    std::string s = "agent";
    for (const auto& [cp, _] : types) s += "\tstep_" + std::to_string(cp);
    s += "\n";
    for (const auto& agent : agents) {
        s += agent;
        for (const auto& [cp, m] : types) {
            auto it = m.find(agent);
            s += "\t" + (it == m.end() ? std::string("-") : it->second);
        }
        s += "\n";
    }
    write_file(root / "summary.tsv", s);
}

struct MbtiCheckpointResult {
    std::vector<MbtiResult> results;
    bool incomplete = false;
};

inline MbtiCheckpointResult run_mbti_checkpoint(const fs::path& run_dir, const Transcript& t, int checkpoint,
                                                const PreparedRun& p) {
    const auto snaps = snapshots_at(t, checkpoint);
    const auto dir = mbti_step_dir(run_dir, checkpoint);
    MbtiCheckpointResult out;
    std::string summary = "agent\ttype\tpercent_E\tpercent_S\tpercent_T\tpercent_J\tabstentions\tties\tundetermined\tincomplete\n";
    for (const auto& snap : snaps) {
        const auto sheet = administer(snap, p.bank, *p.backend, p.templates, checkpoint,
                                      p.config.backend.params, p.config.backend.max_in_flight);
        const auto r = score(sheet, p.bank);
        out.incomplete = out.incomplete || r.incomplete;
        write_file(dir / (snap.name + ".json"), mbti_result_json(snap.name, checkpoint, sheet, r));
        std::string ties, undetermined;
        for (auto a : kAllAxes) {
            if (r.axis(a).tie) ties += (ties.empty() ? "" : ",") + std::string(to_string(a));
            if (r.axis(a).undetermined) undetermined += (undetermined.empty() ? "" : ",") + std::string(to_string(a));
        }
        summary += snap.name + "\t" + r.type;
        for (auto a : kAllAxes) summary += "\t" + fixed(r.axis(a).first_percent, 2);
        summary += "\t" + std::to_string(r.abstentions) + "\t" + (ties.empty() ? "-" : ties) + "\t" +
                   (undetermined.empty() ? "-" : undetermined) + "\t" + (r.incomplete ? "1" : "0") + "\n";
        out.results.push_back(r);
    }
    write_file(dir / "summary.tsv", summary);
    write_mbti_summary(run_dir);
    return out;
}

// ---------------------------------------------------------------------------
// cmd_run

enum class RunStatus { Complete, Failed };

struct RunOutcome {
    RunStatus status = RunStatus::Complete;
    std::string error;
    fs::path run_dir;
    Transcript transcript;
};

inline nlohmann::ordered_json make_manifest(const PreparedRun& p, const std::string& started) {
    nlohmann::ordered_json m;
    m["schema_version"] = kSchemaVersion;
    m["status"] = "running";
    m["config"] = "config.toml";
    m["config_digest"] = digest_of(to_toml(p.config));
    m["backend"] = p.backend->descriptor();
    m["template_digest"] = p.templates.digest();
    m["template_source"] = p.config.template_dir.empty() ? "bundled" : p.config.template_dir;
    m["question_bank_digest"] = p.bank.digest();
    m["seed"] = p.config.world.rng_seed;
    m["started_at"] = started;
    m["finished_at"] = nullptr;
    m["artifacts"] = {{"transcript", "transcript.jsonl"}, {"metrics", "metrics/"}, {"mbti", "mbti/"}};
    m["interpretation_notes"] = nlohmann::ordered_json::array({std::string(kInboxInterpretation)});
    return m;
}

// Executes one run into `run_dir` (created; must not already hold a transcript).
// Backend failures produce a Failed outcome with the transcript prefix on disk.
inline RunOutcome run_experiment(const PreparedRun& p, const fs::path& run_dir) {
    if (fs::exists(run_dir / "transcript.jsonl"))
        throw ConfigError("run directory already holds a transcript: " + run_dir.string());
    fs::create_directories(run_dir);
    write_file(run_dir / "config.toml", to_toml(p.config));
    auto manifest = make_manifest(p, utc_now());
    write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

    RunOutcome outcome;
    outcome.run_dir = run_dir;
    StepOptions opts{p.config.backend.params, p.config.backend.max_in_flight};
    Transcript partial;
    partial.config = p.config.world;
    {
        TranscriptWriter writer(run_dir / "transcript.jsonl");
        try {
            outcome.transcript = run_simulation(p.config.world, *p.backend, p.templates, opts,
                                                [&](const StepRecord& rec) {
                                                    writer(rec);
                                                    partial.records.push_back(rec);
                                                });
        } catch (const BackendUnavailable& e) {
            outcome.status = RunStatus::Failed;
            outcome.error = e.what();
        } catch (const ProtocolError& e) {
            outcome.status = RunStatus::Failed;
            outcome.error = e.what();
        }
    }
    if (outcome.status == RunStatus::Failed) {
        partial.backend_descriptor = p.backend->descriptor();
        partial.template_digest = p.templates.digest();
        outcome.transcript = std::move(partial);
    }

    try {
        write_run_metrics(run_dir, outcome.transcript, metrics_inputs(p));
        if (outcome.status == RunStatus::Complete && p.config.mbti.enabled) {
            for (int cp : p.config.mbti_checkpoints())
                if (run_mbti_checkpoint(run_dir, outcome.transcript, cp, p).incomplete)
                    manifest["mbti_incomplete"] = true;
        }
    } catch (const BackendUnavailable& e) {
        outcome.status = RunStatus::Failed;
        outcome.error = e.what();
    }

    manifest["status"] = outcome.status == RunStatus::Complete ? "complete" : "failed";
    manifest["steps_completed"] = outcome.transcript.records.size();
    if (!outcome.error.empty()) manifest["error"] = outcome.error;
    manifest["finished_at"] = utc_now();
    write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
    return outcome;
}

inline RunOutcome cmd_run(const RunConfig& cfg, const fs::path& run_dir) {
    return run_experiment(prepare_run(cfg), run_dir);
}

// ---------------------------------------------------------------------------
// Reading run directories back

struct LoadedRun {
    RunConfig config;
    Transcript transcript;
    std::string status;  // from manifest
};

inline LoadedRun load_run(const fs::path& run_dir) {
    LoadedRun r;
    r.config = load_run_config(run_dir / "config.toml");
    const auto manifest = nlohmann::json::parse(read_file(run_dir / "manifest.json"), nullptr, false);
    r.status = manifest.is_object() && manifest.contains("status") && manifest["status"].is_string()
                   ? manifest["status"].get<std::string>()
                   : "unknown";
    r.transcript = read_transcript(run_dir / "transcript.jsonl", r.config.world);
    return r;
}

inline bool is_run_dir(const fs::path& dir) { return fs::exists(dir / "transcript.jsonl"); }
inline bool is_sweep_dir(const fs::path& dir) { return fs::exists(dir / "sweep.toml"); }

// ---------------------------------------------------------------------------
// cmd_sweep

inline fs::path trial_dir(const fs::path& sweep_dir, int range, int trial) {
    return sweep_dir / ("range_" + std::to_string(range)) / ("trial_" + std::to_string(trial));
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline long count_data_lines(const fs::path& tsv) {
    std::istringstream in(read_file(tsv));
    std::string line;
    long n = -1;  // header
    while (std::getline(in, line)) ++n;
    return std::max(0L, n);
}

} // namespace detail

// Aggregate tables across all trials, computed from what is on disk.
inline void write_sweep_aggregates(const fs::path& sweep_dir) {
    const auto cfg = load_run_config(sweep_dir / "sweep.toml");
    const auto& sw = cfg.sweep;
    const int steps = cfg.world.num_steps;
    const auto agg = sweep_dir / "aggregate";
    fs::create_directories(agg);

    std::string moves = "range\ttrials_ok";
    for (auto m : kAllMoves) moves += "\t" + std::string(to_string(m));
    moves += "\n";
    std::string prog = "range\tseries";
    for (int s = 1; s <= steps; ++s) prog += "\tstep_" + std::to_string(s);
    prog += "\n";
    std::string life = "range";
    for (int l = 1; l <= steps; ++l) life += "\tlifespan_" + std::to_string(l);
    life += "\n";
    std::string per_trial = "range\ttrial\tseed\tstatus\tunique_hashtags\thallucinations\tstays\n";
    std::string summary =
        "range\ttrials_ok\tunique_hashtags_mean\tunique_hashtags_sd\tunique_hashtags_total\t"
        "hallucinations_mean\thallucinations_sd\thallucinations_total\tstay_mean\n";
    std::string failures = "range\ttrial\tseed\terror\n";
    std::string mbti = "range\tcheckpoint\ttype\tcount\n";
    std::ofstream messages(agg / "messages.jsonl", std::ios::binary | std::ios::trunc);

    for (std::size_t ri = 0; ri < sw.ranges.size(); ++ri) {
        const int range = sw.ranges[ri];
        std::array<double, 5> move_sum{};
        std::vector<std::vector<int>> series;
        std::vector<long> lifespan_hist(static_cast<std::size_t>(steps) + 1, 0);
        std::vector<double> tags, halls, stays;
        std::set<std::string> union_tags;
        long hall_total = 0;
        std::map<int, std::map<std::string, int>> types;  // checkpoint -> type -> count

        for (int trial = 0; trial < sw.trials_per_range; ++trial) {
            const auto dir = trial_dir(sweep_dir, range, trial);
            const auto seed = sw.trial_seed(ri, trial);
            LoadedRun run;
            std::string problem;
            try {
                run = load_run(dir);
                if (run.status != "complete") problem = "run status " + run.status;
            } catch (const std::exception& e) {
                problem = e.what();
            }
            if (!problem.empty()) {
                std::string err = problem;
                if (fs::exists(dir / "manifest.json")) {
                    auto m = nlohmann::json::parse(read_file(dir / "manifest.json"), nullptr, false);
                    if (m.is_object() && m.contains("error") && m["error"].is_string()) err = m["error"];
                }
                failures += std::to_string(range) + "\t" + std::to_string(trial) + "\t" + std::to_string(seed) +
                            "\t" + tsv_cell(err) + "\n";
                per_trial += std::to_string(range) + "\t" + std::to_string(trial) + "\t" + std::to_string(seed) +
                             "\tfailed\t-\t-\t-\n";
                continue;
            }
            const auto& t = run.transcript;
            const auto counts = move_distribution(t);
            for (std::size_t k = 0; k < 5; ++k) move_sum[k] += static_cast<double>(counts[k]);
            series.push_back(unique_hashtag_progression(t));
            for (const auto& [tag, st] : hashtag_stats(t)) {
                ++lifespan_hist[static_cast<std::size_t>(st.lifespan)];
                union_tags.insert(tag);
            }
            const long h = detail::count_data_lines(dir / "metrics" / "hallucinations.tsv");
            hall_total += h;
            const double uniq = series.back().empty() ? 0 : series.back().back();
            tags.push_back(uniq);
            halls.push_back(static_cast<double>(h));
            stays.push_back(static_cast<double>(counts[move_index(MoveCommand::Stay)]));
            per_trial += std::to_string(range) + "\t" + std::to_string(trial) + "\t" + std::to_string(seed) +
                         "\tcomplete\t" + fixed(uniq, 0) + "\t" + std::to_string(h) + "\t" +
                         fixed(stays.back(), 0) + "\n";
            for (const auto& rec : t.records)
                for (const auto& a : rec.agents)
                    messages << nlohmann::ordered_json{{"range", range}, {"trial", trial}, {"step", rec.step},
                                                       {"agent", a.agent}, {"message", a.message}}
                                    .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
                             << '\n';
            const auto mbti_summary = dir / "mbti" / "summary.tsv";
            if (fs::exists(mbti_summary)) {
                std::istringstream in(read_file(mbti_summary));
                std::string header, line;
                std::getline(in, header);
                std::vector<int> cps;
                std::istringstream hs(header);
                std::string col;
                std::getline(hs, col, '\t');
                while (std::getline(hs, col, '\t')) cps.push_back(std::stoi(col.substr(5)));
                while (std::getline(in, line)) {
                    std::istringstream row(line);
                    std::string cell;
                    std::getline(row, cell, '\t');
                    for (int cp : cps) {
                        std::getline(row, cell, '\t');
                        if (cell != "-") ++types[cp][cell];
                    }
                }
            }
        }

        const auto ok = static_cast<double>(series.size());
        moves += std::to_string(range) + "\t" + std::to_string(series.size());
        for (double s : move_sum) moves += "\t" + fixed(ok > 0 ? s / ok : 0);
        moves += "\n";

        std::vector<double> mean_curve(static_cast<std::size_t>(steps), 0);
        for (const auto& sr : series)
            for (std::size_t s = 0; s < sr.size(); ++s) mean_curve[s] += sr[s] / ok;
        prog += std::to_string(range) + "\tmean";
        for (double v : mean_curve) prog += "\t" + fixed(v);
        prog += "\n";
        for (std::size_t k = 0; k < series.size(); ++k) {
            prog += std::to_string(range) + "\ttrial_" + std::to_string(k);
            for (int s = 0; s < steps; ++s)
                prog += "\t" + (static_cast<std::size_t>(s) < series[k].size()
                                    ? std::to_string(series[k][static_cast<std::size_t>(s)])
                                    : std::string("-"));
            prog += "\n";
        }

        life += std::to_string(range);
        for (int l = 1; l <= steps; ++l) life += "\t" + std::to_string(lifespan_hist[static_cast<std::size_t>(l)]);
        life += "\n";

        summary += std::to_string(range) + "\t" + std::to_string(series.size()) + "\t" +
                   fixed(detail::mean_of(tags)) + "\t" + fixed(detail::sd_of(tags)) + "\t" +
                   std::to_string(union_tags.size()) + "\t" + fixed(detail::mean_of(halls)) + "\t" +
                   fixed(detail::sd_of(halls)) + "\t" + std::to_string(hall_total) + "\t" +
                   fixed(detail::mean_of(stays)) + "\n";

        for (const auto& [cp, m] : types)
            for (const auto& [type, n] : m)
                mbti += std::to_string(range) + "\t" + std::to_string(cp) + "\t" + type + "\t" +
                        std::to_string(n) + "\n";
    }

    write_file(agg / "move_distribution.tsv", moves);
    write_file(agg / "hashtag_progression.tsv", prog);
    write_file(agg / "lifespan_histogram.tsv", life);
    write_file(agg / "per_trial.tsv", per_trial);
    write_file(agg / "range_summary.tsv", summary);
    write_file(agg / "failures.tsv", failures);
    write_file(agg / "mbti_types.tsv", mbti);
}

struct SweepOutcome {
    int trials = 0;
    int failed = 0;
};

// ranges x trials runs under `sweep_dir`, then the aggregate tables. Trial failures
// are recorded, not fatal. Configuration problems throw before anything is written.
inline SweepOutcome cmd_sweep(const RunConfig& cfg, const fs::path& sweep_dir) {
    const auto base = prepare_run(cfg);
    for (int r : cfg.sweep.ranges) {
        auto w = cfg.world;
        w.message_range = r;
        w.validate();
    }
    if (fs::exists(sweep_dir / "sweep.toml"))
        throw ConfigError("sweep directory already initialized: " + sweep_dir.string());
    fs::create_directories(sweep_dir);
    write_file(sweep_dir / "sweep.toml", to_toml(cfg));

    struct Job {
        std::size_t range_index;
        int trial;
    };
    std::vector<Job> jobs;
    for (std::size_t ri = 0; ri < cfg.sweep.ranges.size(); ++ri)
        for (int t = 0; t < cfg.sweep.trials_per_range; ++t) jobs.push_back({ri, t});

    SweepOutcome out;
    out.trials = static_cast<int>(jobs.size());
    std::mutex mu;
    parallel_for(jobs.size(), cfg.sweep.jobs, [&](std::size_t i) {
        const auto& job = jobs[i];
        PreparedRun p = base;
        p.config.world.message_range = cfg.sweep.ranges[job.range_index];
        p.config.world.rng_seed = cfg.sweep.trial_seed(job.range_index, job.trial);
        const auto dir = trial_dir(sweep_dir, p.config.world.message_range, job.trial);
        const auto res = run_experiment(p, dir);
        if (res.status != RunStatus::Complete) {
            std::lock_guard lock(mu);
            ++out.failed;
        }
    });
    write_sweep_aggregates(sweep_dir);

    nlohmann::ordered_json m;
    m["schema_version"] = kSchemaVersion;
    m["ranges"] = cfg.sweep.ranges;
    m["trials_per_range"] = cfg.sweep.trials_per_range;
    m["base_seed"] = cfg.sweep.base_seed;
    m["seed_rule"] = "base_seed * 1000 + range_index * 100 + trial_index";
    m["runs"] = out.trials;
    m["failed"] = out.failed;
    m["finished_at"] = utc_now();
    write_file(sweep_dir / "sweep_manifest.json", m.dump(2) + "\n");
    return out;
}

// ---------------------------------------------------------------------------
// cmd_analyze

inline void analyze_run(const fs::path& run_dir) {
    const auto run = load_run(run_dir);
    auto p = PreparedRun{};
    p.config = run.config;
    p.lexicon = run.config.analysis.lexicon_path.empty() ? default_environment_words()
                                                         : load_word_list(run.config.analysis.lexicon_path);
    p.stopwords = run.config.analysis.stopwords_path.empty() ? default_stopwords()
                                                             : load_word_list(run.config.analysis.stopwords_path);
    if (run.config.analysis.llm_judge) p.backend = make_backend(run.config.backend);
    write_run_metrics(run_dir, run.transcript, metrics_inputs(p));
}

// Recomputes metric files of a run directory, or of every trial plus the
// aggregates of a sweep directory.
inline int cmd_analyze(const fs::path& dir) {
    if (is_sweep_dir(dir)) {
        const auto cfg = load_run_config(dir / "sweep.toml");
        int analyzed = 0;
        for (int range : cfg.sweep.ranges)
            for (int t = 0; t < cfg.sweep.trials_per_range; ++t) {
                const auto td = trial_dir(dir, range, t);
                if (!is_run_dir(td)) continue;
                analyze_run(td);
                ++analyzed;
            }
        write_sweep_aggregates(dir);
        return analyzed;
    }
    if (!is_run_dir(dir)) throw ConfigError("not a run or sweep directory: " + dir.string());
    analyze_run(dir);
    return 1;
}

// ---------------------------------------------------------------------------
// cmd_mbti

// Administers the questionnaire to every agent's snapshot at `checkpoint`. When
// `overrides` is given it replaces the run's backend/bank/templates settings.
inline MbtiCheckpointResult cmd_mbti(const fs::path& run_dir, int checkpoint,
                                     const std::optional<RunConfig>& overrides = std::nullopt) {
    if (!is_run_dir(run_dir)) throw ConfigError("not a run directory: " + run_dir.string());
    const auto run = load_run(run_dir);
    if (checkpoint < 0 || static_cast<std::size_t>(checkpoint) > run.transcript.records.size())
        throw ConfigError("checkpoint " + std::to_string(checkpoint) + " beyond transcript of " +
                          std::to_string(run.transcript.records.size()) + " steps");
    auto cfg = overrides ? *overrides : run.config;
    cfg.world = run.config.world;
    const auto p = prepare_run(cfg);
    return run_mbti_checkpoint(run_dir, run.transcript, checkpoint, p);
}

} // namespace agentsoc
