// Command-line front end: run / sweep / analyze / mbti.
//
// Exit codes: 0 success, 1 other error (e.g. corrupt transcript), 2 configuration
// error, 3 backend failure.

#include "agentsoc/agentsoc.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace agentsoc;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> range;
    std::optional<int> steps;
    std::optional<int> agents;
    std::string backend;
    std::string endpoint;
    std::string script;
    std::string templates;
    std::optional<int> jobs;
    std::optional<int> trials;
    std::vector<int> ranges;
    std::string bank;
    bool mbti = false;

    void attach(CLI::App& cmd, bool world_flags = true) {
        cmd.add_option("-c,--config", config_path, "Config file (TOML subset)")->check(CLI::ExistingFile);
        if (world_flags) {
            cmd.add_option("--seed", seed, "World RNG seed (sweep: base seed)");
            cmd.add_option("--range", range, "Message range in Chebyshev cells");
            cmd.add_option("--steps", steps, "Number of steps");
            cmd.add_option("--agents", agents, "Number of agents");
        }
        cmd.add_option("--backend", backend, "Backend kind")->check(CLI::IsMember({"scripted", "remote"}));
        cmd.add_option("--endpoint", endpoint, "Chat-completion endpoint URL (remote backend)");
        cmd.add_option("--script", script, "Script file (scripted backend)");
        cmd.add_option("--templates", templates, "Prompt template directory");
    }

    RunConfig load() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) {
            cfg.world.rng_seed = *seed;
            cfg.sweep.base_seed = *seed;
        }
        if (range) cfg.world.message_range = *range;
        if (steps) cfg.world.num_steps = *steps;
        if (agents) cfg.world.num_agents = *agents;
        if (backend == "remote") cfg.backend.kind = BackendKind::Remote;
        if (backend == "scripted") cfg.backend.kind = BackendKind::Scripted;
        if (!endpoint.empty()) cfg.backend.endpoint_url = endpoint;
        if (!script.empty()) cfg.backend.script_path = std::filesystem::absolute(script).string();
        if (!templates.empty()) cfg.template_dir = std::filesystem::absolute(templates).string();
        if (jobs) cfg.sweep.jobs = *jobs;
        if (trials) cfg.sweep.trials_per_range = *trials;
        if (!ranges.empty()) cfg.sweep.ranges = ranges;
        if (!bank.empty()) cfg.mbti.bank_path = std::filesystem::absolute(bank).string();
        if (mbti) cfg.mbti.enabled = true;
        cfg.validate();
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Language-model agent society simulator"};
    app.require_subcommand(1);

    Overrides run_o, sweep_o, mbti_o;
    std::string run_out, sweep_out, analyze_dir, mbti_dir;
    int checkpoint = 0;

    auto* run = app.add_subcommand("run", "Run one simulation into a run directory");
    run_o.attach(*run);
    run->add_flag("--mbti", run_o.mbti, "Administer the questionnaire at the configured checkpoints");
    run->add_option("--bank", run_o.bank, "Question bank file");
    run->add_option("-o,--out", run_out, "Run directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Run the message-range sweep");
    sweep_o.attach(*sweep);
    sweep->add_option("--ranges", sweep_o.ranges, "Message ranges")->delimiter(',');
    sweep->add_option("--trials", sweep_o.trials, "Trials per range");
    sweep->add_option("--jobs", sweep_o.jobs, "Trials run concurrently");
    sweep->add_flag("--mbti", sweep_o.mbti, "Administer the questionnaire in every trial");
    sweep->add_option("--bank", sweep_o.bank, "Question bank file");
    sweep->add_option("-o,--out", sweep_out, "Sweep directory")->required();

    auto* analyze = app.add_subcommand("analyze", "Recompute metric files from transcripts");
    analyze->add_option("dir", analyze_dir, "Run or sweep directory")->required()->check(CLI::ExistingDirectory);

    auto* mbti = app.add_subcommand("mbti", "Administer the questionnaire to a run's agents at a checkpoint");
    mbti->add_option("dir", mbti_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    mbti->add_option("--checkpoint", checkpoint, "0 = initial state, k = after step k")->required();
    mbti->add_option("--bank", mbti_o.bank, "Question bank file");
    mbti_o.attach(*mbti, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            const auto outcome = cmd_run(run_o.load(), run_out);
            if (outcome.status == RunStatus::Failed) {
                std::cerr << "run failed after " << outcome.transcript.records.size()
                          << " steps: " << outcome.error << "\n";
                return 3;
            }
            std::cout << outcome.run_dir.string() << "\n";
        } else if (*sweep) {
            const auto outcome = cmd_sweep(sweep_o.load(), sweep_out);
            std::cout << sweep_out << ": " << outcome.trials << " trials, " << outcome.failed << " failed\n";
        } else if (*analyze) {
            const int n = cmd_analyze(analyze_dir);
            std::cout << "analyzed " << n << " run(s)\n";
        } else if (*mbti) {
            std::optional<RunConfig> overrides;
            if (!mbti_o.config_path.empty() || !mbti_o.backend.empty() || !mbti_o.endpoint.empty() ||
                !mbti_o.script.empty() || !mbti_o.templates.empty() || !mbti_o.bank.empty()) {
                auto base = mbti_o.config_path.empty()
                                ? load_run_config(std::filesystem::path(mbti_dir) / "config.toml")
                                : load_run_config(mbti_o.config_path);
                Overrides o = mbti_o;
                o.config_path.clear();
                auto cfg = base;
                if (o.backend == "remote") cfg.backend.kind = BackendKind::Remote;
                if (o.backend == "scripted") cfg.backend.kind = BackendKind::Scripted;
                if (!o.endpoint.empty()) cfg.backend.endpoint_url = o.endpoint;
                if (!o.script.empty()) cfg.backend.script_path = std::filesystem::absolute(o.script).string();
                if (!o.templates.empty()) cfg.template_dir = std::filesystem::absolute(o.templates).string();
                if (!o.bank.empty()) cfg.mbti.bank_path = std::filesystem::absolute(o.bank).string();
                overrides = cfg;
            }
            const auto res = cmd_mbti(mbti_dir, checkpoint, overrides);
            for (std::size_t i = 0; i < res.results.size(); ++i)
                std::cout << agent_name(static_cast<AgentId>(i)) << "\t" << res.results[i].type << "\n";
            if (res.incomplete) {
                std::cerr << "questionnaire incomplete: backend failures\n";
                return 3;
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const BackendUnavailable& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const ProtocolError& e) {
        std::cerr << "backend protocol error: " << e.what() << "\n";
        return 3;
    } catch (const CorruptTranscript& e) {
        std::cerr << "corrupt transcript: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
