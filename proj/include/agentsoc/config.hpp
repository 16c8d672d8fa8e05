#pragma once

#include "agentsoc/backend.hpp"
#include "agentsoc/errors.hpp"
#include "agentsoc/world.hpp"

#include <chrono>
#include <exception>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace agentsoc {

// ---------------------------------------------------------------------------
// A small TOML subset: [section] headers, `key = value` lines, '#' comments.
// Values: integers, floats, true/false, "strings" (with \" \\ \n \t escapes),
// and flat integer lists [1, 2, 3].

using ConfigValue = std::variant<std::int64_t, double, bool, std::string, std::vector<std::int64_t>>;
using ConfigSection = std::map<std::string, ConfigValue>;
using ConfigDocument = std::map<std::string, ConfigSection>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing comment that is not inside a string.
inline std::string strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && in_string) {
            ++i;
        } else if (line[i] == '"') {
            in_string = !in_string;
        } else if (line[i] == '#' && !in_string) {
            return std::string(line.substr(0, i));
        }
    }
    return std::string(line);
}

inline std::optional<std::int64_t> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t pos = 0;
    try {
        const auto v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

inline ConfigValue parse_value(const std::string& raw, const std::string& where) {
    if (raw.empty()) throw ConfigError(where + ": missing value");
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') throw ConfigError(where + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] != '\\') {
                out += raw[i];
                continue;
            }
            if (i + 2 >= raw.size()) throw ConfigError(where + ": dangling escape");
            switch (raw[++i]) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            default: throw ConfigError(where + ": unsupported escape");
            }
        }
        return out;
    }
    if (raw.front() == '[') {
        if (raw.back() != ']') throw ConfigError(where + ": unterminated list");
        std::vector<std::int64_t> items;
        std::stringstream ss(raw.substr(1, raw.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            auto v = parse_int(item);
            if (!v) throw ConfigError(where + ": list items must be integers, got '" + item + "'");
            items.push_back(*v);
        }
        return items;
    }
    if (auto v = parse_int(raw)) return *v;
    try {
        std::size_t pos = 0;
        const double d = std::stod(raw, &pos);
        if (pos == raw.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(where + ": cannot parse value '" + raw + "'");
}

} // namespace detail

inline ConfigDocument parse_config(std::istream& in, const std::string& origin) {
    ConfigDocument doc;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto text = detail::trim(detail::strip_comment(line));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError(where + ": malformed section header");
            section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
            doc[section];
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const auto key = detail::trim(std::string_view(text).substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (section.empty()) throw ConfigError(where + ": key outside of a section");
        auto value = detail::parse_value(detail::trim(std::string_view(text).substr(eq + 1)), where);
        if (!doc[section].emplace(key, std::move(value)).second)
            throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    return doc;
}

// ---------------------------------------------------------------------------

enum class BackendKind { Scripted, Remote };

struct BackendSettings {
    BackendKind kind = BackendKind::Scripted;
    std::string endpoint_url;
    std::string model_name = "Llama-2-7b-chat-hf";
    std::chrono::milliseconds request_timeout{120'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1000};
    std::string api_key_env = "AGENTSOC_API_KEY";
    bool send_top_k = true;
    std::string script_path;  // empty: fallback-only
    std::uint64_t fallback_seed = 0;
    int max_in_flight = 1;
    GenerationParams params;

    void validate() const {
        params.validate();
        if (kind == BackendKind::Remote && endpoint_url.empty())
            throw ConfigError("backend.endpoint_url is required for kind = \"remote\"");
        if (max_retries < 0) throw ConfigError("backend.max_retries must be >= 0");
        if (max_in_flight < 1) throw ConfigError("backend.max_in_flight must be >= 1");
    }
};

struct SweepSettings {
    std::vector<int> ranges{0, 5, 10, 15, 20, 25};
    int trials_per_range = 10;
    std::uint64_t base_seed = 1;
    int jobs = 1;  // trials run concurrently

    void validate() const {
        if (ranges.empty()) throw ConfigError("sweep.ranges must be nonempty");
        if (trials_per_range < 1) throw ConfigError("sweep.trials_per_range must be >= 1");
        if (jobs < 1) throw ConfigError("sweep.jobs must be >= 1");
    }

    // base_seed * 1000 + range_index * 100 + trial_index
    std::uint64_t trial_seed(std::size_t range_index, int trial) const {
        return base_seed * 1000 + range_index * 100 + static_cast<std::uint64_t>(trial);
    }
};

struct MbtiSettings {
    bool enabled = false;
    std::string bank_path;  // empty: bundled synthetic bank
    std::vector<int> checkpoints;  // empty: {0, num_steps}
};

struct AnalysisSettings {
    std::string lexicon_path;    // empty: cave, hill, treasure, trees
    std::string stopwords_path;  // empty: bundled list
    int top_words = 100;
    bool llm_judge = false;  // ask the configured backend instead of the lexicon
};

struct RunConfig {
    WorldConfig world;
    BackendSettings backend;
    std::string template_dir;  // empty: bundled defaults
    SweepSettings sweep;
    MbtiSettings mbti;
    AnalysisSettings analysis;

    std::vector<int> mbti_checkpoints() const {
        return mbti.checkpoints.empty() ? std::vector<int>{0, world.num_steps} : mbti.checkpoints;
    }

    void validate() const {
        world.validate();
        backend.validate();
        sweep.validate();
        for (int c : mbti_checkpoints())
            if (c < 0 || c > world.num_steps)
                throw ConfigError("mbti.checkpoints entry " + std::to_string(c) + " outside [0, num_steps]");
        if (analysis.top_words < 1) throw ConfigError("analysis.top_words must be >= 1");
    }
};

namespace detail {

class SectionReader {
public:
    SectionReader(const ConfigDocument& doc, std::string name, std::string origin)
        : name_(std::move(name)), origin_(std::move(origin)) {
        if (auto it = doc.find(name_); it != doc.end()) section_ = &it->second;
    }

    ~SectionReader() noexcept(false) {
        if (!section_ || std::uncaught_exceptions()) return;
        for (const auto& [key, v] : *section_)
            if (!seen_.count(key)) throw ConfigError(origin_ + ": unknown key [" + name_ + "] " + key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!section_) return;
        auto it = section_->find(key);
        if (it == section_->end()) return;
        seen_.insert(key);
        const auto& v = it->second;
        const auto where = origin_ + ": [" + name_ + "] " + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!std::holds_alternative<bool>(v)) throw ConfigError(where + " must be true/false");
            out = std::get<bool>(v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!std::holds_alternative<std::string>(v)) throw ConfigError(where + " must be a string");
            out = std::get<std::string>(v);
        } else if constexpr (std::is_same_v<T, double>) {
            if (std::holds_alternative<double>(v)) out = std::get<double>(v);
            else if (std::holds_alternative<std::int64_t>(v)) out = static_cast<double>(std::get<std::int64_t>(v));
            else throw ConfigError(where + " must be a number");
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            if (!std::holds_alternative<std::vector<std::int64_t>>(v))
                throw ConfigError(where + " must be a list of integers");
            out.clear();
            for (auto i : std::get<std::vector<std::int64_t>>(v)) out.push_back(static_cast<int>(i));
        } else if constexpr (std::is_integral_v<T>) {
            if (!std::holds_alternative<std::int64_t>(v)) throw ConfigError(where + " must be an integer");
            out = static_cast<T>(std::get<std::int64_t>(v));
        } else {
            static_assert(sizeof(T) == 0, "unsupported config type");
        }
    }

    void get_ms(const std::string& key, std::chrono::milliseconds& out) {
        std::int64_t ms = out.count();
        get(key, ms);
        out = std::chrono::milliseconds(ms);
    }

private:
    const ConfigSection* section_ = nullptr;
    std::string name_;
    std::string origin_;
    std::set<std::string> seen_;
};

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal().string();
}

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

inline std::string int_list(const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
}

inline std::string number(double d) {
    std::ostringstream ss;
    ss.precision(17);
    ss << d;
    auto s = ss.str();
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

} // namespace detail

// Relative paths are resolved against `base_dir` (normally the config file's directory).
inline RunConfig run_config_from(const ConfigDocument& doc, const std::string& origin,
                                 const std::filesystem::path& base_dir) {
    static const std::set<std::string> known{"world", "backend", "prompts", "sweep", "mbti", "analysis"};
    for (const auto& [name, section] : doc)
        if (!known.count(name)) throw ConfigError(origin + ": unknown section [" + name + "]");

    RunConfig c;
    {
        detail::SectionReader r(doc, "world", origin);
        r.get("side_length", c.world.side_length);
        r.get("num_agents", c.world.num_agents);
        r.get("message_range", c.world.message_range);
        r.get("num_steps", c.world.num_steps);
        r.get("rng_seed", c.world.rng_seed);
    }
    {
        detail::SectionReader r(doc, "backend", origin);
        std::string kind = "scripted";
        r.get("kind", kind);
        if (kind == "scripted") c.backend.kind = BackendKind::Scripted;
        else if (kind == "remote") c.backend.kind = BackendKind::Remote;
        else throw ConfigError(origin + ": backend.kind must be \"scripted\" or \"remote\"");
        r.get("endpoint_url", c.backend.endpoint_url);
        r.get("model_name", c.backend.model_name);
        r.get_ms("request_timeout_ms", c.backend.request_timeout);
        r.get("max_retries", c.backend.max_retries);
        r.get_ms("backoff_ms", c.backend.backoff_base);
        r.get("api_key_env", c.backend.api_key_env);
        r.get("send_top_k", c.backend.send_top_k);
        r.get("script_path", c.backend.script_path);
        r.get("fallback_seed", c.backend.fallback_seed);
        r.get("max_in_flight", c.backend.max_in_flight);
        r.get("temperature", c.backend.params.temperature);
        r.get("max_tokens", c.backend.params.max_tokens);
        r.get("top_p", c.backend.params.top_p);
        r.get("top_k", c.backend.params.top_k);
        c.backend.script_path = detail::resolve_path(c.backend.script_path, base_dir);
    }
    {
        detail::SectionReader r(doc, "prompts", origin);
        r.get("template_dir", c.template_dir);
        c.template_dir = detail::resolve_path(c.template_dir, base_dir);
    }
    {
        detail::SectionReader r(doc, "sweep", origin);
        r.get("ranges", c.sweep.ranges);
        r.get("trials_per_range", c.sweep.trials_per_range);
        r.get("base_seed", c.sweep.base_seed);
        r.get("jobs", c.sweep.jobs);
    }
    {
        detail::SectionReader r(doc, "mbti", origin);
        r.get("enabled", c.mbti.enabled);
        r.get("bank_path", c.mbti.bank_path);
        r.get("checkpoints", c.mbti.checkpoints);
        c.mbti.bank_path = detail::resolve_path(c.mbti.bank_path, base_dir);
    }
    {
        detail::SectionReader r(doc, "analysis", origin);
        r.get("lexicon_path", c.analysis.lexicon_path);
        r.get("stopwords_path", c.analysis.stopwords_path);
        r.get("top_words", c.analysis.top_words);
        r.get("llm_judge", c.analysis.llm_judge);
        c.analysis.lexicon_path = detail::resolve_path(c.analysis.lexicon_path, base_dir);
        c.analysis.stopwords_path = detail::resolve_path(c.analysis.stopwords_path, base_dir);
    }
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    auto doc = parse_config(in, path.string());
    auto cfg = run_config_from(doc, path.string(), std::filesystem::absolute(path).parent_path());
    cfg.validate();
    return cfg;
}

inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
    std::istringstream in(text);
    auto cfg = run_config_from(parse_config(in, "<string>"), "<string>", base_dir);
    cfg.validate();
    return cfg;
}

// Normalized snapshot; parse_run_config(to_toml(c)) reproduces c.
inline std::string to_toml(const RunConfig& c) {
    using detail::quote;
    std::ostringstream o;
    o << "[world]\n"
      << "side_length = " << c.world.side_length << "\n"
      << "num_agents = " << c.world.num_agents << "\n"
      << "message_range = " << c.world.message_range << "\n"
      << "num_steps = " << c.world.num_steps << "\n"
      << "rng_seed = " << c.world.rng_seed << "\n\n";
    o << "[backend]\n"
      << "kind = " << (c.backend.kind == BackendKind::Remote ? "\"remote\"" : "\"scripted\"") << "\n"
      << "endpoint_url = " << quote(c.backend.endpoint_url) << "\n"
      << "model_name = " << quote(c.backend.model_name) << "\n"
      << "request_timeout_ms = " << c.backend.request_timeout.count() << "\n"
      << "max_retries = " << c.backend.max_retries << "\n"
      << "backoff_ms = " << c.backend.backoff_base.count() << "\n"
      << "api_key_env = " << quote(c.backend.api_key_env) << "\n"
      << "send_top_k = " << (c.backend.send_top_k ? "true" : "false") << "\n"
      << "script_path = " << quote(c.backend.script_path) << "\n"
      << "fallback_seed = " << c.backend.fallback_seed << "\n"
      << "max_in_flight = " << c.backend.max_in_flight << "\n"
      << "temperature = " << detail::number(c.backend.params.temperature) << "\n"
      << "max_tokens = " << c.backend.params.max_tokens << "\n"
      << "top_p = " << detail::number(c.backend.params.top_p) << "\n"
      << "top_k = " << c.backend.params.top_k << "\n\n";
    o << "[prompts]\n"
      << "template_dir = " << quote(c.template_dir) << "\n\n";
    o << "[sweep]\n"
      << "ranges = " << detail::int_list(c.sweep.ranges) << "\n"
      << "trials_per_range = " << c.sweep.trials_per_range << "\n"
      << "base_seed = " << c.sweep.base_seed << "\n"
      << "jobs = " << c.sweep.jobs << "\n\n";
    o << "[mbti]\n"
      << "enabled = " << (c.mbti.enabled ? "true" : "false") << "\n"
      << "bank_path = " << quote(c.mbti.bank_path) << "\n"
      << "checkpoints = " << detail::int_list(c.mbti.checkpoints) << "\n\n";
    o << "[analysis]\n"
      << "lexicon_path = " << quote(c.analysis.lexicon_path) << "\n"
      << "stopwords_path = " << quote(c.analysis.stopwords_path) << "\n"
      << "top_words = " << c.analysis.top_words << "\n"
      << "llm_judge = " << (c.analysis.llm_judge ? "true" : "false") << "\n";
    return o.str();
}

} // namespace agentsoc
