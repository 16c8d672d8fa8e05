#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace agentsoc {

// Configuration, template, script or question-bank problems. Detected before a
// run starts; the CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TemplateError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// The backend could not produce a completion after all retries.
class BackendUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The endpoint answered, but the body was not a chat completion.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CorruptTranscript : public std::runtime_error {
public:
    CorruptTranscript(std::string path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
          path_(std::move(path)), line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

} // namespace agentsoc
