#pragma once

#include <stdexcept>
#include <string>

namespace volmap {

/// Base error for all library failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File or record level parse failure (carries offsets / line numbers in the message).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

/// Invalid or missing run-config content. `path` is a JSON pointer into the config.
class ConfigError : public Error {
public:
    ConfigError(const std::string& msg, std::string json_pointer)
        : Error(msg + " at " + json_pointer), path(std::move(json_pointer)) {}
    std::string path;
};

}  // namespace volmap
