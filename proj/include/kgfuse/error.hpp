#pragma once

#include <stdexcept>
#include <string>

namespace kgfuse {

// Runtime failure (bad data, numeric trouble, I/O). CLI maps this to exit 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or usage (invalid option values, shape mismatches that
// a caller could have checked). CLI maps this to exit 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }
[[noreturn]] inline void fail_config(const std::string& msg) { throw ConfigError(msg); }

}  // namespace kgfuse
