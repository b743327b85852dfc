#pragma once

#include <stdexcept>
#include <string>

namespace sigexec {

/// Invalid or inconsistent configuration / model parameters.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical scheme cannot run as requested (e.g. the explicit step is not monotone).
class StabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Simulated results disagree with the solver beyond the stated allowance.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A simulated path failed; carries the seed and path index needed to replay it.
class PathError : public std::runtime_error {
public:
    PathError(const std::string& what, unsigned long long seed, unsigned long long path)
        : std::runtime_error(what + " (seed=" + std::to_string(seed) + ", path=" + std::to_string(path) + ")"),
          seed_(seed), path_(path) {}
    unsigned long long seed() const noexcept { return seed_; }
    unsigned long long path() const noexcept { return path_; }

private:
    unsigned long long seed_;
    unsigned long long path_;
};

} // namespace sigexec
