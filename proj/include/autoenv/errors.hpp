#pragma once

#include <stdexcept>
#include <string>

namespace autoenv {

/// Malformed input: grid files, benchmark configs, design values, run configs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse, e.g. stepping a terminated environment.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A training run produced a non-finite loss; the seed counts as failed.
class TrainingFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace autoenv
