#ifndef STSGG_ERRORS_HPP
#define STSGG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace stsgg {

/// Invalid configuration value (bad fraction, too few classes, ...).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed input data (probability vector, confidence, dangling reference).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Training diverged or produced non-finite values.
class TrainingAbort : public std::runtime_error {
public:
    explicit TrainingAbort(const std::string& what) : std::runtime_error(what) {}
};

} // namespace stsgg

#endif // STSGG_ERRORS_HPP
