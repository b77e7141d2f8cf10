#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hyperstab {

/// Bad or inconsistent configuration / plant data. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Fixed-point iteration exhausted max_iter. Carries the update history. CLI exit code 3.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), update_history(std::move(history)) {}
    std::vector<double> update_history;
};

/// Characteristic tracing could not classify a terminal boundary.
class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// Simulation state norm exceeded the guard threshold. CLI exit code 4.
class BlowupError : public std::runtime_error {
public:
    BlowupError(const std::string& what, double t, double norm)
        : std::runtime_error(what), time(t), e_norm(norm) {}
    double time;
    double e_norm;
};

} // namespace hyperstab
