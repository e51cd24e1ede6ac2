#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mtbrw {

/// Malformed or contradictory model configuration (bad JSON, unknown keys,
/// parameters outside their admissible range).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Input violates a documented precondition of an operation (for example a
/// verification mode applied to a model outside its assumptions).
class PreconditionError : public std::runtime_error {
public:
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

/// A generation grew past the configured particle cap.
class PopulationCapExceeded : public std::runtime_error {
public:
    PopulationCapExceeded(int generation, std::uint64_t attempted, std::uint64_t cap)
        : std::runtime_error("generation " + std::to_string(generation) + " would hold " +
                             std::to_string(attempted) + " particles, cap is " +
                             std::to_string(cap)),
          generation(generation),
          attempted(attempted),
          cap(cap) {}

    int generation;
    std::uint64_t attempted;
    std::uint64_t cap;
};

/// An iterative solver exhausted its iteration budget before reaching the
/// requested residual.
class NonConvergence : public std::runtime_error {
public:
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

/// A defining equation has no solution in the admissible range.
class Unsolvable : public std::runtime_error {
public:
    explicit Unsolvable(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mtbrw
