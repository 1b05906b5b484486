#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace skir {

/// Raised when an integration produces non-finite values or leaves the simplex.
class DivergedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an explicit step size violates the integrator's stability bound.
class StabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the Monte Carlo simulator when a proposed rate exceeds the thinning bound.
class ThinningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an equilibrium is required but the fixed point did not converge.
class NotConvergedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Collects every validation problem found in an experiment config.
/// Each issue is prefixed with the field path, e.g. "graphon.block_matrix: ...".
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> issues);

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

}  // namespace skir
