#pragma once

#include <stdexcept>
#include <string>

namespace aecomm {

/// Thrown when a caller breaks a documented precondition (shape, range, mode).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but the operation has no defined result for it
/// (e.g. normalizing the zero vector).
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A detector could not produce a decision, e.g. zero-forcing on a singular channel.
class DetectionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace aecomm
