#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace loopspace {

// Ambient dimension never exceeds 3 (sphere in R^3, torus up to T^3), so
// every small vector/matrix lives on the stack.
inline constexpr int kMaxDim = 3;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// Violated precondition of an operation (bad shapes, non-tangent input...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Argument outside the mathematical domain (t < t_min, s outside (0,1)...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A series evaluation is dominated by cancellation and carries no
// significant digits (far tail of a small-time kernel).
class PrecisionLoss : public DomainError {
public:
    using DomainError::DomainError;
};

// A geodesic step reached the injectivity radius guard.
class StepTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A bridge sample could not be produced within the attempt budget.
class ResampleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flow integration produced a non-finite state.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Too few samples for the requested estimator.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or command line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* what)
{
    if (!cond) throw ContractViolation(what);
}

}  // namespace loopspace
