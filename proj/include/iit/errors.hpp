#pragma once

#include <stdexcept>
#include <string>

namespace iit {

// Raised for invalid sampler, target or experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A categorical distribution with no positive mass, or a weight stream with no usable weight.
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// State space or problem too large for exact treatment.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical precondition of an exact computation failed (reversibility, centering).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Selected design columns are linearly dependent.
class RankDeficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace iit
