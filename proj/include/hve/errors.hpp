#pragma once

#include <stdexcept>
#include <string>

namespace hve {

// Base of every error raised by the library. Callers that only need a
// message can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Input outside the mathematical domain of an operation (e.g. acosh(x < 1)).
class DomainError : public Error {
public:
    using Error::Error;
};

// API misuse: non-scalar backward root, double backward, missing gradient.
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed file contents. Carries the byte offset or line number when known.
class FormatError : public Error {
public:
    using Error::Error;
};

// A manifest references rows that do not exist in its feature banks.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// A checkpoint does not match the model it is loaded into.
class IncompatibleError : public Error {
public:
    using Error::Error;
};

// Not enough eligible relations or instances to draw an episode.
class SamplingError : public Error {
public:
    using Error::Error;
};

// Invalid run configuration or synthetic dataset spec.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite values encountered during training.
class NumericError : public Error {
public:
    NumericError(const std::string& what, long episode)
        : Error(what), episode_(episode) {}
    long episode() const noexcept { return episode_; }

private:
    long episode_;
};

}  // namespace hve
