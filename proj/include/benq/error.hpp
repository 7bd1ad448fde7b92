#pragma once

#include <stdexcept>
#include <string>

namespace benq {

// Error taxonomy. The CLI maps ConfigError to exit code 2 and everything
// else to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters: bit width, epsilon, group size, mismatched codebook.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input values the algorithms cannot handle (non-finite weights, FP16 overflow).
class DataError : public Error {
public:
    using Error::Error;
};

// Argument outside a mathematical domain (e.g. digit 0).
class DomainError : public Error {
public:
    using Error::Error;
};

// A statistic that is undefined for the given input (MAD of an empty histogram).
class UndefinedStatisticError : public Error {
public:
    using Error::Error;
};

// File could not be opened, parsed or is of an unsupported layout.
class IoError : public Error {
public:
    using Error::Error;
};

// Stored data fails integrity checks (digest mismatch, out-of-range index).
class CorruptionError : public Error {
public:
    using Error::Error;
};

}  // namespace benq
