#pragma once

#include <stdexcept>
#include <string>

namespace rafsnn {

// Shape or geometry disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API misuse: bad arguments, preconditions not met.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed external data (IDX/AER files, checkpoints, configs).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/Inf produced or consumed, or training diverged.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rafsnn
