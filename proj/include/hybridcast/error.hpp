#pragma once

#include <stdexcept>
#include <string>

namespace hybridcast {

// Dimension or layout mismatch between operands.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Out-of-domain argument (negative sd, a <= 2, lambda <= 0, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Cholesky breakdown or a rank-deficient Gram matrix.
class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IllConditionedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or insufficient input data: CSV parse failures, duplicate dates,
// coverage gaps, constant columns, too few rows.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite or exploding loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, double loss)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                             " (loss " + std::to_string(loss) + ")"),
          epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace hybridcast
