// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowsteer {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scalar argument (negative sigma, even kernel size, bad bounds).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Tensor extents do not match what an operation expects.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A non-finite value appeared while integrating or evaluating a field.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::ptrdiff_t step = -1)
        : Error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what), step_(step) {}

    std::ptrdiff_t step() const noexcept { return step_; }

private:
    std::ptrdiff_t step_;
};

/// Training loss diverged.
class TrainingError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Inconsistent configuration (schedule length vs grid, missing file, bad key).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace flowsteer
