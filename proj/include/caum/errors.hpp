#pragma once

#include <stdexcept>
#include <string>

namespace caum {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes; message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Id outside an embedding table / vocabulary.
struct IndexError : Error {
    using Error::Error;
};

// Violated operation precondition (non-scalar backward, empty batch,
// degenerate mask row, ...).
struct ContractError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Malformed input file beyond the tolerated fraction.
struct FormatError : Error {
    using Error::Error;
};

// UserPrecompute built against parameters that changed since.
struct StalenessError : Error {
    using Error::Error;
};

// Fully masked title; caller substitutes the learned empty-news vector.
struct EncodeError : Error {
    using Error::Error;
};

} // namespace caum
