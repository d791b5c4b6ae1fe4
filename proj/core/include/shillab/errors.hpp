#pragma once

#include <stdexcept>
#include <string>

namespace shillab {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape disagreement; the message names the operation and the shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A call contract was violated (bad argument, wrong call order).
struct ContractError : Error {
  using Error::Error;
};

// Non-finite values showed up where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Input data could not be parsed.
struct ParseError : Error {
  using Error::Error;
};

// Unknown user or item id.
struct LookupError : Error {
  using Error::Error;
};

}  // namespace shillab
