#pragma once

#include <stdexcept>
#include <string>

namespace noiseid {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument violates a type invariant (row sums, ranges, simplex membership).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The request is outside what the library supports, e.g. too few observed
// variables or an alignment over more than kMaxAlignClasses labels.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// A bounded search finished without producing an admissible answer.
class SearchExhaustedError : public Error {
 public:
  using Error::Error;
};

// A closed-form conversion hit a singular point (zero denominator).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace noiseid
