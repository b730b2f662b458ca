#pragma once

#include <stdexcept>
#include <string>

namespace sim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonSquareError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct SingularError : Error {
  using Error::Error;
};
struct NoConvergenceError : Error {
  using Error::Error;
};
struct NotApplicableError : Error {
  using Error::Error;
};
struct CsvError : Error {
  using Error::Error;
};
struct NotScalarError : Error {
  using Error::Error;
};
struct GraphConsumedError : Error {
  using Error::Error;
};
struct BadConfigError : Error {
  using Error::Error;
};
struct VariantError : Error {
  using Error::Error;
};
struct BadImageError : Error {
  using Error::Error;
};
struct UnstableParametersError : Error {
  using Error::Error;
};
struct AllDivergedError : Error {
  using Error::Error;
};

// Training loss turned NaN/Inf; carries the step at which it happened.
struct NonFiniteError : Error {
  std::size_t step;
  NonFiniteError(const std::string& msg, std::size_t s) : Error(msg), step(s) {}
};

}  // namespace sim
