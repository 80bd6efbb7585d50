#pragma once

#include <stdexcept>
#include <string>

namespace hydrolim {

// Error conditions are reported through typed exceptions so callers can
// distinguish bad configuration (reject, exit 2) from runtime failures.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigInvalid : Error {
  using Error::Error;
};

struct CoincidentCenters : Error {
  using Error::Error;
};
struct NonPositiveGamma : Error {
  using Error::Error;
};
struct SingularMobility : Error {
  using Error::Error;
};
struct NotPSD : Error {
  using Error::Error;
};
struct NumericalPSDViolation : Error {
  using Error::Error;
};

struct NotIntegrable : Error {
  using Error::Error;
};
struct NonPositiveValue : Error {
  using Error::Error;
};

struct NegativeDensity : Error {
  using Error::Error;
};
struct NonFiniteState : Error {
  using Error::Error;
};
struct CFLViolation : Error {
  using Error::Error;
};
struct NegativeCell : Error {
  using Error::Error;
};
struct LinearSolveFailure : Error {
  using Error::Error;
};
struct DegenerateDensity : Error {
  using Error::Error;
};

struct GridOnly : Error {
  using Error::Error;
};
struct AssumptionsNotMet : Error {
  using Error::Error;
};
struct EmptyBin : Error {
  using Error::Error;
};
struct IncompatibleGrids : Error {
  using Error::Error;
};

}  // namespace hydrolim
