#pragma once

#include <stdexcept>
#include <string>

namespace atomsense {

// Base class for every failure raised by the library. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

#define ATOMSENSE_DEFINE_ERROR(Name)   \
  class Name : public Error {          \
   public:                             \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

ATOMSENSE_DEFINE_ERROR(SmallAngleViolation);
ATOMSENSE_DEFINE_ERROR(DegenerateDoppler);
ATOMSENSE_DEFINE_ERROR(GridTooNarrow);
ATOMSENSE_DEFINE_ERROR(PeakNotFound);
ATOMSENSE_DEFINE_ERROR(AmbiguousPeaks);
ATOMSENSE_DEFINE_ERROR(RateTooLow);
ATOMSENSE_DEFINE_ERROR(TraceTooShort);
ATOMSENSE_DEFINE_ERROR(FringeLost);
ATOMSENSE_DEFINE_ERROR(FitFailed);
ATOMSENSE_DEFINE_ERROR(SeriesTooShort);

#undef ATOMSENSE_DEFINE_ERROR

}  // namespace atomsense
