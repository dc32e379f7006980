#pragma once

#include <stdexcept>
#include <string>

namespace fcs {

// Base for every recoverable failure raised by the library. Callers that only
// care about success/failure catch this; tests match the concrete subtype.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FCS_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

FCS_DEFINE_ERROR(InvalidArgument)
FCS_DEFINE_ERROR(BehindCamera)
FCS_DEFINE_ERROR(InvalidWarp)
FCS_DEFINE_ERROR(OutOfRange)
FCS_DEFINE_ERROR(InsufficientObservations)
FCS_DEFINE_ERROR(DegenerateConfiguration)
FCS_DEFINE_ERROR(MissingData)
FCS_DEFINE_ERROR(Unobservable)
FCS_DEFINE_ERROR(InsufficientInput)
FCS_DEFINE_ERROR(InsufficientParallax)
FCS_DEFINE_ERROR(SingularGeometry)
FCS_DEFINE_ERROR(InsufficientSamples)
FCS_DEFINE_ERROR(IllConditioned)
FCS_DEFINE_ERROR(EmptyCloud)
FCS_DEFINE_ERROR(ConfigError)

#undef FCS_DEFINE_ERROR

}  // namespace fcs
