#pragma once

#include <stdexcept>
#include <string>

namespace msr {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing input data: empty samples, malformed files, mismatched rasters.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerically undefined operation (singular configuration, degenerate fit).
class NumericalError : public Error {
 public:
  using Error::Error;
};

#define MSR_DEFINE_ERROR(Name, Base)   \
  class Name : public Base {           \
   public:                             \
    using Base::Base;                  \
  };

MSR_DEFINE_ERROR(InvalidArgument, DataError)
MSR_DEFINE_ERROR(EmptySample, DataError)
MSR_DEFINE_ERROR(EmptyInput, DataError)
MSR_DEFINE_ERROR(SchemeMismatch, DataError)
MSR_DEFINE_ERROR(KindMismatch, DataError)
MSR_DEFINE_ERROR(SizeMismatch, DataError)
MSR_DEFINE_ERROR(NoValidPixels, DataError)
MSR_DEFINE_ERROR(NonPositiveValue, DataError)
MSR_DEFINE_ERROR(FileMissing, DataError)
MSR_DEFINE_ERROR(FormatError, DataError)
MSR_DEFINE_ERROR(IntrinsicsMismatch, DataError)
MSR_DEFINE_ERROR(IoError, DataError)
MSR_DEFINE_ERROR(DuplicateFrame, DataError)

MSR_DEFINE_ERROR(AntipodalInput, NumericalError)
MSR_DEFINE_ERROR(DegenerateInput, NumericalError)
MSR_DEFINE_ERROR(AllModesInvalid, NumericalError)

#undef MSR_DEFINE_ERROR

}  // namespace msr
