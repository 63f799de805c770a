#pragma once

#include <stdexcept>
#include <string>

namespace laggre {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LAGGRE_DEFINE_ERROR(Name)        \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

LAGGRE_DEFINE_ERROR(ZeroNorm);
LAGGRE_DEFINE_ERROR(DimensionMismatch);
LAGGRE_DEFINE_ERROR(IndexOutOfRange);
LAGGRE_DEFINE_ERROR(ShapeMismatch);
LAGGRE_DEFINE_ERROR(EmptyIntersection);
LAGGRE_DEFINE_ERROR(IoError);
LAGGRE_DEFINE_ERROR(FormatError);
LAGGRE_DEFINE_ERROR(ConfigError);
LAGGRE_DEFINE_ERROR(MissingLabels);
LAGGRE_DEFINE_ERROR(LabelMismatch);
LAGGRE_DEFINE_ERROR(BandOutOfRange);

#undef LAGGRE_DEFINE_ERROR

}  // namespace laggre
