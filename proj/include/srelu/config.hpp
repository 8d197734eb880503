#pragma once

// Numeric precision of the whole library is a build-time switch. The default
// build uses 32-bit floats; defining SRELU_USE_DOUBLE selects 64-bit reals.
// Each precision lives in its own inline namespace so that both variants can
// be linked into the same test binary without ODR clashes.

#ifdef SRELU_USE_DOUBLE
#define SRELU_PRECISION_NS f64
#else
#define SRELU_PRECISION_NS f32
#endif

#define SRELU_NAMESPACE_BEGIN \
  namespace srelu {           \
  inline namespace SRELU_PRECISION_NS {
#define SRELU_NAMESPACE_END \
  }                         \
  }

SRELU_NAMESPACE_BEGIN

#ifdef SRELU_USE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

inline constexpr const char* kPrecisionName =
    sizeof(Real) == 8 ? "float64" : "float32";

SRELU_NAMESPACE_END
