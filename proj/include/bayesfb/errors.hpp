#pragma once

#include <stdexcept>
#include <string>

namespace bayesfb {

// Base class for all domain errors thrown by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define BAYESFB_DECLARE_ERROR(Name)                          \
  struct Name : Error {                                      \
    explicit Name(const std::string& what) : Error(what) {}  \
  }

// mesh
BAYESFB_DECLARE_ERROR(InvalidMesh);
BAYESFB_DECLARE_ERROR(DegenerateElement);
BAYESFB_DECLARE_ERROR(OutOfDomain);

// spde / priors
BAYESFB_DECLARE_ERROR(InvalidHyperparameter);
BAYESFB_DECLARE_ERROR(NotPositiveDefinite);
BAYESFB_DECLARE_ERROR(ShapeError);

// simulate
BAYESFB_DECLARE_ERROR(InvalidShape);
BAYESFB_DECLARE_ERROR(SampleTooLarge);
BAYESFB_DECLARE_ERROR(PreferentialityTooHigh);

// model-spec / infer
BAYESFB_DECLARE_ERROR(SpecMismatch);
BAYESFB_DECLARE_ERROR(NewtonDiverged);
BAYESFB_DECLARE_ERROR(HyperOptFailed);
BAYESFB_DECLARE_ERROR(EmptySample);

// feedback
BAYESFB_DECLARE_ERROR(AsymmetryViolation);
BAYESFB_DECLARE_ERROR(InsufficientSupport);
BAYESFB_DECLARE_ERROR(DegenerateRatio);
BAYESFB_DECLARE_ERROR(EmptyPool);

// evaluate / runner
BAYESFB_DECLARE_ERROR(IncompleteStudy);
BAYESFB_DECLARE_ERROR(EmptyGrid);
BAYESFB_DECLARE_ERROR(IoError);

#undef BAYESFB_DECLARE_ERROR

}  // namespace bayesfb
