#pragma once

#include <stdexcept>
#include <string>

namespace mfcal {

// Base for every error raised by the library. Each subclass names one failure
// mode so callers can catch exactly what they know how to handle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MFCAL_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// liegroup
MFCAL_DEFINE_ERROR(AngleNearPi);

// kinematics
MFCAL_DEFINE_ERROR(ParseError);
MFCAL_DEFINE_ERROR(KinematicLoop);
MFCAL_DEFINE_ERROR(MissingMesh);
MFCAL_DEFINE_ERROR(DimensionMismatch);
MFCAL_DEFINE_ERROR(DegenerateMesh);

// sensing
MFCAL_DEFINE_ERROR(EmptyObservation);
MFCAL_DEFINE_ERROR(ImageIoError);

// registration
MFCAL_DEFINE_ERROR(DegenerateCentroids);
MFCAL_DEFINE_ERROR(TooFewCorrespondences);
MFCAL_DEFINE_ERROR(IllConditioned);

// evaluation
MFCAL_DEFINE_ERROR(BehindCamera);
MFCAL_DEFINE_ERROR(DegenerateTag);
MFCAL_DEFINE_ERROR(InsufficientConfigurations);

// dataset / files
MFCAL_DEFINE_ERROR(DatasetError);

#undef MFCAL_DEFINE_ERROR

}  // namespace mfcal
