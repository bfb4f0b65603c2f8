#ifndef FORCEMATCH_ERRORS_HPP
#define FORCEMATCH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace forcematch {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FORCEMATCH_ERROR_TYPE(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

// Geometry / circular statistics.
FORCEMATCH_ERROR_TYPE(ZeroDisplacement);     // bearing of two coincident points
FORCEMATCH_ERROR_TYPE(DegenerateResultant);  // circular mean of a balanced angle set

// Trajectories and extraction.
FORCEMATCH_ERROR_TYPE(OutOfRange);       // interpolation time outside the trajectory span
FORCEMATCH_ERROR_TYPE(FocalNotFound);    // unknown focal individual id
FORCEMATCH_ERROR_TYPE(TooFewFixes);      // trajectory too short for the requested operation
FORCEMATCH_ERROR_TYPE(EmptyTrajectory);  // trajectory without fixes where fixes are required

// Model fitting.
FORCEMATCH_ERROR_TYPE(EmptyRows);      // no design rows to fit
FORCEMATCH_ERROR_TYPE(MaxIterations);  // active-set solver failed to terminate
FORCEMATCH_ERROR_TYPE(InvalidBounds);  // optimizer box constraints are malformed
FORCEMATCH_ERROR_TYPE(InvalidConfig);  // bad optimizer / simulation configuration
FORCEMATCH_ERROR_TYPE(ZeroVariance);   // total sum of squares is zero
FORCEMATCH_ERROR_TYPE(TooFewRows);     // not enough rows for a diagnostic

// File I/O.
FORCEMATCH_ERROR_TYPE(MalformedRow);        // unparseable CSV line (message carries line number)
FORCEMATCH_ERROR_TYPE(DuplicateTimestamp);  // repeated (individual, t) pair at ingest
FORCEMATCH_ERROR_TYPE(NonFiniteValue);      // NaN or infinity in an input file

#undef FORCEMATCH_ERROR_TYPE

}  // namespace forcematch

#endif
