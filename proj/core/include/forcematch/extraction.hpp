#ifndef FORCEMATCH_EXTRACTION_HPP
#define FORCEMATCH_EXTRACTION_HPP

#include <optional>
#include <string>
#include <vector>

#include "forcematch/trajectory.hpp"

// Turns a GroupDataset plus a chosen focal individual into design rows that
// pair each observed focal heading with the interpolated group geometry at
// that instant.

namespace forcematch {

// Interpolated state of one associate at a focal observation time.
struct AssociateState {
  std::string individual_id;
  // Direction from the focal position to the associate; absent when the two
  // positions coincide.
  std::optional<Angle> direction_to;
  double distance = 0.0;  // meters, D_ij
  // The associate's own interpolated heading; absent on a stationary segment.
  std::optional<Angle> travel_direction;
  // Time span of the bracketing segment used; 0 when the query time hit a fix
  // exactly.
  double interpolation_gap = 0.0;
};

// One focal observation with the group geometry needed by the force models.
// da / iid / cm_direction are precomputed from `associates` and stay
// consistent with it (same angle order, same summation order).
struct DesignRow {
  std::string focal_id;
  double t = 0.0;
  Angle observed_direction;                 // bearing to the next focal fix
  std::optional<Angle> previous_bearing;    // bearing from the preceding fix; absent
                                            // only when stationary steps are kept
  double dt_next = 0.0;
  double dt_prev = 0.0;
  std::vector<AssociateState> associates;   // nonempty
  double da = 0.0;     // directional agreement over defined direction_to angles
  double iid = 0.0;    // sum of distances over all associates
  std::optional<Angle> cm_direction;        // absent when the resultant degenerates
};

struct ExtractionOptions {
  // Rows with larger gaps to the succeeding / preceding focal fix are dropped.
  std::optional<double> max_dt_next;
  std::optional<double> max_dt_prev;
  // Associates interpolated across a larger bracketing segment are dropped
  // from the row.
  std::optional<double> max_interpolation_gap;
  // Displacements below this are stationary; 0.1 m sits below the GPS noise
  // floor.
  double min_step = 0.1;
  // Keep rows whose previous focal step is stationary (previous_bearing comes
  // out absent) instead of dropping them.
  bool keep_stationary_prev = false;
};

struct InterpolatedPoint {
  Vec2 position;
  double gap = 0.0;  // bracketing segment span; 0 at an exact fix time
};

// Linear interpolation on the bracketing segment.  At an exact fix time
// returns that fix with gap 0.  Throws OutOfRange when t lies outside the
// trajectory span and TooFewFixes below two fixes.
InterpolatedPoint interpolate_position(const Trajectory& traj, double t);

// Heading of the bracketing segment; at an exact fix time the following
// segment is used (the preceding one at the final fix).  Absent when that
// segment has (near-)zero displacement.  Throws like interpolate_position.
std::optional<Angle> interpolate_direction(const Trajectory& traj, double t);

// One row per interior focal fix whose step to the next fix is non-stationary
// and for which at least one associate is interpolable with a defined
// direction.  Throws FocalNotFound / TooFewFixes.
std::vector<DesignRow> extract_design_rows(const GroupDataset& data, const std::string& focal_id,
                                           const ExtractionOptions& options = {});

}  // namespace forcematch

#endif
