#ifndef FORCEMATCH_GEOMETRY_HPP
#define FORCEMATCH_GEOMETRY_HPP

#include <cmath>
#include <numbers>
#include <span>

#include "forcematch/errors.hpp"

// Planar and circular geometry shared by the whole pipeline.  Coordinates are
// assumed to live in a projected metric system (meters); there is no geodesy
// here.

namespace forcematch {

inline constexpr double kPi = std::numbers::pi;

// Displacements below this are treated as "no movement": a bearing cannot be
// assigned and a mean resultant this small is considered degenerate.
inline constexpr double kZeroDisplacementEps = 1e-9;
inline constexpr double kDegenerateResultantEps = 1e-9;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }

inline double distance(Vec2 a, Vec2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

// Wraps any radian value into (-pi, pi].
inline double wrap_angle(double radians) {
  double w = std::remainder(radians, 2.0 * kPi);  // lands in [-pi, pi]
  return w <= -kPi ? kPi : w;
}

// An angle in radians, wrapped into (-pi, pi] by construction.
class Angle {
 public:
  constexpr Angle() = default;
  explicit Angle(double radians) : value_(wrap_angle(radians)) {}

  double radians() const { return value_; }

  friend bool operator==(Angle a, Angle b) { return a.value_ == b.value_; }

 private:
  double value_ = 0.0;
};

// A direction as unit-norm components; ux^2 + uy^2 == 1 within 1e-12.
class UnitVector {
 public:
  constexpr UnitVector() = default;
  explicit UnitVector(Angle a) : ux_(std::cos(a.radians())), uy_(std::sin(a.radians())) {}

  // Normalizes (x, y); throws ZeroDisplacement when the norm is below 1e-9.
  static UnitVector from_components(double x, double y);

  double ux() const { return ux_; }
  double uy() const { return uy_; }
  Angle angle() const { return Angle(std::atan2(uy_, ux_)); }

 private:
  double ux_ = 1.0;
  double uy_ = 0.0;
};

inline UnitVector angle_to_unit(Angle a) { return UnitVector(a); }
inline Angle unit_to_angle(const UnitVector& v) { return v.angle(); }

// Direction of travel from p0 to p1.  Throws ZeroDisplacement when the two
// points are closer than 1e-9 m; the caller decides how to treat stationary
// steps.
Angle bearing(Vec2 p0, Vec2 p1);

// Signed smallest rotation from b to a, in (-pi, pi].
inline double angular_difference(Angle a, Angle b) {
  return wrap_angle(a.radians() - b.radians());
}

// Circular mean atan2(sum sin, sum cos).  Throws DegenerateResultant when the
// mean resultant length is <= 1e-9 (perfectly balanced directions); callers
// treat the mean direction as undefined in that case.
Angle circular_mean(std::span<const Angle> angles);

// Mean resultant length R = |sum of unit vectors| / n, i.e. one minus the
// circular variance.  1 = all angles identical, 0 = perfectly dispersed.
double directional_agreement(std::span<const Angle> angles);

// True when circular_mean(angles) is defined (resultant above the degeneracy
// threshold).
inline bool mean_direction_defined(std::span<const Angle> angles) {
  return !angles.empty() && directional_agreement(angles) > kDegenerateResultantEps;
}

// Sum of Euclidean distances from the focal point to every associate.
double iid(Vec2 focal, std::span<const Vec2> associates);

}  // namespace forcematch

#endif
