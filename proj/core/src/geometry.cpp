#include "forcematch/geometry.hpp"

#include <algorithm>

namespace forcematch {

UnitVector UnitVector::from_components(double x, double y) {
  double norm = std::hypot(x, y);
  if (norm < kZeroDisplacementEps) {
    throw ZeroDisplacement("cannot normalize a near-zero vector");
  }
  UnitVector v;
  v.ux_ = x / norm;
  v.uy_ = y / norm;
  return v;
}

Angle bearing(Vec2 p0, Vec2 p1) {
  if (distance(p0, p1) < kZeroDisplacementEps) {
    throw ZeroDisplacement("bearing undefined for coincident points");
  }
  return Angle(std::atan2(p1.y - p0.y, p1.x - p0.x));
}

namespace {

struct Resultant {
  double sum_cos = 0.0;
  double sum_sin = 0.0;
  double mean_length(std::size_t n) const {
    return std::hypot(sum_cos, sum_sin) / static_cast<double>(n);
  }
};

Resultant accumulate(std::span<const Angle> angles) {
  Resultant r;
  for (Angle a : angles) {
    r.sum_cos += std::cos(a.radians());
    r.sum_sin += std::sin(a.radians());
  }
  return r;
}

}  // namespace

Angle circular_mean(std::span<const Angle> angles) {
  if (angles.empty()) {
    throw DegenerateResultant("circular mean of an empty angle set");
  }
  Resultant r = accumulate(angles);
  if (r.mean_length(angles.size()) <= kDegenerateResultantEps) {
    throw DegenerateResultant("circular mean undefined: resultant length near zero");
  }
  return Angle(std::atan2(r.sum_sin, r.sum_cos));
}

double directional_agreement(std::span<const Angle> angles) {
  if (angles.empty()) {
    return 0.0;
  }
  double r = accumulate(angles).mean_length(angles.size());
  return std::clamp(r, 0.0, 1.0);
}

double iid(Vec2 focal, std::span<const Vec2> associates) {
  double total = 0.0;
  for (Vec2 p : associates) {
    total += distance(focal, p);
  }
  return total;
}

}  // namespace forcematch
