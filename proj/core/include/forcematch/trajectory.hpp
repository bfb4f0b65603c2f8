#ifndef FORCEMATCH_TRAJECTORY_HPP
#define FORCEMATCH_TRAJECTORY_HPP

#include <map>
#include <string>
#include <vector>

#include "forcematch/errors.hpp"
#include "forcematch/geometry.hpp"

// Timestamped movement data: one Fix per observation, one Trajectory per
// individual, one GroupDataset per group.

namespace forcematch {

// A single observation: seconds since epoch plus projected planar meters.
struct Fix {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;

  Vec2 position() const { return {x, y}; }
};

// Time-ordered fixes of one individual.  Timestamps are strictly increasing;
// duplicates are rejected when appended.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::string individual_id) : id_(std::move(individual_id)) {}

  const std::string& individual_id() const { return id_; }
  const std::vector<Fix>& fixes() const { return fixes_; }
  std::size_t size() const { return fixes_.size(); }
  bool empty() const { return fixes_.empty(); }
  const Fix& front() const { return fixes_.front(); }
  const Fix& back() const { return fixes_.back(); }
  const Fix& operator[](std::size_t i) const { return fixes_[i]; }

  void reserve(std::size_t n) { fixes_.reserve(n); }

  // Throws NonFiniteValue on NaN/inf and DuplicateTimestamp when t does not
  // strictly increase.
  void append(Fix fix);

  // True when t lies within [first fix, last fix] and interpolation is
  // possible (needs at least two fixes).
  bool covers(double t) const {
    return fixes_.size() >= 2 && t >= fixes_.front().t && t <= fixes_.back().t;
  }

 private:
  std::string id_;
  std::vector<Fix> fixes_;
};

// Trajectories of a group, keyed by individual id (ids unique by
// construction).  crs_note is a free-text description of the projected
// coordinate system the x/y values live in.
class GroupDataset {
 public:
  GroupDataset() = default;
  explicit GroupDataset(std::string crs_note) : crs_note_(std::move(crs_note)) {}

  const std::string& crs_note() const { return crs_note_; }
  void set_crs_note(std::string note) { crs_note_ = std::move(note); }

  std::size_t individual_count() const { return trajectories_.size(); }
  const std::map<std::string, Trajectory>& trajectories() const { return trajectories_; }

  bool contains(const std::string& id) const { return trajectories_.count(id) > 0; }

  // Throws FocalNotFound for unknown ids.
  const Trajectory& at(const std::string& id) const;

  // Throws DuplicateTimestamp if an individual with the same id already
  // exists.
  void add(Trajectory trajectory);

  // Mutable access for incremental construction (simulator, CSV reader).
  Trajectory& at_or_create(const std::string& id);

 private:
  std::map<std::string, Trajectory> trajectories_;
  std::string crs_note_;
};

}  // namespace forcematch

#endif
