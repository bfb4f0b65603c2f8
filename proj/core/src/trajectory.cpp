#include "forcematch/trajectory.hpp"

#include <cmath>

namespace forcematch {

void Trajectory::append(Fix fix) {
  if (!std::isfinite(fix.t) || !std::isfinite(fix.x) || !std::isfinite(fix.y)) {
    throw NonFiniteValue("non-finite fix for individual '" + id_ + "'");
  }
  if (!fixes_.empty()) {
    if (fix.t == fixes_.back().t) {
      throw DuplicateTimestamp("duplicate timestamp for individual '" + id_ + "' at t=" +
                               std::to_string(fix.t));
    }
    if (fix.t < fixes_.back().t) {
      throw DuplicateTimestamp("out-of-order timestamp for individual '" + id_ + "' at t=" +
                               std::to_string(fix.t));
    }
  }
  fixes_.push_back(fix);
}

const Trajectory& GroupDataset::at(const std::string& id) const {
  auto it = trajectories_.find(id);
  if (it == trajectories_.end()) {
    throw FocalNotFound("no individual '" + id + "' in dataset");
  }
  return it->second;
}

void GroupDataset::add(Trajectory trajectory) {
  const std::string& id = trajectory.individual_id();
  if (trajectories_.count(id) > 0) {
    throw DuplicateTimestamp("individual '" + id + "' already present in dataset");
  }
  trajectories_.emplace(id, std::move(trajectory));
}

Trajectory& GroupDataset::at_or_create(const std::string& id) {
  auto it = trajectories_.find(id);
  if (it == trajectories_.end()) {
    it = trajectories_.emplace(id, Trajectory(id)).first;
  }
  return it->second;
}

}  // namespace forcematch
