#ifndef FORCEMATCH_SIMULATOR_HPP
#define FORCEMATCH_SIMULATOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "forcematch/trajectory.hpp"

// Agent-based ground-truth generator: foraging agents on a 2D landscape that
// switch to moving toward the group's mean direction whenever an isolation
// threshold (IID > iso_iid and DA > iso_da) is crossed.  The behavior log
// records the mode of every agent at every step so fitted gates can be
// checked against the rule that actually generated the data.

namespace forcematch {

struct SimConfig {
  int n_agents = 14;
  double duration = 172800.0;  // seconds (48 h)
  double step = 1.0;           // seconds between recorded fixes
  double iso_iid = 350.0;      // meters
  double iso_da = 0.8;

  // Reconstructed foraging internals; free parameters, all configurable.
  double speed = 1.0;              // m/s
  double perception_radius = 50.0; // meters
  double arena_width = 2000.0;
  double arena_height = 2000.0;
  int patch_count = 30;
  double patch_radius = 5.0;       // consumed on contact within this distance
  double patch_lifetime = 3600.0;  // seconds before an uneaten patch respawns
  double heading_noise = 0.1;      // radians std dev on straight-line moves
  double start_spread = 50.0;      // agents start inside this centered square

  std::uint64_t seed = 0;
};

enum class BehaviorMode : char { foraging = 'F', cohesion = 'C' };

// Mode of every agent at every recorded step (steps x agents entries).
class BehaviorLog {
 public:
  BehaviorLog() = default;
  BehaviorLog(std::vector<std::string> agent_ids, std::size_t n_steps, double step_seconds);

  const std::vector<std::string>& agent_ids() const { return agent_ids_; }
  std::size_t step_count() const { return n_steps_; }
  double step_seconds() const { return step_seconds_; }

  BehaviorMode at(std::size_t agent_index, std::size_t step) const {
    return static_cast<BehaviorMode>(modes_[step * agent_ids_.size() + agent_index]);
  }
  void set(std::size_t agent_index, std::size_t step, BehaviorMode mode) {
    modes_[step * agent_ids_.size() + agent_index] = static_cast<char>(mode);
  }

  std::size_t agent_index(const std::string& agent_id) const;  // throws FocalNotFound

 private:
  std::vector<std::string> agent_ids_;
  std::size_t n_steps_ = 0;
  double step_seconds_ = 1.0;
  std::vector<char> modes_;
};

struct SimOutput {
  GroupDataset dataset;
  BehaviorLog log;
};

// Deterministic from config.seed; the dataset contains every agent at every
// step.  Throws InvalidConfig.
SimOutput simulate(const SimConfig& config);

// Fraction of recorded steps the agent spent in cohesion mode.
double ground_truth_activation(const BehaviorLog& log, const std::string& agent_id);

}  // namespace forcematch

#endif
