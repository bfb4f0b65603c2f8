#include "forcematch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "forcematch/geometry.hpp"

namespace forcematch {

BehaviorLog::BehaviorLog(std::vector<std::string> agent_ids, std::size_t n_steps,
                         double step_seconds)
    : agent_ids_(std::move(agent_ids)),
      n_steps_(n_steps),
      step_seconds_(step_seconds),
      modes_(agent_ids_.size() * n_steps, static_cast<char>(BehaviorMode::foraging)) {}

std::size_t BehaviorLog::agent_index(const std::string& agent_id) const {
  auto it = std::find(agent_ids_.begin(), agent_ids_.end(), agent_id);
  if (it == agent_ids_.end()) {
    throw FocalNotFound("agent '" + agent_id + "' not in behavior log");
  }
  return static_cast<std::size_t>(it - agent_ids_.begin());
}

namespace {

void validate(const SimConfig& c) {
  if (c.n_agents < 2) throw InvalidConfig("need at least 2 agents");
  if (!(c.duration > 0) || !(c.step > 0) || c.duration < 2 * c.step) {
    throw InvalidConfig("duration and step must be positive with duration >= 2*step");
  }
  if (!(c.iso_da >= 0.0 && c.iso_da <= 1.0)) throw InvalidConfig("iso_da must lie in [0,1]");
  if (!(c.iso_iid >= 0.0)) throw InvalidConfig("iso_iid must be >= 0");
  if (!(c.speed > 0) || !(c.perception_radius >= 0) || !(c.arena_width > 0) ||
      !(c.arena_height > 0) || c.patch_count < 0 || !(c.patch_radius >= 0) ||
      !(c.patch_lifetime > 0) || !(c.heading_noise >= 0) || !(c.start_spread >= 0)) {
    throw InvalidConfig("simulation parameters must be positive where applicable");
  }
}

std::string agent_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "agent%02d", index);
  return buf;
}

struct Patch {
  Vec2 center;
  double age = 0.0;
};

}  // namespace

SimOutput simulate(const SimConfig& config) {
  validate(config);

  const int n = config.n_agents;
  const auto n_steps = static_cast<std::size_t>(std::llround(config.duration / config.step));

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, config.heading_noise);

  auto uniform_in_arena = [&] {
    return Vec2{u01(rng) * config.arena_width, u01(rng) * config.arena_height};
  };

  const Vec2 arena_center{config.arena_width / 2.0, config.arena_height / 2.0};

  std::vector<Vec2> position(static_cast<std::size_t>(n));
  std::vector<double> heading(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    position[static_cast<std::size_t>(i)] = {
        arena_center.x + (u01(rng) - 0.5) * config.start_spread,
        arena_center.y + (u01(rng) - 0.5) * config.start_spread};
    heading[static_cast<std::size_t>(i)] = wrap_angle((u01(rng) * 2.0 - 1.0) * kPi);
  }

  std::vector<Patch> patches(static_cast<std::size_t>(config.patch_count));
  for (auto& patch : patches) {
    patch = {uniform_in_arena(), 0.0};
  }

  std::vector<std::string> ids(static_cast<std::size_t>(n));
  GroupDataset dataset("simulated planar meters");
  std::vector<Trajectory*> tracks(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ids[static_cast<std::size_t>(i)] = agent_name(i);
    Trajectory& traj = dataset.at_or_create(ids[static_cast<std::size_t>(i)]);
    traj.reserve(n_steps);
    tracks[static_cast<std::size_t>(i)] = &traj;  // map nodes are stable
  }
  BehaviorLog log(ids, n_steps, config.step);

  std::vector<Angle> directions;
  directions.reserve(static_cast<std::size_t>(n - 1));
  std::vector<double> next_heading(static_cast<std::size_t>(n));

  for (std::size_t step = 0; step < n_steps; ++step) {
    double t = static_cast<double>(step) * config.step;
    for (int i = 0; i < n; ++i) {
      auto ui = static_cast<std::size_t>(i);
      tracks[ui]->append({t, position[ui].x, position[ui].y});
    }

    // Decide all headings from the time-t snapshot before anyone moves, so
    // the recorded geometry is exactly what each decision saw.
    for (int i = 0; i < n; ++i) {
      auto ui = static_cast<std::size_t>(i);
      Vec2 self = position[ui];

      double iid_sum = 0.0;
      directions.clear();
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        Vec2 other = position[static_cast<std::size_t>(j)];
        double d = distance(self, other);
        iid_sum += d;
        if (d >= kZeroDisplacementEps) {
          directions.push_back(bearing(self, other));
        }
      }
      double da = directional_agreement(directions);
      // Same predicate the fitter's CM gate uses: both thresholds strict, and
      // the mean direction must be defined (da above the degeneracy cutoff).
      bool isolated = iid_sum > config.iso_iid && da > config.iso_da &&
                      da > kDegenerateResultantEps;

      if (isolated) {
        log.set(ui, step, BehaviorMode::cohesion);
        next_heading[ui] = circular_mean(directions).radians();
        continue;
      }

      log.set(ui, step, BehaviorMode::foraging);

      // Head for the nearest live patch in perception range, otherwise keep
      // going straight with a little heading noise.
      const Patch* target = nullptr;
      double best_d = config.perception_radius;
      for (const Patch& patch : patches) {
        double d = distance(self, patch.center);
        if (d <= best_d) {
          best_d = d;
          target = &patch;
        }
      }
      if (target != nullptr && distance(self, target->center) >= kZeroDisplacementEps) {
        next_heading[ui] = bearing(self, target->center).radians();
      } else {
        double perturbed = heading[ui];
        if (config.heading_noise > 0.0) {
          perturbed += noise(rng);
        }
        next_heading[ui] = wrap_angle(perturbed);
      }
    }

    for (int i = 0; i < n; ++i) {
      auto ui = static_cast<std::size_t>(i);
      heading[ui] = next_heading[ui];
      position[ui].x += config.speed * config.step * std::cos(heading[ui]);
      position[ui].y += config.speed * config.step * std::sin(heading[ui]);
    }

    for (auto& patch : patches) {
      patch.age += config.step;
      bool consumed = false;
      for (int i = 0; i < n && !consumed; ++i) {
        consumed = distance(position[static_cast<std::size_t>(i)], patch.center) <=
                   config.patch_radius;
      }
      if (consumed || patch.age > config.patch_lifetime) {
        patch = {uniform_in_arena(), 0.0};
      }
    }
  }

  return {std::move(dataset), std::move(log)};
}

double ground_truth_activation(const BehaviorLog& log, const std::string& agent_id) {
  std::size_t agent = log.agent_index(agent_id);
  if (log.step_count() == 0) {
    return 0.0;
  }
  std::size_t cohesion = 0;
  for (std::size_t step = 0; step < log.step_count(); ++step) {
    if (log.at(agent, step) == BehaviorMode::cohesion) {
      ++cohesion;
    }
  }
  return static_cast<double>(cohesion) / static_cast<double>(log.step_count());
}

}  // namespace forcematch
