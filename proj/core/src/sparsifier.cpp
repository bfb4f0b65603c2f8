#include "forcematch/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "forcematch/seeding.hpp"

namespace forcematch {

double mean_seconds(const RevisitDistribution& dist) {
  return std::exp(dist.meanlog + dist.sdlog * dist.sdlog / 2.0);
}

RevisitDistribution distribution_for_target_mean(double target_mean_minutes, double sdlog) {
  if (!(target_mean_minutes > 0.0)) {
    throw InvalidConfig("target mean revisit time must be positive");
  }
  if (!(sdlog > 0.0)) {
    throw InvalidConfig("sdlog must be positive");
  }
  return {std::log(60.0 * target_mean_minutes) - sdlog * sdlog / 2.0, sdlog};
}

namespace {

// Dense fix nearest to the target time (lower index on an exact tie).
std::size_t nearest_index(const std::vector<Fix>& fixes, double target) {
  auto it = std::lower_bound(fixes.begin(), fixes.end(), target,
                             [](const Fix& f, double v) { return f.t < v; });
  if (it == fixes.end()) {
    return fixes.size() - 1;
  }
  std::size_t hi = static_cast<std::size_t>(it - fixes.begin());
  if (hi == 0) {
    return 0;
  }
  double d_hi = fixes[hi].t - target;
  double d_lo = target - fixes[hi - 1].t;
  return d_lo <= d_hi ? hi - 1 : hi;
}

}  // namespace

GroupDataset degrade(const GroupDataset& data, const RevisitDistribution& dist,
                     std::uint64_t seed) {
  if (!(dist.sdlog > 0.0) || !std::isfinite(dist.meanlog)) {
    throw InvalidConfig("revisit distribution needs finite meanlog and sdlog > 0");
  }

  GroupDataset sparse(data.crs_note());
  for (const auto& [id, traj] : data.trajectories()) {
    if (traj.size() < 2) {
      throw EmptyTrajectory("individual '" + id + "' has fewer than 2 fixes; cannot degrade");
    }
    const auto& fixes = traj.fixes();

    std::mt19937_64 rng(derive_seed(seed, id));
    std::lognormal_distribution<double> revisit(dist.meanlog, dist.sdlog);

    Trajectory kept(id);
    kept.append(fixes.front());
    std::size_t last_index = 0;
    double last_time = fixes.front().t;

    while (true) {
      double target = last_time + revisit(rng);
      if (target > fixes.back().t) {
        break;
      }
      std::size_t idx = nearest_index(fixes, target);
      if (idx <= last_index) {
        idx = last_index + 1;  // always advance, even for tiny draws
        if (idx >= fixes.size()) {
          break;
        }
      }
      kept.append(fixes[idx]);
      last_index = idx;
      last_time = fixes[idx].t;
    }

    if (kept.size() < 2) {
      kept.append(fixes.back());
    }
    sparse.add(std::move(kept));
  }
  return sparse;
}

}  // namespace forcematch
