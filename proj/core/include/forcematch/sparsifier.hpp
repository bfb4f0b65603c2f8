#ifndef FORCEMATCH_SPARSIFIER_HPP
#define FORCEMATCH_SPARSIFIER_HPP

#include <cstdint>

#include "forcematch/trajectory.hpp"

// Degrades a dense dataset into sparse observations by drawing per-individual
// revisit times from a lognormal distribution, mimicking a single human
// observer moving through the group.

namespace forcematch {

// Lognormal revisit-time distribution over seconds: ln(dt) ~ N(meanlog,
// sdlog^2), so the mean revisit time is exp(meanlog + sdlog^2 / 2).
struct RevisitDistribution {
  double meanlog = 6.1;
  double sdlog = 0.6;  // > 0
};

// Mean revisit time in seconds implied by the distribution.
double mean_seconds(const RevisitDistribution& dist);

// Chooses meanlog so the distribution's mean equals the target:
// meanlog = ln(60 * target_mean_minutes) - sdlog^2 / 2.
RevisitDistribution distribution_for_target_mean(double target_mean_minutes, double sdlog = 0.6);

// Per individual independently: walk forward from the first fix, drawing a
// revisit delay each time and keeping the dense fix nearest to the target
// time, until the trajectory span is exhausted.  Output fixes are a subset of
// input fixes.  The per-individual RNG stream is derived from (seed,
// individual id), so processing order does not matter.  Throws
// EmptyTrajectory when an individual has fewer than two fixes and
// InvalidConfig for a bad distribution.
GroupDataset degrade(const GroupDataset& data, const RevisitDistribution& dist,
                     std::uint64_t seed);

}  // namespace forcematch

#endif
