#include "forcematch/differential_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "forcematch/errors.hpp"
#include "forcematch/parallel.hpp"

namespace forcematch {

namespace {

void validate(const DeBounds& bounds, const DeConfig& config, int pop_size) {
  if (bounds.empty()) {
    throw InvalidBounds("differential evolution needs at least one dimension");
  }
  for (const auto& [lo, hi] : bounds) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      throw InvalidBounds("each bound must be finite with lower < upper");
    }
  }
  if (pop_size < 4) {
    throw InvalidConfig("population size must be at least 4");
  }
  if (config.scale_factor <= 0.0 || !std::isfinite(config.scale_factor)) {
    throw InvalidConfig("scale factor must be positive");
  }
  if (config.crossover_rate < 0.0 || config.crossover_rate > 1.0) {
    throw InvalidConfig("crossover rate must lie in [0, 1]");
  }
  if (config.max_generations < 1) {
    throw InvalidConfig("max_generations must be at least 1");
  }
  if (config.tol < 0.0 || config.patience < 1) {
    throw InvalidConfig("tol must be >= 0 and patience >= 1");
  }
}

}  // namespace

DeResult differential_evolution(const DeObjective& objective, const DeBounds& bounds,
                                const DeConfig& config) {
  const std::size_t dim = bounds.size();
  const int np = config.pop_size > 0 ? config.pop_size : 10 * static_cast<int>(dim);
  validate(bounds, config, np);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, np - 1);
  std::uniform_int_distribution<std::size_t> pick_dim(0, dim - 1);

  auto clamp_to = [&](double v, std::size_t j) {
    return std::clamp(v, bounds[j].first, bounds[j].second);
  };

  std::vector<std::vector<double>> pop(static_cast<std::size_t>(np), std::vector<double>(dim));
  std::vector<double> cost(static_cast<std::size_t>(np));
  for (auto& member : pop) {
    for (std::size_t j = 0; j < dim; ++j) {
      member[j] = bounds[j].first + u01(rng) * (bounds[j].second - bounds[j].first);
    }
  }

  DeResult result;
  result.evaluations = 0;

  auto evaluate_all = [&](const std::vector<std::vector<double>>& members,
                          std::vector<double>& values) {
    parallel_for(members.size(), config.threads,
                 [&](std::size_t i) { values[i] = objective(members[i]); });
    result.evaluations += static_cast<long>(members.size());
  };

  evaluate_all(pop, cost);

  std::size_t best_idx =
      static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  double best_value = cost[best_idx];
  std::vector<double> best = pop[best_idx];

  std::vector<std::vector<double>> trials(static_cast<std::size_t>(np),
                                          std::vector<double>(dim));
  std::vector<double> trial_cost(static_cast<std::size_t>(np));

  result.trace.push_back(best_value);  // initial population
  double last_best = best_value;
  int stalled = 0;
  for (int gen = 0; gen < config.max_generations; ++gen) {
    // Sequential trial construction keeps the RNG stream thread-independent.
    for (int i = 0; i < np; ++i) {
      int r1, r2, r3;
      do { r1 = pick(rng); } while (r1 == i);
      do { r2 = pick(rng); } while (r2 == i || r2 == r1);
      do { r3 = pick(rng); } while (r3 == i || r3 == r1 || r3 == r2);

      std::size_t forced = pick_dim(rng);
      auto& trial = trials[static_cast<std::size_t>(i)];
      const auto& target = pop[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < dim; ++j) {
        if (u01(rng) < config.crossover_rate || j == forced) {
          double v = pop[static_cast<std::size_t>(r1)][j] +
                     config.scale_factor * (pop[static_cast<std::size_t>(r2)][j] -
                                            pop[static_cast<std::size_t>(r3)][j]);
          trial[j] = clamp_to(v, j);
        } else {
          trial[j] = target[j];
        }
      }
    }

    evaluate_all(trials, trial_cost);

    for (int i = 0; i < np; ++i) {
      auto idx = static_cast<std::size_t>(i);
      if (trial_cost[idx] <= cost[idx]) {
        pop[idx].swap(trials[idx]);
        cost[idx] = trial_cost[idx];
        if (cost[idx] < best_value) {
          best_value = cost[idx];
          best = pop[idx];
        }
      }
    }

    if (last_best - best_value < config.tol) {
      ++stalled;
    } else {
      stalled = 0;
    }
    last_best = best_value;
    result.trace.push_back(best_value);
    result.generations = gen + 1;

    if (stalled >= config.patience) {
      result.converged = true;
      break;
    }
  }

  result.best = std::move(best);
  result.best_value = best_value;
  return result;
}

}  // namespace forcematch
