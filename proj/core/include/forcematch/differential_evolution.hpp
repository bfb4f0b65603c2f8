#ifndef FORCEMATCH_DIFFERENTIAL_EVOLUTION_HPP
#define FORCEMATCH_DIFFERENTIAL_EVOLUTION_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

// DE/rand/1/bin over box-bounded real parameters.  Trial vectors for a whole
// generation are drawn first (one sequential RNG stream), then evaluated, then
// selected, so runs are reproducible from the seed regardless of how many
// threads evaluate the objective.

namespace forcematch {

struct DeConfig {
  int pop_size = 0;            // 0 = 10 * dimension
  double scale_factor = 0.8;   // F
  double crossover_rate = 0.9; // CR
  int max_generations = 300;
  double tol = 1e-10;          // minimum best-value improvement counted as progress
  int patience = 30;           // stop after this many stalled generations
  std::uint64_t seed = 0;
  int threads = 1;             // objective evaluations per generation; 0 = default budget
};

struct DeResult {
  std::vector<double> best;
  double best_value = 0.0;
  std::vector<double> trace;  // best objective value after each generation
  int generations = 0;
  long evaluations = 0;
  bool converged = false;  // stopped on the stall criterion rather than max_generations
};

using DeObjective = std::function<double(std::span<const double>)>;
using DeBounds = std::vector<std::pair<double, double>>;

// Throws InvalidBounds for empty / inverted / non-finite bounds and
// InvalidConfig for unusable settings (pop_size < 4 after defaulting, etc.).
DeResult differential_evolution(const DeObjective& objective, const DeBounds& bounds,
                                const DeConfig& config = {});

}  // namespace forcematch

#endif
