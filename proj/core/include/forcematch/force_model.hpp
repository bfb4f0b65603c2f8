#ifndef FORCEMATCH_FORCE_MODEL_HPP
#define FORCEMATCH_FORCE_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forcematch/differential_evolution.hpp"
#include "forcematch/extraction.hpp"
#include "forcematch/linalg.hpp"
#include "forcematch/nnls.hpp"

// Conditional linear direction models and the hybrid fitting engine:
// differential evolution over the gate thresholds, non-negative least squares
// over the force weights.  A focal animal's travel direction is modeled as a
// weighted sum of its previous bearing, the gated direction to the group's
// circular mean, and (in the richer variant) gated directions to individual
// associates.

namespace forcematch {

enum class ModelVariant {
  group_only,              // previous bearing + gated group mean
  group_plus_individuals,  // ... + one gated term per associate
};

struct ModelForm {
  ModelVariant variant = ModelVariant::group_only;
  // Column order of the per-associate weights (group_plus_individuals only).
  std::vector<std::string> associate_ids;

  static ModelForm group_only() { return {ModelVariant::group_only, {}}; }
  static ModelForm group_plus_individuals(std::vector<std::string> ids);

  bool has_individual_terms() const { return variant == ModelVariant::group_plus_individuals; }
  // prev + cm (+ one per associate)
  std::size_t column_count() const { return 2 + associate_ids.size(); }
  std::size_t gate_dimension() const { return has_individual_terms() ? 3 : 2; }
};

// Gate thresholds: the group term fires when IID > alpha_iid and
// DA > alpha_da (strict); an associate term fires when the distance to that
// associate exceeds alpha_sd (strict, group_plus_individuals only).
struct GateParams {
  double alpha_iid = 0.0;  // meters
  double alpha_da = 0.0;   // in [0, 1]
  double alpha_sd = 0.0;   // meters

  std::vector<double> to_vector(const ModelForm& form) const;
  static GateParams from_vector(std::span<const double> v, const ModelForm& form);
};

// Non-negative force weights (attraction only).
struct Weights {
  double beta_prev = 0.0;
  double beta_cm = 0.0;
  std::map<std::string, double> beta_assoc;
};

struct ActivationRates {
  double cm = 0.0;                          // fraction of rows whose CM gate fired
  std::map<std::string, double> assoc;      // per-associate firing fractions
};

struct ParameterInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

// Percentile bootstrap intervals, keyed like the fit parameters.
struct ConfidenceIntervals {
  ParameterInterval alpha_iid;
  ParameterInterval alpha_da;
  std::optional<ParameterInterval> alpha_sd;
  ParameterInterval beta_prev;
  ParameterInterval beta_cm;
  std::map<std::string, ParameterInterval> beta_assoc;
  int replicates = 0;        // successful replicates
  int failed_replicates = 0;
};

struct FitResult {
  ModelForm model_form;
  GateParams gates;
  Weights weights;
  double rss = 0.0;          // component-space residual sum of squares
  double angular_sse = 0.0;  // sum of wrapped (theta_obs - theta_pred)^2
  std::size_t angular_sse_excluded = 0;  // rows whose predicted vector was near zero
  double r_squared = 0.0;      // clamped to [0, 1]
  double r_squared_raw = 0.0;  // unclamped
  std::size_t n_rows = 0;
  double activation_rate_cm = 0.0;
  std::map<std::string, double> activation_rate_assoc;
  std::optional<ConfidenceIntervals> ci;
  std::uint64_t seed = 0;
  std::vector<double> optimizer_trace;
};

struct FitConfig {
  DeConfig de;      // de.threads <= 0 resolves to the process budget
  int threads = 0;  // concurrent objective evaluations; 0 = FORCEMATCH_THREADS / hardware
};

struct BootstrapConfig {
  int replicates = 200;  // >= 50
  std::uint64_t seed = 0;
  DeConfig de;     // per-replicate optimizer budget (may be reduced)
  int threads = 0; // concurrent replicates; 0 = process budget
};

// Search box per gate dimension, in gate vector order
// (alpha_iid, alpha_da[, alpha_sd]).
DeBounds default_gate_bounds(const ModelForm& form);

// Stacked x/y component system: two equations per row, b holds the observed
// unit vector, columns are [prev | gated cm | gated associate ...].
// Throws EmptyRows.
std::pair<Matrix, std::vector<double>> build_design_matrix(std::span<const DesignRow> rows,
                                                           const ModelForm& form,
                                                           const GateParams& gates);

// Precomputed per-row geometry so gate changes cost O(rows * cols^2) without
// touching the DesignRow structs again.  Thread-safe for concurrent rss()
// calls.
class ObjectiveEvaluator {
 public:
  ObjectiveEvaluator(std::span<const DesignRow> rows, const ModelForm& form);

  std::size_t row_count() const { return n_rows_; }
  const ModelForm& form() const { return form_; }

  // NNLS residual at the given gates.
  double rss(const GateParams& gates) const;
  NnlsResult solve(const GateParams& gates) const;

  Weights weights_from_solution(std::span<const double> x) const;
  ActivationRates activation_rates(const GateParams& gates) const;

  // Angular diagnostic: wrapped squared differences between observed and
  // predicted direction; rows with a near-zero predicted vector are skipped
  // and counted.
  std::pair<double, std::size_t> angular_sse(const GateParams& gates,
                                             std::span<const double> x) const;

  // Total sum of squares of the observed components about their means; the
  // denominator of r-squared.
  double total_sum_of_squares() const;

 private:
  void accumulate_normal_equations(const GateParams& gates, Matrix& gram,
                                   std::vector<double>& atb) const;

  ModelForm form_;
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  double btb_ = 0.0;

  // Per-row caches (struct-of-arrays).
  std::vector<double> obs_x_, obs_y_;
  std::vector<double> prev_x_, prev_y_;  // zeros when the previous bearing is absent
  std::vector<double> cm_x_, cm_y_;
  std::vector<unsigned char> cm_defined_;
  std::vector<double> da_, iid_;

  struct AssociateColumn {
    std::vector<double> ux, uy, dist;
    std::vector<unsigned char> present;
  };
  std::vector<AssociateColumn> assoc_;  // aligned with form_.associate_ids
};

// rss of the NNLS fit at the given gates; deterministic in its inputs.
double objective(std::span<const DesignRow> rows, const ModelForm& form, const GateParams& gates);

// Full hybrid fit: DE over gates, NNLS re-solve at the optimum, diagnostics.
FitResult fit(std::span<const DesignRow> rows, const ModelForm& form, const DeBounds& bounds,
              const FitConfig& config = {});

// 1 - RSS/TSS on the stacked components, TSS about the component means.
// Returns the raw (unclamped) value.  Throws ZeroVariance when TSS is zero
// and TooFewRows below two rows.
double r_squared(std::span<const DesignRow> rows, const ModelForm& form, const GateParams& gates,
                 const Weights& weights);

ActivationRates activation_rate(std::span<const DesignRow> rows, const GateParams& gates,
                                const ModelForm& form);

// Circular-circular (Fisher-Lee) correlation between the row's group mean
// direction and the direction to one associate.  Throws TooFewRows when
// fewer than 3 rows have both directions defined.
double cm_direction_correlation(std::span<const DesignRow> rows, const std::string& associate_id);

// Nonparametric bootstrap: resample rows with replacement, refit, return
// percentile 2.5/97.5 intervals.  Failed replicates are excluded and counted.
ConfidenceIntervals bootstrap_ci(std::span<const DesignRow> rows, const ModelForm& form,
                                 const DeBounds& bounds, const BootstrapConfig& config);

}  // namespace forcematch

#endif
