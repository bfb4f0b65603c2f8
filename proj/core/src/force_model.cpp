#include "forcematch/force_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include "forcematch/parallel.hpp"
#include "forcematch/seeding.hpp"

namespace forcematch {

ModelForm ModelForm::group_plus_individuals(std::vector<std::string> ids) {
  if (ids.empty()) {
    throw InvalidConfig("group_plus_individuals needs at least one associate id");
  }
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) {
    throw InvalidConfig("associate ids must be unique");
  }
  return {ModelVariant::group_plus_individuals, std::move(ids)};
}

std::vector<double> GateParams::to_vector(const ModelForm& form) const {
  std::vector<double> v{alpha_iid, alpha_da};
  if (form.has_individual_terms()) {
    v.push_back(alpha_sd);
  }
  return v;
}

GateParams GateParams::from_vector(std::span<const double> v, const ModelForm& form) {
  if (v.size() != form.gate_dimension()) {
    throw InvalidBounds("gate vector dimension does not match the model form");
  }
  GateParams g;
  g.alpha_iid = v[0];
  g.alpha_da = v[1];
  g.alpha_sd = form.has_individual_terms() ? v[2] : 0.0;
  return g;
}

DeBounds default_gate_bounds(const ModelForm& form) {
  DeBounds bounds{{0.0, 1000.0}, {0.0, 1.0}};
  if (form.has_individual_terms()) {
    bounds.emplace_back(0.0, 10.0);
  }
  return bounds;
}

// ---------------------------------------------------------------------------
// ObjectiveEvaluator

ObjectiveEvaluator::ObjectiveEvaluator(std::span<const DesignRow> rows, const ModelForm& form)
    : form_(form) {
  if (rows.empty()) {
    throw EmptyRows("no design rows");
  }
  n_rows_ = rows.size();
  n_cols_ = form_.column_count();

  obs_x_.resize(n_rows_);
  obs_y_.resize(n_rows_);
  prev_x_.assign(n_rows_, 0.0);
  prev_y_.assign(n_rows_, 0.0);
  cm_x_.assign(n_rows_, 0.0);
  cm_y_.assign(n_rows_, 0.0);
  cm_defined_.assign(n_rows_, 0);
  da_.resize(n_rows_);
  iid_.resize(n_rows_);

  std::unordered_map<std::string, std::size_t> column_of;
  if (form_.has_individual_terms()) {
    assoc_.resize(form_.associate_ids.size());
    for (std::size_t j = 0; j < form_.associate_ids.size(); ++j) {
      column_of.emplace(form_.associate_ids[j], j);
      assoc_[j].ux.assign(n_rows_, 0.0);
      assoc_[j].uy.assign(n_rows_, 0.0);
      assoc_[j].dist.assign(n_rows_, 0.0);
      assoc_[j].present.assign(n_rows_, 0);
    }
  }

  btb_ = 0.0;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    const DesignRow& row = rows[r];
    UnitVector obs(row.observed_direction);
    obs_x_[r] = obs.ux();
    obs_y_[r] = obs.uy();
    btb_ += obs.ux() * obs.ux() + obs.uy() * obs.uy();

    if (row.previous_bearing) {
      UnitVector prev(*row.previous_bearing);
      prev_x_[r] = prev.ux();
      prev_y_[r] = prev.uy();
    }
    if (row.cm_direction) {
      UnitVector cm(*row.cm_direction);
      cm_x_[r] = cm.ux();
      cm_y_[r] = cm.uy();
      cm_defined_[r] = 1;
    }
    da_[r] = row.da;
    iid_[r] = row.iid;

    if (form_.has_individual_terms()) {
      for (const AssociateState& assoc : row.associates) {
        auto it = column_of.find(assoc.individual_id);
        if (it == column_of.end() || !assoc.direction_to) {
          continue;
        }
        AssociateColumn& col = assoc_[it->second];
        UnitVector u(*assoc.direction_to);
        col.ux[r] = u.ux();
        col.uy[r] = u.uy();
        col.dist[r] = assoc.distance;
        col.present[r] = 1;
      }
    }
  }
}

void ObjectiveEvaluator::accumulate_normal_equations(const GateParams& gates, Matrix& gram,
                                                     std::vector<double>& atb) const {
  const std::size_t d = n_cols_;
  std::vector<double> vx(d), vy(d);
  std::vector<std::size_t> active;
  active.reserve(d);

  for (std::size_t r = 0; r < n_rows_; ++r) {
    active.clear();
    if (prev_x_[r] != 0.0 || prev_y_[r] != 0.0) {
      vx[0] = prev_x_[r];
      vy[0] = prev_y_[r];
      active.push_back(0);
    }
    if (cm_defined_[r] && iid_[r] > gates.alpha_iid && da_[r] > gates.alpha_da) {
      vx[1] = cm_x_[r];
      vy[1] = cm_y_[r];
      active.push_back(1);
    }
    for (std::size_t j = 0; j < assoc_.size(); ++j) {
      const AssociateColumn& col = assoc_[j];
      if (col.present[r] && col.dist[r] > gates.alpha_sd) {
        vx[2 + j] = col.ux[r];
        vy[2 + j] = col.uy[r];
        active.push_back(2 + j);
      }
    }

    for (std::size_t a = 0; a < active.size(); ++a) {
      std::size_t ka = active[a];
      atb[ka] += vx[ka] * obs_x_[r] + vy[ka] * obs_y_[r];
      double* gram_row = &gram(ka, 0);
      for (std::size_t b = a; b < active.size(); ++b) {
        std::size_t kb = active[b];
        gram_row[kb] += vx[ka] * vx[kb] + vy[ka] * vy[kb];
      }
    }
  }

  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      gram(i, j) = gram(j, i);
    }
  }
}

double ObjectiveEvaluator::rss(const GateParams& gates) const { return solve(gates).rss; }

NnlsResult ObjectiveEvaluator::solve(const GateParams& gates) const {
  Matrix gram(n_cols_, n_cols_);
  std::vector<double> atb(n_cols_, 0.0);
  accumulate_normal_equations(gates, gram, atb);
  return nnls_gram(gram, atb, btb_);
}

Weights ObjectiveEvaluator::weights_from_solution(std::span<const double> x) const {
  Weights w;
  w.beta_prev = x[0];
  w.beta_cm = x[1];
  for (std::size_t j = 0; j < form_.associate_ids.size(); ++j) {
    w.beta_assoc[form_.associate_ids[j]] = x[2 + j];
  }
  return w;
}

ActivationRates ObjectiveEvaluator::activation_rates(const GateParams& gates) const {
  ActivationRates rates;
  std::size_t cm_fired = 0;
  std::vector<std::size_t> assoc_fired(assoc_.size(), 0);
  for (std::size_t r = 0; r < n_rows_; ++r) {
    if (cm_defined_[r] && iid_[r] > gates.alpha_iid && da_[r] > gates.alpha_da) {
      ++cm_fired;
    }
    for (std::size_t j = 0; j < assoc_.size(); ++j) {
      if (assoc_[j].present[r] && assoc_[j].dist[r] > gates.alpha_sd) {
        ++assoc_fired[j];
      }
    }
  }
  rates.cm = static_cast<double>(cm_fired) / static_cast<double>(n_rows_);
  for (std::size_t j = 0; j < assoc_.size(); ++j) {
    rates.assoc[form_.associate_ids[j]] =
        static_cast<double>(assoc_fired[j]) / static_cast<double>(n_rows_);
  }
  return rates;
}

std::pair<double, std::size_t> ObjectiveEvaluator::angular_sse(const GateParams& gates,
                                                               std::span<const double> x) const {
  double sse = 0.0;
  std::size_t excluded = 0;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    double px = x[0] * prev_x_[r];
    double py = x[0] * prev_y_[r];
    if (cm_defined_[r] && iid_[r] > gates.alpha_iid && da_[r] > gates.alpha_da) {
      px += x[1] * cm_x_[r];
      py += x[1] * cm_y_[r];
    }
    for (std::size_t j = 0; j < assoc_.size(); ++j) {
      const AssociateColumn& col = assoc_[j];
      if (col.present[r] && col.dist[r] > gates.alpha_sd) {
        px += x[2 + j] * col.ux[r];
        py += x[2 + j] * col.uy[r];
      }
    }
    if (std::hypot(px, py) < kZeroDisplacementEps) {
      ++excluded;
      continue;
    }
    double diff = wrap_angle(std::atan2(obs_y_[r], obs_x_[r]) - std::atan2(py, px));
    sse += diff * diff;
  }
  return {sse, excluded};
}

double ObjectiveEvaluator::total_sum_of_squares() const {
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    mean_x += obs_x_[r];
    mean_y += obs_y_[r];
  }
  mean_x /= static_cast<double>(n_rows_);
  mean_y /= static_cast<double>(n_rows_);
  double tss = 0.0;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    double dx = obs_x_[r] - mean_x;
    double dy = obs_y_[r] - mean_y;
    tss += dx * dx + dy * dy;
  }
  return tss;
}

// ---------------------------------------------------------------------------
// Free operations

std::pair<Matrix, std::vector<double>> build_design_matrix(std::span<const DesignRow> rows,
                                                           const ModelForm& form,
                                                           const GateParams& gates) {
  if (rows.empty()) {
    throw EmptyRows("no design rows");
  }
  const std::size_t d = form.column_count();
  Matrix a(2 * rows.size(), d);
  std::vector<double> b(2 * rows.size(), 0.0);

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t j = 0; j < form.associate_ids.size(); ++j) {
    column_of.emplace(form.associate_ids[j], 2 + j);
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const DesignRow& row = rows[r];
    std::size_t rx = 2 * r;
    std::size_t ry = 2 * r + 1;

    UnitVector obs(row.observed_direction);
    b[rx] = obs.ux();
    b[ry] = obs.uy();

    if (row.previous_bearing) {
      UnitVector prev(*row.previous_bearing);
      a(rx, 0) = prev.ux();
      a(ry, 0) = prev.uy();
    }
    if (row.cm_direction && row.iid > gates.alpha_iid && row.da > gates.alpha_da) {
      UnitVector cm(*row.cm_direction);
      a(rx, 1) = cm.ux();
      a(ry, 1) = cm.uy();
    }
    if (form.has_individual_terms()) {
      for (const AssociateState& assoc : row.associates) {
        auto it = column_of.find(assoc.individual_id);
        if (it == column_of.end() || !assoc.direction_to || assoc.distance <= gates.alpha_sd) {
          continue;
        }
        UnitVector u(*assoc.direction_to);
        a(rx, it->second) = u.ux();
        a(ry, it->second) = u.uy();
      }
    }
  }
  return {std::move(a), std::move(b)};
}

double objective(std::span<const DesignRow> rows, const ModelForm& form, const GateParams& gates) {
  return ObjectiveEvaluator(rows, form).rss(gates);
}

FitResult fit(std::span<const DesignRow> rows, const ModelForm& form, const DeBounds& bounds,
              const FitConfig& config) {
  if (bounds.size() != form.gate_dimension()) {
    throw InvalidBounds("bounds dimension must be " + std::to_string(form.gate_dimension()) +
                        " for this model form");
  }
  ObjectiveEvaluator evaluator(rows, form);

  DeConfig de = config.de;
  de.threads = config.threads > 0 ? config.threads : default_thread_count();

  DeResult opt = differential_evolution(
      [&](std::span<const double> v) {
        return evaluator.rss(GateParams::from_vector(v, form));
      },
      bounds, de);

  GateParams gates = GateParams::from_vector(opt.best, form);
  NnlsResult solution = evaluator.solve(gates);

  FitResult result;
  result.model_form = form;
  result.gates = gates;
  result.weights = evaluator.weights_from_solution(solution.x);
  result.rss = solution.rss;
  auto [sse, excluded] = evaluator.angular_sse(gates, solution.x);
  result.angular_sse = sse;
  result.angular_sse_excluded = excluded;

  double tss = evaluator.total_sum_of_squares();
  if (tss <= 1e-12 * static_cast<double>(rows.size())) {
    throw ZeroVariance("all observed directions identical; r-squared undefined");
  }
  result.r_squared_raw = 1.0 - solution.rss / tss;
  result.r_squared = std::clamp(result.r_squared_raw, 0.0, 1.0);

  result.n_rows = evaluator.row_count();
  ActivationRates rates = evaluator.activation_rates(gates);
  result.activation_rate_cm = rates.cm;
  result.activation_rate_assoc = std::move(rates.assoc);
  result.seed = de.seed;
  result.optimizer_trace = std::move(opt.trace);
  return result;
}

double r_squared(std::span<const DesignRow> rows, const ModelForm& form, const GateParams& gates,
                 const Weights& weights) {
  if (rows.size() < 2) {
    throw TooFewRows("r-squared needs at least two rows");
  }
  ObjectiveEvaluator evaluator(rows, form);

  std::vector<double> x(form.column_count(), 0.0);
  x[0] = weights.beta_prev;
  x[1] = weights.beta_cm;
  for (std::size_t j = 0; j < form.associate_ids.size(); ++j) {
    auto it = weights.beta_assoc.find(form.associate_ids[j]);
    x[2 + j] = it == weights.beta_assoc.end() ? 0.0 : it->second;
  }

  auto [a, b] = build_design_matrix(rows, form, gates);
  double rss = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double pred = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      pred += a(r, j) * x[j];
    }
    double diff = pred - b[r];
    rss += diff * diff;
  }

  double tss = evaluator.total_sum_of_squares();
  if (tss <= 1e-12 * static_cast<double>(rows.size())) {
    throw ZeroVariance("all observed directions identical; r-squared undefined");
  }
  return 1.0 - rss / tss;
}

ActivationRates activation_rate(std::span<const DesignRow> rows, const GateParams& gates,
                                const ModelForm& form) {
  if (rows.empty()) {
    throw EmptyRows("no design rows");
  }
  ActivationRates rates;
  std::size_t cm_fired = 0;
  std::map<std::string, std::size_t> assoc_fired;
  for (const std::string& id : form.associate_ids) {
    assoc_fired[id] = 0;
  }
  for (const DesignRow& row : rows) {
    if (row.cm_direction && row.iid > gates.alpha_iid && row.da > gates.alpha_da) {
      ++cm_fired;
    }
    if (form.has_individual_terms()) {
      for (const AssociateState& assoc : row.associates) {
        auto it = assoc_fired.find(assoc.individual_id);
        if (it != assoc_fired.end() && assoc.distance > gates.alpha_sd) {
          ++it->second;
        }
      }
    }
  }
  rates.cm = static_cast<double>(cm_fired) / static_cast<double>(rows.size());
  for (const auto& [id, count] : assoc_fired) {
    rates.assoc[id] = static_cast<double>(count) / static_cast<double>(rows.size());
  }
  return rates;
}

double cm_direction_correlation(std::span<const DesignRow> rows, const std::string& associate_id) {
  // Fisher-Lee circular-circular correlation.  The rank-one expansion of
  // sum_{i<j} sin(a_i - a_j) sin(b_i - b_j) over per-row products keeps this
  // O(n); the double-loop definition is kept as a test oracle.
  double sum_ss = 0.0, sum_sc = 0.0, sum_cs = 0.0, sum_cc = 0.0;  // sin/cos of a x sin/cos of b
  double sum_ss_cc = 0.0, sum_sc_cs = 0.0;
  double cos2a = 0.0, sin2a = 0.0, cos2b = 0.0, sin2b = 0.0;
  std::size_t n = 0;

  for (const DesignRow& row : rows) {
    if (!row.cm_direction) continue;
    const AssociateState* match = nullptr;
    for (const AssociateState& assoc : row.associates) {
      if (assoc.individual_id == associate_id && assoc.direction_to) {
        match = &assoc;
        break;
      }
    }
    if (!match) continue;

    double a = row.cm_direction->radians();
    double b = match->direction_to->radians();
    double sa = std::sin(a), ca = std::cos(a), sb = std::sin(b), cb = std::cos(b);
    sum_ss += sa * sb;
    sum_sc += sa * cb;
    sum_cs += ca * sb;
    sum_cc += ca * cb;
    sum_ss_cc += (sa * sb) * (ca * cb);
    sum_sc_cs += (sa * cb) * (ca * sb);
    cos2a += std::cos(2 * a);
    sin2a += std::sin(2 * a);
    cos2b += std::cos(2 * b);
    sin2b += std::sin(2 * b);
    ++n;
  }

  if (n < 3) {
    throw TooFewRows("circular correlation needs at least 3 rows with both directions defined");
  }

  double numerator = sum_ss * sum_cc - sum_sc * sum_cs - (sum_ss_cc - sum_sc_cs);
  double nn = static_cast<double>(n);
  double pairs_a = (nn * nn - (cos2a * cos2a + sin2a * sin2a)) / 4.0;
  double pairs_b = (nn * nn - (cos2b * cos2b + sin2b * sin2b)) / 4.0;
  double denom = std::sqrt(pairs_a * pairs_b);
  if (!(denom > 0.0)) {
    throw ZeroVariance("circular correlation undefined: no angular variation");
  }
  return numerator / denom;
}

namespace {

struct BootstrapSample {
  GateParams gates;
  Weights weights;
};

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ParameterInterval interval_of(const std::vector<double>& values) {
  return {percentile(values, 0.025), percentile(values, 0.975)};
}

}  // namespace

ConfidenceIntervals bootstrap_ci(std::span<const DesignRow> rows, const ModelForm& form,
                                 const DeBounds& bounds, const BootstrapConfig& config) {
  if (config.replicates < 50) {
    throw InvalidConfig("bootstrap needs at least 50 replicates");
  }
  if (rows.empty()) {
    throw EmptyRows("no design rows");
  }

  const std::size_t n = rows.size();
  const auto replicates = static_cast<std::size_t>(config.replicates);
  std::vector<std::optional<BootstrapSample>> samples(replicates);

  int threads = config.threads > 0 ? config.threads : default_thread_count();
  parallel_for(replicates, threads, [&](std::size_t k) {
    std::uint64_t replicate_seed = derive_seed(config.seed, k);
    std::mt19937_64 rng(replicate_seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);

    std::vector<DesignRow> resampled;
    resampled.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      resampled.push_back(rows[pick(rng)]);
    }

    FitConfig fc;
    fc.de = config.de;
    fc.de.seed = derive_seed(replicate_seed, 1);
    fc.threads = 1;  // parallelism lives across replicates
    try {
      FitResult r = fit(resampled, form, bounds, fc);
      samples[k] = BootstrapSample{r.gates, r.weights};
    } catch (const Error&) {
      samples[k] = std::nullopt;
    }
  });

  ConfidenceIntervals ci;
  std::vector<double> alpha_iid, alpha_da, alpha_sd, beta_prev, beta_cm;
  std::map<std::string, std::vector<double>> beta_assoc;
  for (const auto& sample : samples) {
    if (!sample) {
      ++ci.failed_replicates;
      continue;
    }
    alpha_iid.push_back(sample->gates.alpha_iid);
    alpha_da.push_back(sample->gates.alpha_da);
    if (form.has_individual_terms()) {
      alpha_sd.push_back(sample->gates.alpha_sd);
    }
    beta_prev.push_back(sample->weights.beta_prev);
    beta_cm.push_back(sample->weights.beta_cm);
    for (const auto& [id, w] : sample->weights.beta_assoc) {
      beta_assoc[id].push_back(w);
    }
  }
  ci.replicates = static_cast<int>(alpha_iid.size());
  if (ci.replicates == 0) {
    throw Error("bootstrap: every replicate failed");
  }

  ci.alpha_iid = interval_of(alpha_iid);
  ci.alpha_da = interval_of(alpha_da);
  if (form.has_individual_terms()) {
    ci.alpha_sd = interval_of(alpha_sd);
  }
  ci.beta_prev = interval_of(beta_prev);
  ci.beta_cm = interval_of(beta_cm);
  for (auto& [id, values] : beta_assoc) {
    ci.beta_assoc[id] = interval_of(values);
  }
  return ci;
}

}  // namespace forcematch
