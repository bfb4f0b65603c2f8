#include "forcematch/force_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "forcematch/simulator.hpp"
#include "forcematch/extraction.hpp"

using namespace forcematch;

namespace {

struct AssocSpec {
  std::string id;
  std::optional<double> dir;
  double dist;
};

DesignRow make_row(double obs, std::optional<double> prev, double da, double iid,
                   std::optional<double> cm, std::vector<AssocSpec> assoc = {}) {
  DesignRow row;
  row.focal_id = "focal";
  row.t = 0.0;
  row.observed_direction = Angle(obs);
  if (prev) row.previous_bearing = Angle(*prev);
  row.dt_next = 1.0;
  row.dt_prev = 1.0;
  row.da = da;
  row.iid = iid;
  if (cm) row.cm_direction = Angle(*cm);
  for (const AssocSpec& a : assoc) {
    AssociateState s;
    s.individual_id = a.id;
    if (a.dir) s.direction_to = Angle(*a.dir);
    s.distance = a.dist;
    row.associates.push_back(std::move(s));
  }
  return row;
}

// Switching ground truth: the focal follows the group mean exactly when the
// gate fires and its previous bearing otherwise.
std::vector<DesignRow> gate_dataset(std::size_t n, double true_iid, double true_da,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> iid_dist(0.0, 2.0 * true_iid);
  std::uniform_real_distribution<double> da_dist(0.0, 1.0);

  std::vector<DesignRow> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double prev = angle(rng);
    double cm = angle(rng);
    double iid = iid_dist(rng);
    double da = da_dist(rng);
    bool fired = iid > true_iid && da > true_da;
    rows.push_back(make_row(fired ? cm : prev, prev, da, iid, cm));
  }
  return rows;
}

// O(n^2) Fisher-Lee correlation, the independent oracle for the O(n)
// expansion used by the library.
double fisher_lee_quadratic(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den_a = 0.0, den_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      double sa = std::sin(a[i] - a[j]);
      double sb = std::sin(b[i] - b[j]);
      num += sa * sb;
      den_a += sa * sa;
      den_b += sb * sb;
    }
  }
  return num / std::sqrt(den_a * den_b);
}

}  // namespace

TEST_CASE("design matrix gate semantics") {
  ModelForm eq1 = ModelForm::group_only();

  SUBCASE("closed IID gate zeroes the cm column") {
    std::vector<DesignRow> rows{make_row(0.0, 0.0, 1.0, 100.0, kPi / 2)};
    GateParams gates{200.0, 0.0, 0.0};  // iid <= alpha_iid
    auto [a, b] = build_design_matrix(rows, eq1, gates);
    REQUIRE(a.rows() == 2);
    REQUIRE(a.cols() == 2);
    CHECK(a(0, 1) == 0.0);
    CHECK(a(1, 1) == 0.0);
    CHECK(a(0, 0) == doctest::Approx(1.0));
    CHECK(a(1, 0) == doctest::Approx(0.0));
  }

  SUBCASE("open gate produces axis unit vectors") {
    std::vector<DesignRow> rows{make_row(0.3, 0.0, 1.0, 100.0, kPi / 2)};
    GateParams gates{50.0, 0.5, 0.0};
    auto [a, b] = build_design_matrix(rows, eq1, gates);
    CHECK(a(0, 0) == doctest::Approx(1.0));
    CHECK(a(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a(1, 1) == doctest::Approx(1.0));
    CHECK(b[0] == doctest::Approx(std::cos(0.3)));
    CHECK(b[1] == doctest::Approx(std::sin(0.3)));
  }

  SUBCASE("gate inequalities are strict") {
    std::vector<DesignRow> rows{
        make_row(0.0, 0.0, 0.8, 350.0, 1.0, {{"j1", 1.0, 5.0}})};
    ModelForm eq2 = ModelForm::group_plus_individuals({"j1"});
    GateParams gates{350.0, 0.8, 5.0};  // all equalities: nothing fires
    auto [a, b] = build_design_matrix(rows, eq2, gates);
    CHECK(a(0, 1) == 0.0);
    CHECK(a(1, 1) == 0.0);
    CHECK(a(0, 2) == 0.0);
    CHECK(a(1, 2) == 0.0);
  }

  SUBCASE("thirteen associates make fifteen columns") {
    std::vector<std::string> ids;
    std::vector<AssocSpec> specs;
    for (int j = 0; j < 13; ++j) {
      ids.push_back("a" + std::to_string(j));
      specs.push_back({"a" + std::to_string(j), 0.1 * j, 20.0});
    }
    ModelForm eq2 = ModelForm::group_plus_individuals(ids);
    std::vector<DesignRow> rows{make_row(0.0, 0.0, 0.9, 400.0, 0.5, specs)};
    auto [a, b] = build_design_matrix(rows, eq2, GateParams{350, 0.8, 10});
    CHECK(a.cols() == 15);
  }

  SUBCASE("absent previous bearing leaves a zero column entry") {
    std::vector<DesignRow> rows{make_row(0.0, std::nullopt, 1.0, 100.0, 0.5)};
    auto [a, b] = build_design_matrix(rows, eq1, GateParams{1000, 1, 0});
    CHECK(a(0, 0) == 0.0);
    CHECK(a(1, 0) == 0.0);
  }

  SUBCASE("empty rows are rejected") {
    std::vector<DesignRow> empty;
    CHECK_THROWS_AS(build_design_matrix(empty, eq1, GateParams{}), EmptyRows);
  }
}

TEST_CASE("objective equals the explicit design-matrix route") {
  auto rows = gate_dataset(150, 100.0, 0.5, 71);
  ModelForm eq1 = ModelForm::group_only();
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    GateParams gates{u01(rng) * 200.0, u01(rng), 0.0};
    double fast = objective(rows, eq1, gates);
    auto [a, b] = build_design_matrix(rows, eq1, gates);
    double direct = nnls(a, b).rss;
    CHECK(fast == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("self-predicting rows give zero objective regardless of gates") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::vector<DesignRow> rows;
  for (int i = 0; i < 100; ++i) {
    double a = angle(rng);
    rows.push_back(make_row(a, a, 0.5, 100.0, 0.3));
  }
  ModelForm eq1 = ModelForm::group_only();
  CHECK(objective(rows, eq1, GateParams{0, 0, 0}) < 1e-8);
  CHECK(objective(rows, eq1, GateParams{500, 0.9, 0}) < 1e-8);

  ObjectiveEvaluator eval(rows, eq1);
  NnlsResult sol = eval.solve(GateParams{0, 0, 0});
  CHECK(sol.x[0] == doctest::Approx(1.0));
}

TEST_CASE("closed gates reduce to a previous-bearing-only fit") {
  auto rows = gate_dataset(200, 100.0, 0.5, 72);
  ModelForm eq1 = ModelForm::group_only();
  // alpha_iid above every row's IID closes the cm gate on all rows.
  GateParams closed{1e9, 0.0, 0.0};
  auto [a, b] = build_design_matrix(rows, eq1, closed);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    CHECK(a(r, 1) == 0.0);
  }
  CHECK(objective(rows, eq1, closed) == doctest::Approx(nnls(a, b).rss).epsilon(1e-9));
}

TEST_CASE("single perpendicular row with closed gate keeps the full residual") {
  std::vector<DesignRow> rows{make_row(kPi / 2, 0.0, 0.2, 10.0, std::nullopt)};
  ModelForm eq1 = ModelForm::group_only();
  double rss = objective(rows, eq1, GateParams{1e9, 0, 0});
  CHECK(rss == doctest::Approx(1.0));  // beta clipped to 0, ||b||^2 remains
}

TEST_CASE("objective is invariant under row permutation") {
  auto rows = gate_dataset(300, 100.0, 0.5, 73);
  ModelForm eq1 = ModelForm::group_only();
  GateParams gates{80.0, 0.4, 0.0};
  double before = objective(rows, eq1, gates);
  std::mt19937_64 rng(99);
  std::shuffle(rows.begin(), rows.end(), rng);
  double after = objective(rows, eq1, gates);
  CHECK(after == doctest::Approx(before).epsilon(1e-10));
}

TEST_CASE("hybrid fit recovers the gates that generated the data") {
  auto rows = gate_dataset(800, 100.0, 0.5, 74);
  ModelForm eq1 = ModelForm::group_only();
  DeBounds bounds{{0.0, 200.0}, {0.0, 1.0}};
  FitConfig cfg;
  cfg.de.seed = 7;
  cfg.threads = 2;
  FitResult fit_result = fit(rows, eq1, bounds, cfg);

  CHECK(std::abs(fit_result.gates.alpha_iid - 100.0) < 5.0);
  CHECK(std::abs(fit_result.gates.alpha_da - 0.5) < 0.05);
  // Switching data: the blend fit pushes beta_prev toward the foraging
  // fraction and beta_cm toward 1.
  CHECK(fit_result.weights.beta_cm > 0.7);
  CHECK(fit_result.weights.beta_prev > 0.4);
  CHECK(fit_result.weights.beta_prev < 0.95);
  CHECK(fit_result.n_rows == 800);
  CHECK(fit_result.r_squared >= 0.0);
  CHECK(fit_result.r_squared <= 1.0);

  // Trace is monotone nonincreasing.
  for (std::size_t i = 1; i < fit_result.optimizer_trace.size(); ++i) {
    CHECK(fit_result.optimizer_trace[i] <= fit_result.optimizer_trace[i - 1]);
  }

  // The fitted gate selects (almost exactly) the true firing set.
  ActivationRates at_fit = activation_rate(rows, fit_result.gates, eq1);
  ActivationRates at_truth = activation_rate(rows, GateParams{100.0, 0.5, 0.0}, eq1);
  CHECK(std::abs(at_fit.cm - at_truth.cm) < 0.01);
}

TEST_CASE("fit on self-predicting rows is essentially perfect") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::vector<DesignRow> rows;
  for (int i = 0; i < 60; ++i) {
    double a = angle(rng);
    rows.push_back(make_row(a, a, 0.5, 100.0, 0.3));
  }
  ModelForm eq1 = ModelForm::group_only();
  FitConfig cfg;
  cfg.de.seed = 21;
  cfg.de.max_generations = 60;
  FitResult r = fit(rows, eq1, DeBounds{{0, 200}, {0, 1}}, cfg);
  CHECK(r.weights.beta_prev == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.rss < 1e-8);
  CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.angular_sse < 1e-8);
  CHECK(r.angular_sse_excluded == 0);
}

TEST_CASE("fit validates bounds dimension") {
  auto rows = gate_dataset(20, 100.0, 0.5, 75);
  CHECK_THROWS_AS(fit(rows, ModelForm::group_only(), DeBounds{{0, 1}}, FitConfig{}),
                  InvalidBounds);
  CHECK_THROWS_AS(
      fit(rows, ModelForm::group_plus_individuals({"x"}), DeBounds{{0, 1}, {0, 1}}, FitConfig{}),
      InvalidBounds);
}

TEST_CASE("r_squared endpoints and errors") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::vector<DesignRow> rows;
  for (int i = 0; i < 40; ++i) {
    double a = angle(rng);
    rows.push_back(make_row(a, a, 0.5, 100.0, std::nullopt));
  }
  ModelForm eq1 = ModelForm::group_only();

  Weights perfect{1.0, 0.0, {}};
  CHECK(r_squared(rows, eq1, GateParams{1e9, 0, 0}, perfect) == doctest::Approx(1.0));

  Weights zero{0.0, 0.0, {}};
  CHECK(r_squared(rows, eq1, GateParams{1e9, 0, 0}, zero) <= 1e-12);

  std::vector<DesignRow> constant;
  for (int i = 0; i < 10; ++i) constant.push_back(make_row(0.4, 0.4, 0.5, 100.0, std::nullopt));
  CHECK_THROWS_AS(r_squared(constant, eq1, GateParams{}, perfect), ZeroVariance);

  std::vector<DesignRow> one{make_row(0.1, 0.1, 0.5, 100.0, std::nullopt)};
  CHECK_THROWS_AS(r_squared(one, eq1, GateParams{}, perfect), TooFewRows);
}

TEST_CASE("nested model never fits worse at the optimum") {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> dist(1.0, 9.0);
  auto rows = gate_dataset(300, 100.0, 0.5, 76);
  for (DesignRow& row : rows) {
    AssociateState extra;
    extra.individual_id = "j1";
    extra.direction_to = Angle(angle(rng));
    extra.distance = dist(rng);
    row.associates.push_back(std::move(extra));
  }

  FitConfig cfg;
  cfg.de.seed = 30;
  cfg.threads = 2;
  FitResult r1 = fit(rows, ModelForm::group_only(), DeBounds{{0, 200}, {0, 1}}, cfg);
  FitResult r2 = fit(rows, ModelForm::group_plus_individuals({"j1"}),
                     DeBounds{{0, 200}, {0, 1}, {0, 10}}, cfg);
  CHECK(r2.r_squared_raw >= r1.r_squared_raw - 0.01);
}

TEST_CASE("activation rates") {
  ModelForm eq1 = ModelForm::group_only();
  std::vector<DesignRow> rows;
  rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.5));
  rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.5));
  rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.5));
  rows.push_back(make_row(0.0, 0.0, 0.0, 400.0, std::nullopt));  // cm undefined

  // Zero thresholds: every row with a defined cm fires.
  ActivationRates zero = activation_rate(rows, GateParams{0, 0, 0}, eq1);
  CHECK(zero.cm == doctest::Approx(0.75));
  CHECK(zero.assoc.empty());

  // DA can never strictly exceed 1.
  ActivationRates closed = activation_rate(rows, GateParams{0, 1.0, 0}, eq1);
  CHECK(closed.cm == 0.0);

  ModelForm eq2 = ModelForm::group_plus_individuals({"j1", "j2"});
  std::vector<DesignRow> assoc_rows;
  assoc_rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.5, {{"j1", 0.3, 2.0}, {"j2", 0.4, 8.0}}));
  assoc_rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.5, {{"j1", 0.3, 6.0}}));
  ActivationRates rates = activation_rate(assoc_rows, GateParams{0, 0, 5.0}, eq2);
  CHECK(rates.assoc.at("j1") == doctest::Approx(0.5));
  CHECK(rates.assoc.at("j2") == doctest::Approx(0.5));

  std::vector<DesignRow> empty;
  CHECK_THROWS_AS(activation_rate(empty, GateParams{}, eq1), EmptyRows);
}

TEST_CASE("cm-direction correlation") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> angle(-kPi, kPi);

  SUBCASE("associate sitting exactly at the group mean gives 1") {
    std::vector<DesignRow> rows;
    for (int i = 0; i < 50; ++i) {
      double cm = angle(rng);
      rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, cm, {{"j1", cm, 10.0}}));
    }
    CHECK(cm_direction_correlation(rows, "j1") == doctest::Approx(1.0));
  }

  SUBCASE("a constant rotation preserves the correlation") {
    std::vector<DesignRow> rows;
    for (int i = 0; i < 50; ++i) {
      double cm = angle(rng);
      rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, cm,
                              {{"j1", wrap_angle(cm + 1.1), 10.0}}));
    }
    CHECK(cm_direction_correlation(rows, "j1") == doctest::Approx(1.0));
  }

  SUBCASE("independent directions decorrelate") {
    std::vector<DesignRow> rows;
    for (int i = 0; i < 1000; ++i) {
      rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, angle(rng), {{"j1", angle(rng), 10.0}}));
    }
    CHECK(std::abs(cm_direction_correlation(rows, "j1")) < 0.1);
  }

  SUBCASE("matches the quadratic-time definition") {
    std::vector<DesignRow> rows;
    std::vector<double> a, b;
    for (int i = 0; i < 200; ++i) {
      double cm = angle(rng);
      double to = wrap_angle(0.7 * cm + 0.3 * angle(rng));
      rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, cm, {{"j1", to, 10.0}}));
      a.push_back(cm);
      b.push_back(to);
    }
    double fast = cm_direction_correlation(rows, "j1");
    double slow = fisher_lee_quadratic(a, b);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
  }

  SUBCASE("too few rows") {
    std::vector<DesignRow> rows;
    rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.1, {{"j1", 0.2, 10.0}}));
    rows.push_back(make_row(0.0, 0.0, 0.9, 400.0, 0.3, {{"j1", 0.4, 10.0}}));
    CHECK_THROWS_AS(cm_direction_correlation(rows, "j1"), TooFewRows);
  }
}

TEST_CASE("bootstrap intervals") {
  SUBCASE("degenerate resampling of noiseless rows pins beta_prev at 1") {
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::vector<DesignRow> rows;
    for (int i = 0; i < 80; ++i) {
      double a = angle(rng);
      rows.push_back(make_row(a, a, 0.5, 100.0, 0.3));
    }
    BootstrapConfig cfg;
    cfg.replicates = 60;
    cfg.seed = 5;
    cfg.de.max_generations = 30;
    cfg.de.pop_size = 8;
    ConfidenceIntervals ci =
        bootstrap_ci(rows, ModelForm::group_only(), DeBounds{{0, 200}, {0, 1}}, cfg);
    CHECK(ci.failed_replicates == 0);
    CHECK(ci.beta_prev.hi - ci.beta_prev.lo < 0.01);
    CHECK(ci.beta_prev.contains(1.0));
  }

  SUBCASE("point estimates fall inside their own intervals") {
    auto rows = gate_dataset(400, 100.0, 0.5, 77);
    ModelForm eq1 = ModelForm::group_only();
    DeBounds bounds{{0, 200}, {0, 1}};

    FitConfig fit_cfg;
    fit_cfg.de.seed = 8;
    fit_cfg.threads = 2;
    FitResult point = fit(rows, eq1, bounds, fit_cfg);

    BootstrapConfig cfg;
    cfg.replicates = 50;
    cfg.seed = 6;
    cfg.de.max_generations = 120;
    cfg.de.pop_size = 16;
    cfg.threads = 2;
    ConfidenceIntervals ci = bootstrap_ci(rows, eq1, bounds, cfg);

    CHECK(ci.alpha_iid.contains(point.gates.alpha_iid));
    CHECK(ci.alpha_da.contains(point.gates.alpha_da));
    CHECK(ci.beta_prev.contains(point.weights.beta_prev));
    CHECK(ci.beta_cm.contains(point.weights.beta_cm));
  }

  SUBCASE("replicate count below 50 is rejected") {
    auto rows = gate_dataset(30, 100.0, 0.5, 78);
    BootstrapConfig cfg;
    cfg.replicates = 10;
    CHECK_THROWS_AS(
        bootstrap_ci(rows, ModelForm::group_only(), DeBounds{{0, 200}, {0, 1}}, cfg),
        InvalidConfig);
  }
}

TEST_CASE("rigid motions and rescaling leave the objective invariant") {
  SimConfig sim;
  sim.n_agents = 5;
  sim.duration = 400;
  sim.iso_iid = 120;  // 4 associates: gate reachable for a small group
  sim.seed = 2;
  SimOutput out = simulate(sim);
  auto rows = extract_design_rows(out.dataset, "agent00");
  REQUIRE(rows.size() > 100);

  auto transform_dataset = [&](double phi, Vec2 shift, double scale) {
    GroupDataset moved(out.dataset.crs_note());
    for (const auto& [id, traj] : out.dataset.trajectories()) {
      Trajectory t(id);
      for (const Fix& f : traj.fixes()) {
        double x = scale * (f.x * std::cos(phi) - f.y * std::sin(phi)) + shift.x;
        double y = scale * (f.x * std::sin(phi) + f.y * std::cos(phi)) + shift.y;
        t.append({f.t, x, y});
      }
      moved.add(std::move(t));
    }
    return moved;
  };

  ModelForm eq2 = ModelForm::group_plus_individuals(
      {"agent01", "agent02", "agent03", "agent04"});

  SUBCASE("rotation plus translation") {
    GroupDataset moved = transform_dataset(0.7, {311.0, -42.0}, 1.0);
    auto moved_rows = extract_design_rows(moved, "agent00");
    REQUIRE(moved_rows.size() == rows.size());
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
      GateParams gates{u01(rng) * 300.0, u01(rng), u01(rng) * 10.0};
      double base = objective(rows, eq2, gates);
      double transformed = objective(moved_rows, eq2, gates);
      CHECK(transformed == doctest::Approx(base).epsilon(1e-6));
    }
    ObjectiveEvaluator e1(rows, eq2), e2(moved_rows, eq2);
    GateParams gates{120.0, 0.8, 2.0};
    NnlsResult s1 = e1.solve(gates), s2 = e2.solve(gates);
    for (std::size_t j = 0; j < s1.x.size(); ++j) {
      CHECK(s2.x[j] == doctest::Approx(s1.x[j]).epsilon(1e-5));
    }
  }

  SUBCASE("doubling every coordinate doubles the metric gates only") {
    GroupDataset scaled = transform_dataset(0.0, {0.0, 0.0}, 2.0);
    auto scaled_rows = extract_design_rows(scaled, "agent00");
    REQUIRE(scaled_rows.size() == rows.size());
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
      GateParams gates{u01(rng) * 300.0, u01(rng), u01(rng) * 10.0};
      GateParams doubled{2.0 * gates.alpha_iid, gates.alpha_da, 2.0 * gates.alpha_sd};
      CHECK(objective(scaled_rows, eq2, doubled) ==
            doctest::Approx(objective(rows, eq2, gates)).epsilon(1e-9));
    }
  }
}
