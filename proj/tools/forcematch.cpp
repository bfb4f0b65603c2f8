// forcematch: simulate group movement, thin it to observer-like sparseness,
// extract focal design rows, fit conditional direction models, and report
// recovery results.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "forcematch/dataset_io.hpp"
#include "forcematch/extraction.hpp"
#include "forcematch/force_model.hpp"
#include "forcematch/parallel.hpp"
#include "forcematch/seeding.hpp"
#include "forcematch/simulator.hpp"
#include "forcematch/sparsifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace forcematch;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// Shared option blocks

void add_sim_options(CLI::App* cmd, SimConfig& cfg) {
  cmd->add_option("--agents", cfg.n_agents, "Number of agents")->capture_default_str();
  cmd->add_option("--duration", cfg.duration, "Simulated seconds")->capture_default_str();
  cmd->add_option("--step", cfg.step, "Seconds between recorded fixes")->capture_default_str();
  cmd->add_option("--iso-iid", cfg.iso_iid, "Isolation IID threshold (m)")
      ->capture_default_str();
  cmd->add_option("--iso-da", cfg.iso_da, "Isolation DA threshold")->capture_default_str();
  cmd->add_option("--speed", cfg.speed, "Agent speed (m/s)")->capture_default_str();
  cmd->add_option("--perception-radius", cfg.perception_radius, "Patch perception radius (m)")
      ->capture_default_str();
  cmd->add_option("--arena-width", cfg.arena_width, "Arena width (m)")->capture_default_str();
  cmd->add_option("--arena-height", cfg.arena_height, "Arena height (m)")
      ->capture_default_str();
  cmd->add_option("--patch-count", cfg.patch_count, "Live food patches")->capture_default_str();
  cmd->add_option("--patch-radius", cfg.patch_radius, "Patch consumption radius (m)")
      ->capture_default_str();
  cmd->add_option("--patch-lifetime", cfg.patch_lifetime, "Seconds before a patch respawns")
      ->capture_default_str();
  cmd->add_option("--heading-noise", cfg.heading_noise, "Straight-line heading noise (rad)")
      ->capture_default_str();
  cmd->add_option("--start-spread", cfg.start_spread, "Initial placement square (m)")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
}

struct FitCliOptions {
  std::string model = "eq2";
  double alpha_iid_min = 0.0, alpha_iid_max = 1000.0;
  double alpha_da_min = 0.0, alpha_da_max = 1.0;
  double alpha_sd_min = 0.0, alpha_sd_max = 10.0;
  DeConfig de;
  int threads = 0;
  int bootstrap = 0;
  std::uint64_t bootstrap_seed = 0;
  int bootstrap_pop_size = 0;        // 0 = inherit
  int bootstrap_max_generations = 0; // 0 = inherit
};

void add_fit_options(CLI::App* cmd, FitCliOptions& opt) {
  cmd->add_option("--model", opt.model, "eq1 (group only) or eq2 (group + individuals)")
      ->check(CLI::IsMember({"eq1", "eq2"}))
      ->capture_default_str();
  cmd->add_option("--alpha-iid-min", opt.alpha_iid_min)->capture_default_str();
  cmd->add_option("--alpha-iid-max", opt.alpha_iid_max)->capture_default_str();
  cmd->add_option("--alpha-da-min", opt.alpha_da_min)->capture_default_str();
  cmd->add_option("--alpha-da-max", opt.alpha_da_max)->capture_default_str();
  cmd->add_option("--alpha-sd-min", opt.alpha_sd_min)->capture_default_str();
  cmd->add_option("--alpha-sd-max", opt.alpha_sd_max)->capture_default_str();
  cmd->add_option("--pop-size", opt.de.pop_size, "DE population (0 = 10x dimension)")
      ->capture_default_str();
  cmd->add_option("--max-generations", opt.de.max_generations)->capture_default_str();
  cmd->add_option("--scale-factor", opt.de.scale_factor)->capture_default_str();
  cmd->add_option("--crossover-rate", opt.de.crossover_rate)->capture_default_str();
  cmd->add_option("--tol", opt.de.tol)->capture_default_str();
  cmd->add_option("--patience", opt.de.patience)->capture_default_str();
  cmd->add_option("--seed", opt.de.seed, "Optimizer seed")->capture_default_str();
  cmd->add_option("--threads", opt.threads,
                  "Concurrent objective evaluations (0 = FORCEMATCH_THREADS / hardware)")
      ->capture_default_str();
  cmd->add_option("--bootstrap", opt.bootstrap, "Bootstrap replicates (0 = off, else >= 50)")
      ->capture_default_str();
  cmd->add_option("--bootstrap-seed", opt.bootstrap_seed)->capture_default_str();
  cmd->add_option("--bootstrap-pop-size", opt.bootstrap_pop_size,
                  "Replicate DE population (0 = inherit)")
      ->capture_default_str();
  cmd->add_option("--bootstrap-max-generations", opt.bootstrap_max_generations,
                  "Replicate DE budget (0 = inherit)")
      ->capture_default_str();
}

DeBounds bounds_from(const FitCliOptions& opt, const ModelForm& form) {
  DeBounds bounds{{opt.alpha_iid_min, opt.alpha_iid_max}, {opt.alpha_da_min, opt.alpha_da_max}};
  if (form.has_individual_terms()) {
    bounds.emplace_back(opt.alpha_sd_min, opt.alpha_sd_max);
  }
  return bounds;
}

ModelForm form_for(const std::string& model, const GroupDataset& data,
                   const std::string& focal) {
  if (model == "eq1") {
    return ModelForm::group_only();
  }
  std::vector<std::string> ids;
  for (const auto& [id, traj] : data.trajectories()) {
    if (id != focal) ids.push_back(id);
  }
  return ModelForm::group_plus_individuals(std::move(ids));
}

ModelForm form_for_rows(const std::string& model, std::span<const DesignRow> rows) {
  if (model == "eq1") {
    return ModelForm::group_only();
  }
  std::set<std::string> ids;
  for (const DesignRow& row : rows) {
    for (const AssociateState& assoc : row.associates) ids.insert(assoc.individual_id);
  }
  if (ids.empty()) {
    throw EmptyRows("no associates found in the design rows");
  }
  return ModelForm::group_plus_individuals({ids.begin(), ids.end()});
}

FitResult run_fit(std::span<const DesignRow> rows, const ModelForm& form,
                  const FitCliOptions& opt) {
  FitConfig cfg;
  cfg.de = opt.de;
  cfg.threads = opt.threads;
  FitResult result = fit(rows, form, bounds_from(opt, form), cfg);

  if (opt.bootstrap > 0) {
    BootstrapConfig bs;
    bs.replicates = opt.bootstrap;
    bs.seed = opt.bootstrap_seed;
    bs.de = opt.de;
    if (opt.bootstrap_pop_size > 0) bs.de.pop_size = opt.bootstrap_pop_size;
    if (opt.bootstrap_max_generations > 0) bs.de.max_generations = opt.bootstrap_max_generations;
    bs.threads = opt.threads;
    result.ci = bootstrap_ci(rows, form, bounds_from(opt, form), bs);
  }
  return result;
}

// ---------------------------------------------------------------------------
// report

std::string format_interval(const std::optional<ParameterInterval>& iv) {
  if (!iv) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(%.6g, %.6g)", iv->lo, iv->hi);
  return buf;
}

void write_report(const fs::path& out_dir,
                  const std::vector<std::pair<std::string, FitResult>>& fits) {
  fs::create_directories(out_dir);
  std::ofstream coeff(out_dir / "coefficients.csv");
  coeff << "label,factor,estimate,ci_lo,ci_hi\n";
  std::ofstream gates(out_dir / "gates.csv");
  gates << "label,parameter,estimate,ci_lo,ci_hi\n";
  std::ofstream summary(out_dir / "summary.txt");

  auto emit_coeff = [&](const std::string& label, const std::string& factor, double value,
                        const std::optional<ParameterInterval>& iv) {
    coeff << label << ',' << factor << ',' << value << ',';
    if (iv) coeff << iv->lo;
    coeff << ',';
    if (iv) coeff << iv->hi;
    coeff << '\n';
  };
  auto emit_gate = [&](const std::string& label, const std::string& name, double value,
                       const std::optional<ParameterInterval>& iv) {
    gates << label << ',' << name << ',' << value << ',';
    if (iv) gates << iv->lo;
    gates << ',';
    if (iv) gates << iv->hi;
    gates << '\n';
  };

  for (const auto& [label, r] : fits) {
    std::optional<ParameterInterval> none;
    auto ci = r.ci;
    emit_coeff(label, "b", r.weights.beta_prev, ci ? std::optional(ci->beta_prev) : none);
    emit_coeff(label, "cm", r.weights.beta_cm, ci ? std::optional(ci->beta_cm) : none);
    for (const auto& [id, w] : r.weights.beta_assoc) {
      std::optional<ParameterInterval> iv;
      if (ci) {
        auto it = ci->beta_assoc.find(id);
        if (it != ci->beta_assoc.end()) iv = it->second;
      }
      emit_coeff(label, id, w, iv);
    }
    emit_gate(label, "alpha_iid", r.gates.alpha_iid, ci ? std::optional(ci->alpha_iid) : none);
    emit_gate(label, "alpha_da", r.gates.alpha_da, ci ? std::optional(ci->alpha_da) : none);
    if (r.model_form.has_individual_terms()) {
      emit_gate(label, "alpha_sd", r.gates.alpha_sd, ci ? ci->alpha_sd : none);
    }

    summary << "== " << label << " ==\n";
    summary << "model: "
            << (r.model_form.variant == ModelVariant::group_only ? "eq1 (group only)"
                                                                 : "eq2 (group + individuals)")
            << ", rows: " << r.n_rows << "\n";
    summary << "alpha_iid = " << r.gates.alpha_iid;
    if (r.ci) summary << "  CI " << format_interval(r.ci->alpha_iid);
    summary << "\nalpha_da  = " << r.gates.alpha_da;
    if (r.ci) summary << "  CI " << format_interval(r.ci->alpha_da);
    if (r.model_form.has_individual_terms()) {
      summary << "\nalpha_sd  = " << r.gates.alpha_sd;
      if (r.ci && r.ci->alpha_sd) summary << "  CI " << format_interval(r.ci->alpha_sd);
    }
    summary << "\nbeta_prev = " << r.weights.beta_prev << "\nbeta_cm   = " << r.weights.beta_cm
            << "\n";
    double max_assoc = 0.0;
    std::string max_id;
    for (const auto& [id, w] : r.weights.beta_assoc) {
      if (w >= max_assoc) {
        max_assoc = w;
        max_id = id;
      }
    }
    if (!r.weights.beta_assoc.empty()) {
      summary << "largest beta_assoc: " << max_id << " = " << max_assoc << "\n";
    }
    summary << "r_squared = " << r.r_squared << " (raw " << r.r_squared_raw << ")\n";
    summary << "angular_sse = " << r.angular_sse << " over "
            << (r.n_rows - r.angular_sse_excluded) << " rows\n";
    summary << "cm activation rate at fitted gates = " << r.activation_rate_cm << "\n";
    if (r.ci) {
      summary << "bootstrap: " << r.ci->replicates << " replicates, "
              << r.ci->failed_replicates << " failed\n";
    }
    summary << "\n";
  }
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineConfig {
  SimConfig sim;
  std::string focal = "agent00";
  std::string model = "eq2";
  FitCliOptions fit;
  bool fit_dense = true;
  std::vector<double> degrade_targets_min{1, 5, 10, 15, 20};
  std::vector<double> extent_hours;
  double extent_target_min = 10.0;
  double min_step = 0.1;
  bool write_rows = false;
  std::string out_dir = "pipeline_out";
};

// Paper-reported focal row counts for the default 48 h / 14-agent recovery
// experiment, used for the +-15% sanity line in the summary.
const std::map<double, double> kReferenceRowCounts{
    {1.0, 3247.0}, {5.0, 610.0}, {10.0, 323.0}, {15.0, 212.0}, {20.0, 151.0}};

PipelineConfig parse_pipeline_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) {
    return cfg;
  }
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open config '" + path + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config '" + path + "' is not valid JSON: " + e.what());
  }

  const std::set<std::string> known{
      "seed",          "focal",          "n_agents",       "duration",
      "step",          "iso_iid",        "iso_da",         "speed",
      "perception_radius", "arena_width", "arena_height",  "patch_count",
      "patch_radius",  "patch_lifetime", "heading_noise",  "start_spread",
      "model",         "alpha_iid_min",  "alpha_iid_max",  "alpha_da_min",
      "alpha_da_max",  "alpha_sd_min",   "alpha_sd_max",   "de_pop_size",
      "de_max_generations", "de_scale_factor", "de_crossover_rate", "de_tol",
      "de_patience",   "de_seed",        "threads",        "fit_dense",
      "degrade_targets_min", "extent_hours", "extent_target_min",
      "bootstrap_replicates", "bootstrap_seed", "bootstrap_pop_size",
      "bootstrap_max_generations", "min_step", "write_rows", "out_dir"};
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) {
      throw Error("config '" + path + "': unknown key '" + key + "'");
    }
  }

  try {
    cfg.sim.seed = j.value("seed", cfg.sim.seed);
    cfg.focal = j.value("focal", cfg.focal);
    cfg.sim.n_agents = j.value("n_agents", cfg.sim.n_agents);
    cfg.sim.duration = j.value("duration", cfg.sim.duration);
    cfg.sim.step = j.value("step", cfg.sim.step);
    cfg.sim.iso_iid = j.value("iso_iid", cfg.sim.iso_iid);
    cfg.sim.iso_da = j.value("iso_da", cfg.sim.iso_da);
    cfg.sim.speed = j.value("speed", cfg.sim.speed);
    cfg.sim.perception_radius = j.value("perception_radius", cfg.sim.perception_radius);
    cfg.sim.arena_width = j.value("arena_width", cfg.sim.arena_width);
    cfg.sim.arena_height = j.value("arena_height", cfg.sim.arena_height);
    cfg.sim.patch_count = j.value("patch_count", cfg.sim.patch_count);
    cfg.sim.patch_radius = j.value("patch_radius", cfg.sim.patch_radius);
    cfg.sim.patch_lifetime = j.value("patch_lifetime", cfg.sim.patch_lifetime);
    cfg.sim.heading_noise = j.value("heading_noise", cfg.sim.heading_noise);
    cfg.sim.start_spread = j.value("start_spread", cfg.sim.start_spread);
    cfg.model = j.value("model", cfg.model);
    cfg.fit.model = cfg.model;
    cfg.fit.alpha_iid_min = j.value("alpha_iid_min", cfg.fit.alpha_iid_min);
    cfg.fit.alpha_iid_max = j.value("alpha_iid_max", cfg.fit.alpha_iid_max);
    cfg.fit.alpha_da_min = j.value("alpha_da_min", cfg.fit.alpha_da_min);
    cfg.fit.alpha_da_max = j.value("alpha_da_max", cfg.fit.alpha_da_max);
    cfg.fit.alpha_sd_min = j.value("alpha_sd_min", cfg.fit.alpha_sd_min);
    cfg.fit.alpha_sd_max = j.value("alpha_sd_max", cfg.fit.alpha_sd_max);
    cfg.fit.de.pop_size = j.value("de_pop_size", cfg.fit.de.pop_size);
    cfg.fit.de.max_generations = j.value("de_max_generations", cfg.fit.de.max_generations);
    cfg.fit.de.scale_factor = j.value("de_scale_factor", cfg.fit.de.scale_factor);
    cfg.fit.de.crossover_rate = j.value("de_crossover_rate", cfg.fit.de.crossover_rate);
    cfg.fit.de.tol = j.value("de_tol", cfg.fit.de.tol);
    cfg.fit.de.patience = j.value("de_patience", cfg.fit.de.patience);
    cfg.fit.de.seed = j.value("de_seed", cfg.fit.de.seed);
    cfg.fit.threads = j.value("threads", cfg.fit.threads);
    cfg.fit_dense = j.value("fit_dense", cfg.fit_dense);
    cfg.degrade_targets_min =
        j.value("degrade_targets_min", cfg.degrade_targets_min);
    cfg.extent_hours = j.value("extent_hours", cfg.extent_hours);
    cfg.extent_target_min = j.value("extent_target_min", cfg.extent_target_min);
    cfg.fit.bootstrap = j.value("bootstrap_replicates", cfg.fit.bootstrap);
    cfg.fit.bootstrap_seed = j.value("bootstrap_seed", cfg.fit.bootstrap_seed);
    cfg.fit.bootstrap_pop_size = j.value("bootstrap_pop_size", cfg.fit.bootstrap_pop_size);
    cfg.fit.bootstrap_max_generations =
        j.value("bootstrap_max_generations", cfg.fit.bootstrap_max_generations);
    cfg.min_step = j.value("min_step", cfg.min_step);
    cfg.write_rows = j.value("write_rows", cfg.write_rows);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
  } catch (const json::exception& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  if (cfg.model != "eq1" && cfg.model != "eq2") {
    throw Error("config: model must be 'eq1' or 'eq2'");
  }
  return cfg;
}

int run_pipeline(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> summary_lines;
  auto note = [&](bool ok, const std::string& what) {
    summary_lines.push_back(std::string(ok ? "PASS  " : "FAIL  ") + what);
  };
  auto info = [&](const std::string& what) { summary_lines.push_back("      " + what); };

  std::cerr << "simulating " << cfg.sim.duration << " s with " << cfg.sim.n_agents
            << " agents...\n";
  SimOutput dense = simulate(cfg.sim);
  write_dataset((fs::path(cfg.out_dir) / "dense.csv").string(), dense.dataset);
  write_behavior_log((fs::path(cfg.out_dir) / "behavior.csv").string(), dense.log);

  ExtractionOptions extraction;
  extraction.min_step = cfg.min_step;
  auto dense_rows = extract_design_rows(dense.dataset, cfg.focal, extraction);
  info("dense rows: " + std::to_string(dense_rows.size()));

  double truth_activation = ground_truth_activation(dense.log, cfg.focal);
  info("ground-truth cohesion fraction: " + std::to_string(truth_activation));

  ModelForm form = form_for(cfg.model, dense.dataset, cfg.focal);
  std::vector<std::pair<std::string, FitResult>> fits;

  if (cfg.fit_dense) {
    std::cerr << "fitting dense rows (" << dense_rows.size() << ")...\n";
    FitCliOptions dense_opts = cfg.fit;
    dense_opts.bootstrap = 0;  // dense CIs are out of budget by default
    FitResult r = run_fit(dense_rows, form, dense_opts);
    write_fit_result((fs::path(cfg.out_dir) / "fit_dense.json").string(), r);
    fits.emplace_back("dense", r);

    note(std::abs(r.gates.alpha_iid - cfg.sim.iso_iid) <= 10.0,
         "dense alpha_iid within 10 m of truth (got " + std::to_string(r.gates.alpha_iid) +
             ")");
    note(std::abs(r.gates.alpha_da - cfg.sim.iso_da) <= 0.02,
         "dense alpha_da within 0.02 of truth (got " + std::to_string(r.gates.alpha_da) + ")");
    if (form.has_individual_terms()) {
      double worst = 0.0;
      for (const auto& [id, w] : r.weights.beta_assoc) worst = std::max(worst, w);
      note(worst < 0.05 * r.weights.beta_cm,
           "dense: every associate weight under 5% of the group weight (max " +
               std::to_string(worst) + " vs cm " + std::to_string(r.weights.beta_cm) + ")");
    }
  }

  for (double target : cfg.degrade_targets_min) {
    std::string label = std::to_string(static_cast<int>(target)) + "min";
    std::cerr << "degrading to " << target << " min mean revisit...\n";
    GroupDataset sparse =
        degrade(dense.dataset, distribution_for_target_mean(target),
                derive_seed(cfg.sim.seed, static_cast<std::uint64_t>(std::llround(target * 60))));
    auto rows = extract_design_rows(sparse, cfg.focal, extraction);
    if (cfg.write_rows) {
      write_design_rows((fs::path(cfg.out_dir) / ("rows_" + label + ".csv")).string(), rows);
    }
    write_dataset((fs::path(cfg.out_dir) / ("sparse_" + label + ".csv")).string(), sparse);

    auto expected = kReferenceRowCounts.find(target);
    if (expected != kReferenceRowCounts.end() && cfg.sim.duration == 172800.0) {
      double ratio = static_cast<double>(rows.size()) / expected->second;
      note(ratio >= 0.85 && ratio <= 1.15,
           label + " row count within 15% of reference " +
               std::to_string(static_cast<int>(expected->second)) + " (got " +
               std::to_string(rows.size()) + ")");
    } else {
      info(label + " rows: " + std::to_string(rows.size()));
    }

    std::cerr << "fitting " << label << " (" << rows.size() << " rows)...\n";
    FitCliOptions sparse_opts = cfg.fit;
    sparse_opts.bootstrap = 0;
    FitResult r = run_fit(rows, form, sparse_opts);
    write_fit_result((fs::path(cfg.out_dir) / ("fit_" + label + ".json")).string(), r);
    fits.emplace_back(label, r);

    if (form.has_individual_terms()) {
      double worst = 0.0;
      for (const auto& [id, w] : r.weights.beta_assoc) worst = std::max(worst, w);
      note(r.weights.beta_cm > worst,
           label + ": group weight strictly dominates every associate weight (cm " +
               std::to_string(r.weights.beta_cm) + ", max assoc " + std::to_string(worst) +
               ")");
    }
  }

  for (double hours : cfg.extent_hours) {
    std::string label = std::to_string(static_cast<int>(hours)) + "h";
    SimConfig extended = cfg.sim;
    extended.duration = hours * 3600.0;
    extended.seed = derive_seed(cfg.sim.seed, "extent:" + label);
    std::cerr << "extent run " << label << "...\n";
    SimOutput run = simulate(extended);
    GroupDataset sparse = degrade(run.dataset, distribution_for_target_mean(cfg.extent_target_min),
                                  derive_seed(extended.seed, 17));
    auto rows = extract_design_rows(sparse, cfg.focal, extraction);
    info(label + " rows at " + std::to_string(cfg.extent_target_min) +
         " min: " + std::to_string(rows.size()));

    FitResult r = run_fit(rows, form, cfg.fit);
    write_fit_result((fs::path(cfg.out_dir) / ("fit_extent_" + label + ".json")).string(), r);
    fits.emplace_back(label, r);

    if (r.ci) {
      bool all_contain_zero = true;
      for (const auto& [id, iv] : r.ci->beta_assoc) {
        all_contain_zero = all_contain_zero && iv.contains(0.0);
      }
      note(all_contain_zero, label + ": every associate weight CI contains 0");
    }
    note(std::abs(r.gates.alpha_iid - cfg.sim.iso_iid) <= 25.0,
         label + " alpha_iid within 25 m of truth (got " + std::to_string(r.gates.alpha_iid) +
             ")");
    note(std::abs(r.gates.alpha_da - cfg.sim.iso_da) <= 0.05,
         label + " alpha_da within 0.05 of truth (got " + std::to_string(r.gates.alpha_da) +
             ")");
  }

  write_report(cfg.out_dir, fits);

  std::ofstream summary(fs::path(cfg.out_dir) / "recovery_summary.txt");
  for (const std::string& line : summary_lines) {
    summary << line << '\n';
    std::cout << line << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Force matching for sparse group movement data"};
  app.require_subcommand(1);

  // simulate ---------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a ground-truth group dataset");
  SimConfig sim_cfg;
  std::string sim_out, sim_log;
  add_sim_options(sim_cmd, sim_cfg);
  sim_cmd->add_option("--out", sim_out, "Dataset CSV path")->required();
  sim_cmd->add_option("--log", sim_log, "Behavior log CSV path");

  // degrade ----------------------------------------------------------------
  auto* deg_cmd = app.add_subcommand("degrade", "Resample a dense dataset at sparse revisits");
  std::string deg_in, deg_out;
  double deg_target = 10.0, deg_meanlog = 0.0, deg_sdlog = 0.6;
  std::uint64_t deg_seed = 0;
  bool deg_use_meanlog = false;
  deg_cmd->add_option("--in", deg_in, "Dense dataset CSV")->required();
  deg_cmd->add_option("--out", deg_out, "Sparse dataset CSV")->required();
  deg_cmd->add_option("--target-mean", deg_target, "Target mean revisit time (minutes)")
      ->capture_default_str();
  deg_cmd->add_option("--meanlog", deg_meanlog, "Lognormal meanlog (overrides --target-mean)");
  deg_cmd->add_option("--sdlog", deg_sdlog, "Lognormal sdlog")->capture_default_str();
  deg_cmd->add_option("--seed", deg_seed, "RNG seed")->capture_default_str();
  deg_cmd->callback([&] { deg_use_meanlog = deg_cmd->count("--meanlog") > 0; });

  // extract ----------------------------------------------------------------
  auto* ext_cmd = app.add_subcommand("extract", "Build focal design rows from a dataset");
  std::string ext_in, ext_focal, ext_out;
  ExtractionOptions ext_opts;
  double ext_max_dt_next = 0, ext_max_dt_prev = 0, ext_max_gap = 0;
  bool ext_iso = false;
  ext_cmd->add_option("--in", ext_in, "Dataset CSV")->required();
  ext_cmd->add_option("--focal", ext_focal, "Focal individual id")->required();
  ext_cmd->add_option("--out", ext_out, "Design rows CSV")->required();
  ext_cmd->add_option("--max-dt-next", ext_max_dt_next, "Drop rows with larger next gaps (s)");
  ext_cmd->add_option("--max-dt-prev", ext_max_dt_prev, "Drop rows with larger previous gaps (s)");
  ext_cmd->add_option("--max-interpolation-gap", ext_max_gap,
                      "Drop associates interpolated across larger segments (s)");
  ext_cmd->add_option("--min-step", ext_opts.min_step, "Stationary displacement threshold (m)")
      ->capture_default_str();
  ext_cmd->add_flag("--keep-stationary-prev", ext_opts.keep_stationary_prev,
                    "Keep rows whose previous step is stationary");
  ext_cmd->add_flag("--iso8601", ext_iso, "Parse t as ISO-8601 timestamps");

  // fit --------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "Fit a conditional direction model");
  std::string fit_rows_path, fit_in, fit_focal, fit_out = "fit.json";
  bool fit_iso = false;
  FitCliOptions fit_opts;
  fit_cmd->add_option("--rows", fit_rows_path, "Design rows CSV (from extract)");
  fit_cmd->add_option("--in", fit_in, "Dataset CSV (extract on the fly)");
  fit_cmd->add_option("--focal", fit_focal, "Focal id when using --in");
  fit_cmd->add_option("--out", fit_out, "Fit result JSON path")->capture_default_str();
  fit_cmd->add_flag("--iso8601", fit_iso, "Parse t as ISO-8601 timestamps");
  add_fit_options(fit_cmd, fit_opts);

  // report -----------------------------------------------------------------
  auto* rep_cmd = app.add_subcommand("report", "Summarize fit results into figure data");
  std::vector<std::string> rep_fits;
  std::string rep_out_dir = "report_out";
  rep_cmd->add_option("--fit", rep_fits, "Fit JSON(s), optionally label=path")->required();
  rep_cmd->add_option("--out-dir", rep_out_dir, "Output directory")->capture_default_str();

  // pipeline ---------------------------------------------------------------
  auto* pipe_cmd = app.add_subcommand("pipeline", "End-to-end recovery experiment");
  std::string pipe_config;
  std::string pipe_out_dir;
  pipe_cmd->add_option("--config", pipe_config, "Flat JSON config (defaults reproduce the "
                                                "dense + sparse recovery experiment)");
  pipe_cmd->add_option("--out-dir", pipe_out_dir, "Override the configured output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (sim_cmd->parsed()) {
      SimOutput out = simulate(sim_cfg);
      write_dataset(sim_out, out.dataset);
      if (!sim_log.empty()) {
        write_behavior_log(sim_log, out.log);
      }
      return 0;
    }

    if (deg_cmd->parsed()) {
      if (deg_in == deg_out) {
        throw Error("--out must differ from --in");
      }
      GroupDataset data = read_dataset(deg_in);
      RevisitDistribution dist = deg_use_meanlog
                                     ? RevisitDistribution{deg_meanlog, deg_sdlog}
                                     : distribution_for_target_mean(deg_target, deg_sdlog);
      write_dataset(deg_out, degrade(data, dist, deg_seed));
      return 0;
    }

    if (ext_cmd->parsed()) {
      if (ext_in == ext_out) {
        throw Error("--out must differ from --in");
      }
      if (ext_cmd->count("--max-dt-next")) ext_opts.max_dt_next = ext_max_dt_next;
      if (ext_cmd->count("--max-dt-prev")) ext_opts.max_dt_prev = ext_max_dt_prev;
      if (ext_cmd->count("--max-interpolation-gap")) ext_opts.max_interpolation_gap = ext_max_gap;
      DatasetReadOptions read_opts;
      read_opts.iso8601_time = ext_iso;
      GroupDataset data = read_dataset(ext_in, read_opts);
      write_design_rows(ext_out, extract_design_rows(data, ext_focal, ext_opts));
      return 0;
    }

    if (fit_cmd->parsed()) {
      std::vector<DesignRow> rows;
      ModelForm form = ModelForm::group_only();
      if (!fit_rows_path.empty()) {
        rows = read_design_rows(fit_rows_path);
        form = form_for_rows(fit_opts.model, rows);
      } else if (!fit_in.empty() && !fit_focal.empty()) {
        DatasetReadOptions read_opts;
        read_opts.iso8601_time = fit_iso;
        GroupDataset data = read_dataset(fit_in, read_opts);
        rows = extract_design_rows(data, fit_focal);
        form = form_for(fit_opts.model, data, fit_focal);
      } else {
        throw Error("fit needs either --rows or both --in and --focal");
      }
      if (rows.empty()) {
        throw EmptyRows("no design rows in input");
      }
      FitResult result = run_fit(rows, form, fit_opts);
      write_fit_result(fit_out, result);
      std::cout << "alpha_iid=" << result.gates.alpha_iid << " alpha_da=" << result.gates.alpha_da;
      if (form.has_individual_terms()) {
        std::cout << " alpha_sd=" << result.gates.alpha_sd;
      }
      std::cout << " rss=" << result.rss << " r2=" << result.r_squared << '\n';
      return 0;
    }

    if (rep_cmd->parsed()) {
      std::vector<std::pair<std::string, FitResult>> fits;
      for (const std::string& spec : rep_fits) {
        std::string label, path;
        auto eq = spec.find('=');
        if (eq != std::string::npos) {
          label = spec.substr(0, eq);
          path = spec.substr(eq + 1);
        } else {
          path = spec;
          label = fs::path(spec).stem().string();
        }
        fits.emplace_back(label, read_fit_result(path));
      }
      write_report(rep_out_dir, fits);
      return 0;
    }

    if (pipe_cmd->parsed()) {
      PipelineConfig cfg = parse_pipeline_config(pipe_config);
      if (!pipe_out_dir.empty()) {
        cfg.out_dir = pipe_out_dir;
      }
      return run_pipeline(cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
