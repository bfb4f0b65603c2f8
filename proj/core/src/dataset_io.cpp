#include "forcematch/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace forcematch {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(const std::string& field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw MalformedRow("line " + std::to_string(line_no) + ": cannot parse number '" + field +
                       "'");
  }
  if (!std::isfinite(value)) {
    throw NonFiniteValue("line " + std::to_string(line_no) + ": non-finite value '" + field +
                         "'");
  }
  return value;
}

std::optional<double> parse_optional_double(const std::string& field, std::size_t line_no) {
  if (field.empty()) {
    return std::nullopt;
  }
  return parse_double(field, line_no);
}

// Reads a line and strips one trailing CR so CRLF files still parse.
bool get_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) {
    return false;
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return true;
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open '" + path + "' for reading");
  }
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot open '" + path + "' for writing");
  }
  return out;
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\r\n") != std::string::npos) {
    throw Error("individual id '" + id + "' is empty or contains CSV delimiters");
  }
}

// Days since 1970-01-01 for a proleptic Gregorian date.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  long long era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

}  // namespace

double parse_iso8601(const std::string& text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0;
  double seconds = 0.0;
  int consumed = 0;
  int matched = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%lf%n", &year, &month, &day, &hour,
                            &minute, &seconds, &consumed);
  if (matched != 6) {
    throw MalformedRow("cannot parse ISO-8601 timestamp '" + text + "'");
  }
  std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest != "Z") {
    throw MalformedRow("unsupported ISO-8601 suffix '" + rest + "' (only UTC 'Z' is handled)");
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      seconds >= 61.0) {
    throw MalformedRow("out-of-range ISO-8601 timestamp '" + text + "'");
  }
  long long days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + seconds;
}

GroupDataset read_dataset(const std::string& path, const DatasetReadOptions& options) {
  std::ifstream in = open_for_read(path);

  std::string line;
  if (!get_line(in, line) || line != "individual_id,t,x,y") {
    throw MalformedRow("'" + path + "': expected header 'individual_id,t,x,y'");
  }

  struct PendingFix {
    Fix fix;
    std::size_t line_no;
  };
  std::map<std::string, std::vector<PendingFix>> pending;

  std::size_t line_no = 1;
  while (get_line(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw MalformedRow("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                         std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw MalformedRow("line " + std::to_string(line_no) + ": empty individual id");
    }
    double t = options.iso8601_time ? parse_iso8601(fields[1]) : parse_double(fields[1], line_no);
    double x = parse_double(fields[2], line_no);
    double y = parse_double(fields[3], line_no);
    pending[fields[0]].push_back({{t, x, y}, line_no});
  }

  GroupDataset data;
  for (auto& [id, fixes] : pending) {
    std::stable_sort(fixes.begin(), fixes.end(),
                     [](const PendingFix& a, const PendingFix& b) { return a.fix.t < b.fix.t; });
    Trajectory traj(id);
    traj.reserve(fixes.size());
    for (std::size_t i = 0; i < fixes.size(); ++i) {
      if (i > 0 && fixes[i].fix.t == fixes[i - 1].fix.t) {
        throw DuplicateTimestamp("line " + std::to_string(fixes[i].line_no) +
                                 ": duplicate timestamp for individual '" + id + "'");
      }
      traj.append(fixes[i].fix);
    }
    data.add(std::move(traj));
  }
  return data;
}

void write_dataset(const std::string& path, const GroupDataset& data) {
  std::ofstream out = open_for_write(path);
  out << "individual_id,t,x,y\n";
  for (const auto& [id, traj] : data.trajectories()) {
    check_id(id);
    for (const Fix& fix : traj.fixes()) {
      out << id << ',' << format_double(fix.t) << ',' << format_double(fix.x) << ','
          << format_double(fix.y) << '\n';
    }
  }
  if (!out) {
    throw Error("failed while writing '" + path + "'");
  }
}

void write_behavior_log(const std::string& path, const BehaviorLog& log) {
  std::ofstream out = open_for_write(path);
  out << "individual_id,t,mode\n";
  for (std::size_t step = 0; step < log.step_count(); ++step) {
    double t = static_cast<double>(step) * log.step_seconds();
    for (std::size_t a = 0; a < log.agent_ids().size(); ++a) {
      out << log.agent_ids()[a] << ',' << format_double(t) << ','
          << static_cast<char>(log.at(a, step)) << '\n';
    }
  }
  if (!out) {
    throw Error("failed while writing '" + path + "'");
  }
}

void write_design_rows(const std::string& path, std::span<const DesignRow> rows) {
  std::set<std::string> id_set;
  for (const DesignRow& row : rows) {
    for (const AssociateState& assoc : row.associates) {
      id_set.insert(assoc.individual_id);
    }
  }
  std::vector<std::string> ids(id_set.begin(), id_set.end());
  for (const std::string& id : ids) {
    check_id(id);
  }

  std::ofstream out = open_for_write(path);
  out << "focal_id,t,observed_direction,previous_bearing,dt_next,dt_prev,da,iid,cm_direction";
  for (const std::string& id : ids) {
    out << ",assoc_" << id << "_dir,assoc_" << id << "_dist";
  }
  out << '\n';

  for (const DesignRow& row : rows) {
    out << row.focal_id << ',' << format_double(row.t) << ','
        << format_double(row.observed_direction.radians()) << ',';
    if (row.previous_bearing) {
      out << format_double(row.previous_bearing->radians());
    }
    out << ',' << format_double(row.dt_next) << ',' << format_double(row.dt_prev) << ','
        << format_double(row.da) << ',' << format_double(row.iid) << ',';
    if (row.cm_direction) {
      out << format_double(row.cm_direction->radians());
    }
    for (const std::string& id : ids) {
      auto it = std::find_if(row.associates.begin(), row.associates.end(),
                             [&](const AssociateState& a) { return a.individual_id == id; });
      out << ',';
      if (it != row.associates.end() && it->direction_to) {
        out << format_double(it->direction_to->radians());
      }
      out << ',';
      if (it != row.associates.end()) {
        out << format_double(it->distance);
      }
    }
    out << '\n';
  }
  if (!out) {
    throw Error("failed while writing '" + path + "'");
  }
}

std::vector<DesignRow> read_design_rows(const std::string& path) {
  std::ifstream in = open_for_read(path);

  std::string line;
  if (!get_line(in, line)) {
    throw MalformedRow("'" + path + "': missing header");
  }
  std::vector<std::string> header = split_csv_line(line);
  const std::vector<std::string> fixed = {"focal_id", "t",       "observed_direction",
                                          "previous_bearing", "dt_next", "dt_prev",
                                          "da",       "iid",     "cm_direction"};
  if (header.size() < fixed.size() ||
      !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw MalformedRow("'" + path + "': unexpected design-row header");
  }

  std::vector<std::string> ids;
  for (std::size_t c = fixed.size(); c < header.size(); c += 2) {
    const std::string& dir_col = header[c];
    if (c + 1 >= header.size() || dir_col.rfind("assoc_", 0) != 0 ||
        dir_col.size() < 10 || dir_col.substr(dir_col.size() - 4) != "_dir") {
      throw MalformedRow("'" + path + "': malformed associate column '" + dir_col + "'");
    }
    std::string id = dir_col.substr(6, dir_col.size() - 10);
    if (header[c + 1] != "assoc_" + id + "_dist") {
      throw MalformedRow("'" + path + "': associate columns for '" + id + "' not paired");
    }
    ids.push_back(id);
  }

  std::vector<DesignRow> rows;
  std::size_t line_no = 1;
  while (get_line(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw MalformedRow("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    }

    DesignRow row;
    row.focal_id = fields[0];
    row.t = parse_double(fields[1], line_no);
    row.observed_direction = Angle(parse_double(fields[2], line_no));
    if (auto prev = parse_optional_double(fields[3], line_no)) {
      row.previous_bearing = Angle(*prev);
    }
    row.dt_next = parse_double(fields[4], line_no);
    row.dt_prev = parse_double(fields[5], line_no);
    row.da = parse_double(fields[6], line_no);
    row.iid = parse_double(fields[7], line_no);
    if (auto cm = parse_optional_double(fields[8], line_no)) {
      row.cm_direction = Angle(*cm);
    }

    for (std::size_t j = 0; j < ids.size(); ++j) {
      const std::string& dir_field = fields[9 + 2 * j];
      const std::string& dist_field = fields[9 + 2 * j + 1];
      if (dist_field.empty()) {
        if (!dir_field.empty()) {
          throw MalformedRow("line " + std::to_string(line_no) + ": direction without distance");
        }
        continue;  // associate absent from this row
      }
      AssociateState assoc;
      assoc.individual_id = ids[j];
      assoc.distance = parse_double(dist_field, line_no);
      if (auto dir = parse_optional_double(dir_field, line_no)) {
        assoc.direction_to = Angle(*dir);
      }
      row.associates.push_back(std::move(assoc));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// FitResult JSON

namespace {

ordered_json interval_json(const ParameterInterval& iv) { return {iv.lo, iv.hi}; }

ParameterInterval interval_from(const ordered_json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::string variant_name(ModelVariant v) {
  return v == ModelVariant::group_only ? "group_only" : "group_plus_individuals";
}

ModelVariant variant_from(const std::string& name) {
  if (name == "group_only") return ModelVariant::group_only;
  if (name == "group_plus_individuals") return ModelVariant::group_plus_individuals;
  throw Error("unknown model variant '" + name + "'");
}

}  // namespace

std::string fit_result_to_json(const FitResult& r) {
  ordered_json j;
  j["model_form"] = {{"variant", variant_name(r.model_form.variant)},
                     {"associate_ids", r.model_form.associate_ids}};
  j["gates"] = {{"alpha_iid", r.gates.alpha_iid}, {"alpha_da", r.gates.alpha_da}};
  if (r.model_form.has_individual_terms()) {
    j["gates"]["alpha_sd"] = r.gates.alpha_sd;
  }
  j["weights"] = {{"beta_prev", r.weights.beta_prev},
                  {"beta_cm", r.weights.beta_cm},
                  {"beta_assoc", r.weights.beta_assoc}};
  j["rss"] = r.rss;
  j["angular_sse"] = r.angular_sse;
  j["angular_sse_excluded"] = r.angular_sse_excluded;
  j["r_squared"] = r.r_squared;
  j["r_squared_raw"] = r.r_squared_raw;
  j["n_rows"] = r.n_rows;
  j["activation_rate_cm"] = r.activation_rate_cm;
  j["activation_rate_assoc"] = r.activation_rate_assoc;
  if (r.ci) {
    ordered_json ci;
    ci["alpha_iid"] = interval_json(r.ci->alpha_iid);
    ci["alpha_da"] = interval_json(r.ci->alpha_da);
    if (r.ci->alpha_sd) {
      ci["alpha_sd"] = interval_json(*r.ci->alpha_sd);
    }
    ci["beta_prev"] = interval_json(r.ci->beta_prev);
    ci["beta_cm"] = interval_json(r.ci->beta_cm);
    ordered_json assoc = ordered_json::object();
    for (const auto& [id, iv] : r.ci->beta_assoc) {
      assoc[id] = interval_json(iv);
    }
    ci["beta_assoc"] = assoc;
    ci["replicates"] = r.ci->replicates;
    ci["failed_replicates"] = r.ci->failed_replicates;
    j["ci"] = ci;
  } else {
    j["ci"] = nullptr;
  }
  j["seed"] = r.seed;
  j["optimizer_trace"] = r.optimizer_trace;
  return j.dump(2) + "\n";
}

FitResult fit_result_from_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid fit-result JSON: ") + e.what());
  }

  try {
    FitResult r;
    const auto& form = j.at("model_form");
    ModelVariant variant = variant_from(form.at("variant").get<std::string>());
    auto ids = form.at("associate_ids").get<std::vector<std::string>>();
    r.model_form = variant == ModelVariant::group_only
                       ? ModelForm::group_only()
                       : ModelForm::group_plus_individuals(std::move(ids));

    const auto& gates = j.at("gates");
    r.gates.alpha_iid = gates.at("alpha_iid").get<double>();
    r.gates.alpha_da = gates.at("alpha_da").get<double>();
    r.gates.alpha_sd = gates.value("alpha_sd", 0.0);

    const auto& weights = j.at("weights");
    r.weights.beta_prev = weights.at("beta_prev").get<double>();
    r.weights.beta_cm = weights.at("beta_cm").get<double>();
    r.weights.beta_assoc =
        weights.at("beta_assoc").get<std::map<std::string, double>>();

    r.rss = j.at("rss").get<double>();
    r.angular_sse = j.at("angular_sse").get<double>();
    r.angular_sse_excluded = j.value("angular_sse_excluded", std::size_t{0});
    r.r_squared = j.at("r_squared").get<double>();
    r.r_squared_raw = j.value("r_squared_raw", r.r_squared);
    r.n_rows = j.at("n_rows").get<std::size_t>();
    r.activation_rate_cm = j.at("activation_rate_cm").get<double>();
    r.activation_rate_assoc =
        j.at("activation_rate_assoc").get<std::map<std::string, double>>();

    if (j.contains("ci") && !j.at("ci").is_null()) {
      const auto& ci_json = j.at("ci");
      ConfidenceIntervals ci;
      ci.alpha_iid = interval_from(ci_json.at("alpha_iid"));
      ci.alpha_da = interval_from(ci_json.at("alpha_da"));
      if (ci_json.contains("alpha_sd")) {
        ci.alpha_sd = interval_from(ci_json.at("alpha_sd"));
      }
      ci.beta_prev = interval_from(ci_json.at("beta_prev"));
      ci.beta_cm = interval_from(ci_json.at("beta_cm"));
      for (const auto& [id, iv] : ci_json.at("beta_assoc").items()) {
        ci.beta_assoc[id] = interval_from(iv);
      }
      ci.replicates = ci_json.value("replicates", 0);
      ci.failed_replicates = ci_json.value("failed_replicates", 0);
      r.ci = std::move(ci);
    }

    r.seed = j.at("seed").get<std::uint64_t>();
    r.optimizer_trace = j.at("optimizer_trace").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("fit-result JSON missing or mistyped field: ") + e.what());
  }
}

void write_fit_result(const std::string& path, const FitResult& result) {
  std::ofstream out = open_for_write(path);
  out << fit_result_to_json(result);
  if (!out) {
    throw Error("failed while writing '" + path + "'");
  }
}

FitResult read_fit_result(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return fit_result_from_json(buffer.str());
}

}  // namespace forcematch
