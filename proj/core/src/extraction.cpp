#include "forcematch/extraction.hpp"

#include <algorithm>
#include <cmath>

namespace forcematch {

namespace {

// Index of the first fix with fix.t >= t.  Range must be checked beforehand.
std::size_t lower_index(const std::vector<Fix>& fixes, double t) {
  auto it = std::lower_bound(fixes.begin(), fixes.end(), t,
                             [](const Fix& f, double value) { return f.t < value; });
  return static_cast<std::size_t>(it - fixes.begin());
}

void check_range(const Trajectory& traj, double t) {
  if (traj.size() < 2) {
    throw TooFewFixes("interpolation needs at least two fixes for individual '" +
                      traj.individual_id() + "'");
  }
  if (t < traj.front().t || t > traj.back().t) {
    throw OutOfRange("t=" + std::to_string(t) + " outside trajectory span of '" +
                     traj.individual_id() + "'");
  }
}

std::optional<Angle> segment_bearing(const Fix& a, const Fix& b) {
  if (distance(a.position(), b.position()) < kZeroDisplacementEps) {
    return std::nullopt;
  }
  return bearing(a.position(), b.position());
}

}  // namespace

InterpolatedPoint interpolate_position(const Trajectory& traj, double t) {
  check_range(traj, t);
  const auto& fixes = traj.fixes();
  std::size_t hi = lower_index(fixes, t);
  if (fixes[hi].t == t) {
    return {fixes[hi].position(), 0.0};
  }
  const Fix& a = fixes[hi - 1];
  const Fix& b = fixes[hi];
  double u = (t - a.t) / (b.t - a.t);
  return {{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)}, b.t - a.t};
}

std::optional<Angle> interpolate_direction(const Trajectory& traj, double t) {
  check_range(traj, t);
  const auto& fixes = traj.fixes();
  std::size_t hi = lower_index(fixes, t);
  std::size_t seg_start;
  if (fixes[hi].t == t) {
    // Exact hit: use the following segment, or the preceding one at the end.
    seg_start = hi + 1 < fixes.size() ? hi : hi - 1;
  } else {
    seg_start = hi - 1;
  }
  return segment_bearing(fixes[seg_start], fixes[seg_start + 1]);
}

std::vector<DesignRow> extract_design_rows(const GroupDataset& data, const std::string& focal_id,
                                           const ExtractionOptions& options) {
  const Trajectory& focal = data.at(focal_id);  // throws FocalNotFound
  if (focal.size() < 3) {
    throw TooFewFixes("focal '" + focal_id + "' has " + std::to_string(focal.size()) +
                      " fixes; need at least 3");
  }

  double stationary = std::max(options.min_step, kZeroDisplacementEps);
  const auto& fixes = focal.fixes();

  std::vector<DesignRow> rows;
  rows.reserve(fixes.size() - 2);

  std::vector<Angle> directions;  // reused per row

  for (std::size_t i = 1; i + 1 < fixes.size(); ++i) {
    const Fix& prev = fixes[i - 1];
    const Fix& cur = fixes[i];
    const Fix& next = fixes[i + 1];

    double dt_prev = cur.t - prev.t;
    double dt_next = next.t - cur.t;
    if (options.max_dt_next && dt_next > *options.max_dt_next) continue;
    if (options.max_dt_prev && dt_prev > *options.max_dt_prev) continue;

    if (distance(cur.position(), next.position()) < stationary) continue;

    std::optional<Angle> previous_bearing;
    if (distance(prev.position(), cur.position()) >= stationary) {
      previous_bearing = bearing(prev.position(), cur.position());
    } else if (!options.keep_stationary_prev) {
      continue;
    }

    DesignRow row;
    row.focal_id = focal_id;
    row.t = cur.t;
    row.observed_direction = bearing(cur.position(), next.position());
    row.previous_bearing = previous_bearing;
    row.dt_next = dt_next;
    row.dt_prev = dt_prev;

    directions.clear();
    for (const auto& [id, traj] : data.trajectories()) {
      if (id == focal_id || !traj.covers(cur.t)) continue;
      InterpolatedPoint p = interpolate_position(traj, cur.t);
      if (options.max_interpolation_gap && p.gap > *options.max_interpolation_gap) continue;

      AssociateState assoc;
      assoc.individual_id = id;
      assoc.distance = distance(cur.position(), p.position);
      if (assoc.distance >= kZeroDisplacementEps) {
        assoc.direction_to = bearing(cur.position(), p.position);
        directions.push_back(*assoc.direction_to);
      }
      assoc.travel_direction = interpolate_direction(traj, cur.t);
      assoc.interpolation_gap = p.gap;
      row.associates.push_back(std::move(assoc));
    }

    // The row needs group geometry: at least one associate with a defined
    // direction to it.
    if (directions.empty()) continue;

    row.iid = 0.0;
    for (const auto& assoc : row.associates) {
      row.iid += assoc.distance;
    }
    row.da = directional_agreement(directions);
    if (row.da > kDegenerateResultantEps) {
      row.cm_direction = circular_mean(directions);
    }

    rows.push_back(std::move(row));
  }

  return rows;
}

}  // namespace forcematch
