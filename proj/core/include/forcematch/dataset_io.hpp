#ifndef FORCEMATCH_DATASET_IO_HPP
#define FORCEMATCH_DATASET_IO_HPP

#include <span>
#include <string>
#include <vector>

#include "forcematch/extraction.hpp"
#include "forcematch/force_model.hpp"
#include "forcematch/simulator.hpp"
#include "forcematch/trajectory.hpp"

// File formats:
//   dataset CSV       header `individual_id,t,x,y`, UTF-8, LF, any row order
//   behavior log CSV  header `individual_id,t,mode`, mode in {F, C}
//   design rows CSV   fixed associate blocking `assoc_<id>_dir,assoc_<id>_dist`
//   fit result JSON   field names matching the FitResult type
// Values are serialized with 17 significant digits so write-then-read is an
// identity.

namespace forcematch {

struct DatasetReadOptions {
  // Accept ISO-8601 timestamps (e.g. 2006-01-02T15:04:05.5Z) in the t column
  // and convert them to seconds since the Unix epoch.
  bool iso8601_time = false;
};

GroupDataset read_dataset(const std::string& path, const DatasetReadOptions& options = {});
void write_dataset(const std::string& path, const GroupDataset& data);

void write_behavior_log(const std::string& path, const BehaviorLog& log);

void write_design_rows(const std::string& path, std::span<const DesignRow> rows);
// travel_direction / interpolation_gap are not part of the CSV schema and
// come back absent / 0; everything the fit consumes survives the round trip.
std::vector<DesignRow> read_design_rows(const std::string& path);

std::string fit_result_to_json(const FitResult& result);
FitResult fit_result_from_json(const std::string& json_text);
void write_fit_result(const std::string& path, const FitResult& result);
FitResult read_fit_result(const std::string& path);

// Seconds since the Unix epoch for an ISO-8601 timestamp; throws MalformedRow.
double parse_iso8601(const std::string& text);

}  // namespace forcematch

#endif
