#ifndef SHMM_DATAIO_HPP
#define SHMM_DATAIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "shmm/model.hpp"

namespace shmm {

// A daily series on the 365-day calendar: every February 29 removed, every
// missing value imputed, with a provenance log of both.
struct ProvenanceEvent {
  enum class Kind { leap_removed, imputed };
  Kind kind = Kind::imputed;
  long long line = 0;  // 1-based line number in the source file
  int year = 0;
  int day_of_year = 0;  // 1..365 (0 for removed leap rows)
  double value = 0.0;   // imputed value (unused for leap removals)
};

struct DailySeries {
  std::vector<double> values;
  std::vector<int> day_of_year;  // 1..365, aligned with values
  std::vector<int> year;         // calendar year, aligned with values
  std::vector<ProvenanceEvent> provenance;

  std::size_t size() const { return values.size(); }
};

struct IngestConfig {
  // Columns are matched by header name when the file has a header row,
  // otherwise by 0-based index.
  std::string date_column = "DATE";
  std::string value_column = "RR";
  int date_index = 0;
  int value_index = 1;
  char delimiter = ',';

  // Optional quality-flag column: rows whose flag equals `missing_quality`
  // are treated as missing. Empty name and negative index disable it.
  std::string quality_column;
  int quality_index = -1;
  int missing_quality = 9;

  // Values below zero are missing sentinels (ECA&D convention) unless
  // disabled; an explicit sentinel can be configured instead.
  bool negative_is_missing = true;
  bool use_sentinel = false;
  double missing_sentinel = -9999.0;

  double scale = 1.0;  // multiplied into every value (e.g. 0.1 for ECA&D RR)
  std::uint64_t seed = 0;  // drives the imputation draws
};

// Reads a delimited text file with a date column (ISO-8601 yyyy-mm-dd or
// compact yyyymmdd) and a value column. February 29 rows are dropped so
// every year has 365 days; missing values are imputed by a seeded draw from
// the observed values sharing the day of year. Throws DataError with line
// numbers on unparseable rows, and when a day of year has no observed value
// to impute from.
DailySeries ingest(const std::string& path, const IngestConfig& cfg = {});

// Model document (schema below). Serialization preserves doubles exactly
// (shortest round-trip decimal), so load(save(m)) == m bitwise.
//
// {
//   "schema_version": 1,
//   "dims": {"K": ..., "T": ..., "d": ...},
//   "beta": [[[...]]],            // [i][j][c], row-major
//   "pi": [...],
//   "emissions": {"family": "...", ...family-specific arrays...}
// }
nlohmann::json model_to_json(const SeasonalHMM& model);
SeasonalHMM model_from_json(const nlohmann::json& doc);
void save_model(const SeasonalHMM& model, const std::string& path);
SeasonalHMM load_model(const std::string& path);

}  // namespace shmm

#endif  // SHMM_DATAIO_HPP
