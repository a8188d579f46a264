#include "shmm/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace shmm {

namespace {

// Cumulative days before each month on the 365-day calendar.
constexpr int kMonthOffset[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
constexpr int kMonthDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) fields.push_back(trim(field));
  return fields;
}

bool parse_date(const std::string& s, int& year, int& month, int& day) {
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    // ISO-8601 yyyy-mm-dd
    year = std::atoi(s.substr(0, 4).c_str());
    month = std::atoi(s.substr(5, 2).c_str());
    day = std::atoi(s.substr(8, 2).c_str());
  } else if (s.size() == 8 &&
             std::all_of(s.begin(), s.end(),
                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    // compact yyyymmdd
    year = std::atoi(s.substr(0, 4).c_str());
    month = std::atoi(s.substr(4, 2).c_str());
    day = std::atoi(s.substr(6, 2).c_str());
  } else {
    return false;
  }
  if (month < 1 || month > 12 || day < 1) return false;
  const int max_day = (month == 2 && day == 29) ? 29 : kMonthDays[month - 1];
  return day <= max_day;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != nullptr && *end == '\0';
}

bool iequals(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace

DailySeries ingest(const std::string& path, const IngestConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("ingest: cannot open '" + path + "'");

  DailySeries series;
  std::vector<long long> bad_lines;
  std::vector<std::size_t> missing;  // indices into series.values
  std::vector<long long> row_line;   // source line per kept row

  int date_col = cfg.date_index;
  int value_col = cfg.value_index;
  int quality_col = cfg.quality_index;
  bool header_seen = false;

  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::vector<std::string> fields = split_line(line, cfg.delimiter);

    if (!header_seen) {
      // Leading lines may be free-text preamble (ECA&D files carry one); a
      // header row naming the configured columns fixes the indices, and the
      // first parseable data row starts ingestion with the defaults.
      int found_date = -1, found_value = -1, found_quality = -1;
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (iequals(fields[c], cfg.date_column)) found_date = static_cast<int>(c);
        if (iequals(fields[c], cfg.value_column)) found_value = static_cast<int>(c);
        if (!cfg.quality_column.empty() && iequals(fields[c], cfg.quality_column))
          found_quality = static_cast<int>(c);
      }
      if (found_date >= 0 && found_value >= 0) {
        date_col = found_date;
        value_col = found_value;
        quality_col = found_quality;
        header_seen = true;
        continue;  // consume the header row
      }
    }

    int year = 0, month = 0, day = 0;
    double value = 0.0;
    const int max_col = std::max({date_col, value_col, quality_col});
    if (static_cast<int>(fields.size()) <= max_col ||
        !parse_date(fields[date_col], year, month, day) ||
        !parse_double(fields[value_col], value)) {
      if (header_seen) bad_lines.push_back(line_no);
      continue;  // pre-header: preamble line, skip silently
    }
    header_seen = true;

    if (month == 2 && day == 29) {
      series.provenance.push_back(
          {ProvenanceEvent::Kind::leap_removed, line_no, year, 0, 0.0});
      continue;
    }

    bool is_missing = false;
    if (cfg.use_sentinel && value == cfg.missing_sentinel) is_missing = true;
    if (cfg.negative_is_missing && value < 0.0) is_missing = true;
    if (quality_col >= 0) {
      double flag = 0.0;
      if (parse_double(fields[quality_col], flag) &&
          static_cast<int>(flag) == cfg.missing_quality)
        is_missing = true;
    }

    const int doy = kMonthOffset[month - 1] + day;
    if (is_missing) missing.push_back(series.values.size());
    series.values.push_back(is_missing ? std::numeric_limits<double>::quiet_NaN()
                                       : value * cfg.scale);
    series.day_of_year.push_back(doy);
    series.year.push_back(year);
    row_line.push_back(line_no);
  }

  if (!bad_lines.empty()) {
    std::string msg = "ingest: unparseable rows at lines";
    for (std::size_t i = 0; i < bad_lines.size() && i < 12; ++i)
      msg += " " + std::to_string(bad_lines[i]);
    if (bad_lines.size() > 12)
      msg += " (+" + std::to_string(bad_lines.size() - 12) + " more)";
    throw DataError(msg);
  }

  // Imputation: seeded draw from the observed values of the same day of
  // year, in file order.
  if (!missing.empty()) {
    std::vector<std::vector<double>> pool(366);
    for (std::size_t i = 0; i < series.values.size(); ++i)
      if (!std::isnan(series.values[i])) pool[series.day_of_year[i]].push_back(series.values[i]);

    SplitMix64 rng(cfg.seed);
    for (std::size_t idx : missing) {
      const int doy = series.day_of_year[idx];
      const auto& candidates = pool[doy];
      if (candidates.empty())
        throw DataError("ingest: day-of-year " + std::to_string(doy) +
                        " has no observed values to impute from");
      const auto pick = static_cast<std::size_t>(rng.uniform() * candidates.size());
      const double value = candidates[std::min(pick, candidates.size() - 1)];
      series.values[idx] = value;
      series.provenance.push_back({ProvenanceEvent::Kind::imputed, row_line[idx],
                                   series.year[idx], doy, value});
    }
  }
  return series;
}

// ---------------------------------------------------------------------------
// Model document

namespace {

constexpr int kSchemaVersion = 1;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw DataError(std::string("model document: bad matrix '") + what + "'");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw DataError(std::string("model document: ragged matrix '") + what + "'");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array())
    throw DataError(std::string("model document: bad vector '") + what + "'");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

nlohmann::json model_to_json(const SeasonalHMM& model) {
  const ModelDims& dims = model.dims();
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["dims"] = {{"K", dims.K}, {"T", dims.T}, {"d", dims.d}};

  nlohmann::json beta = nlohmann::json::array();
  for (int i = 0; i < dims.K; ++i) {
    nlohmann::json rows = nlohmann::json::array();
    for (int j = 0; j < dims.K - 1; ++j) {
      nlohmann::json coefs = nlohmann::json::array();
      for (int c = 0; c < dims.trig_dim(); ++c)
        coefs.push_back(model.transition().beta(i, j, c));
      rows.push_back(coefs);
    }
    beta.push_back(rows);
  }
  doc["beta"] = beta;
  doc["pi"] = vector_to_json(model.pi());

  nlohmann::json em;
  const EmissionFamily& fam = model.emissions();
  em["family"] = fam.family_tag();
  if (const auto* g = dynamic_cast<const GaussianPeriodicMean*>(&fam)) {
    em["M"] = g->mixture_size();
    em["degree"] = g->degree();
    em["weights"] = matrix_to_json(g->weights);
    em["level"] = vector_to_json(g->level);
    em["trig"] = matrix_to_json(g->trig);
    em["variances"] = matrix_to_json(g->variances);
    em["variance_floor"] = g->variance_floor;
  } else if (const auto* e = dynamic_cast<const ExpPeriodicScale*>(&fam)) {
    em["M"] = e->mixture_size();
    em["degree"] = e->degree();
    em["weights"] = matrix_to_json(e->weights);
    em["rates"] = matrix_to_json(e->rates);
    em["trig"] = matrix_to_json(e->trig);
    em["scale_floor"] = e->scale_floor;
  } else if (const auto* z = dynamic_cast<const ZeroInflatedExpMixture*>(&fam)) {
    em["M"] = z->mixture_size();
    em["weights"] = matrix_to_json(z->weights);
    em["rates"] = matrix_to_json(z->rates);
  } else {
    throw DataError("model_to_json: unknown emission family '" + fam.family_tag() + "'");
  }
  doc["emissions"] = em;
  return doc;
}

SeasonalHMM model_from_json(const nlohmann::json& doc) {
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != kSchemaVersion)
    throw DataError("model document: unsupported schema version");

  ModelDims dims;
  dims.K = doc.at("dims").at("K").get<int>();
  dims.T = doc.at("dims").at("T").get<int>();
  dims.d = doc.at("dims").at("d").get<int>();
  dims.validate();

  PeriodicLogitTransition transition(dims);
  const nlohmann::json& beta = doc.at("beta");
  if (static_cast<int>(beta.size()) != dims.K)
    throw DataError("model document: beta has wrong row count");
  for (int i = 0; i < dims.K; ++i) {
    if (static_cast<int>(beta[i].size()) != dims.K - 1)
      throw DataError("model document: beta has wrong column count");
    for (int j = 0; j < dims.K - 1; ++j) {
      if (static_cast<int>(beta[i][j].size()) != dims.trig_dim())
        throw DataError("model document: beta has wrong coefficient count");
      for (int c = 0; c < dims.trig_dim(); ++c)
        transition.beta(i, j, c) = beta[i][j][c].get<double>();
    }
  }

  const Eigen::VectorXd pi = vector_from_json(doc.at("pi"), "pi");

  const nlohmann::json& em = doc.at("emissions");
  const std::string tag = em.at("family").get<std::string>();
  std::unique_ptr<EmissionFamily> fam;
  if (tag == "gaussian_periodic_mean") {
    auto g = std::make_unique<GaussianPeriodicMean>(dims.K, dims.T, em.at("M").get<int>(),
                                                    em.at("degree").get<int>());
    g->weights = matrix_from_json(em.at("weights"), "weights");
    g->level = vector_from_json(em.at("level"), "level");
    if (em.at("degree").get<int>() > 0)
      g->trig = matrix_from_json(em.at("trig"), "trig");
    g->variances = matrix_from_json(em.at("variances"), "variances");
    if (em.contains("variance_floor")) g->variance_floor = em["variance_floor"].get<double>();
    fam = std::move(g);
  } else if (tag == "exp_periodic_scale") {
    auto e = std::make_unique<ExpPeriodicScale>(dims.K, dims.T, em.at("M").get<int>(),
                                                em.at("degree").get<int>());
    e->weights = matrix_from_json(em.at("weights"), "weights");
    e->rates = matrix_from_json(em.at("rates"), "rates");
    if (em.at("degree").get<int>() > 0) e->trig = matrix_from_json(em.at("trig"), "trig");
    if (em.contains("scale_floor")) e->scale_floor = em["scale_floor"].get<double>();
    fam = std::move(e);
  } else if (tag == "zero_inflated_exp") {
    auto z = std::make_unique<ZeroInflatedExpMixture>(dims.K, dims.T, em.at("M").get<int>());
    z->weights = matrix_from_json(em.at("weights"), "weights");
    z->rates = matrix_from_json(em.at("rates"), "rates");
    fam = std::move(z);
  } else {
    throw DataError("model document: unknown emission family '" + tag + "'");
  }

  return SeasonalHMM(std::move(transition), std::move(fam), pi);
}

void save_model(const SeasonalHMM& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_model: cannot open '" + path + "' for writing");
  out << model_to_json(model).dump(2) << "\n";
  if (!out) throw DataError("save_model: write to '" + path + "' failed");
}

SeasonalHMM load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_model: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_model: malformed document in '" + path + "': " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace shmm
