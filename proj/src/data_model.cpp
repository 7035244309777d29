#include "censreg/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "censreg/error.hpp"

namespace censreg {

std::vector<double> ObservedRecord::h() const {
  std::vector<double> out;
  out.reserve(z.size() + h_extra.size());
  out.insert(out.end(), z.begin(), z.end());
  out.insert(out.end(), h_extra.begin(), h_extra.end());
  return out;
}

namespace {

bool all_finite(const std::vector<double>& xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  if (cell.empty()) throw ParseError(row, "empty cell in column '" + column + "'");
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(row, "non-numeric value '" + cell + "' in column '" + column + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(row, "non-finite value in column '" + column + "'");
  }
  return value;
}

std::string fmt_roundtrip(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

}  // namespace

Dataset::Dataset(std::vector<ObservedRecord> records, ColumnNames names)
    : records_(std::move(records)), names_(std::move(names)) {
  if (!records_.empty()) {
    p_ = records_.front().z.size();
    q_ = records_.front().h_extra.size();
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const std::string where = "record " + std::to_string(i + 1) + ": ";
    if (r.z.size() != p_ || r.h_extra.size() != q_) {
      throw DataError(where + "covariate dimensions differ from the first record");
    }
    if (!std::isfinite(r.v) || r.v < 0.0) throw DataError(where + "v must be finite and >= 0");
    if (r.delta != 0 && r.delta != 1) throw DataError(where + "delta must be 0 or 1");
    if (!std::isfinite(r.y) || !all_finite(r.z) || !all_finite(r.h_extra)) {
      throw DataError(where + "non-finite covariate or outcome");
    }
  }
  if (names_.z.size() != p_) {
    names_.z.clear();
    for (std::size_t j = 0; j < p_; ++j) names_.z.push_back("z" + std::to_string(j + 1));
  }
  if (names_.h_extra.size() != q_) {
    names_.h_extra.clear();
    for (std::size_t j = 0; j < q_; ++j) names_.h_extra.push_back("h" + std::to_string(j + 1));
  }
}

std::size_t Dataset::n_uncensored() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [](const ObservedRecord& r) { return r.delta == 1; }));
}

std::vector<double> Dataset::v_column() const {
  std::vector<double> out;
  out.reserve(n());
  for (const auto& r : records_) out.push_back(r.v);
  return out;
}

std::vector<int> Dataset::delta_column() const {
  std::vector<int> out;
  out.reserve(n());
  for (const auto& r : records_) out.push_back(r.delta);
  return out;
}

std::vector<double> Dataset::y_column() const {
  std::vector<double> out;
  out.reserve(n());
  for (const auto& r : records_) out.push_back(r.y);
  return out;
}

ColumnSchema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  ColumnSchema s;
  std::vector<std::string> missing;
  auto required = [&](const char* key, std::string& out) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      missing.emplace_back(key);
      return;
    }
    out = j.at(key).get<std::string>();
  };
  required("v", s.v);
  required("delta", s.delta);
  required("y", s.y);
  if (!missing.empty()) {
    std::string msg = "schema is missing string field(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }
  auto list = [&](const char* key, std::vector<std::string>& out) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw SchemaError(std::string("schema field '") + key + "' must be an array");
    for (const auto& e : arr) {
      if (!e.is_string()) throw SchemaError(std::string("schema field '") + key + "' must hold strings");
      out.push_back(e.get<std::string>());
    }
  };
  list("z", s.z);
  list("h", s.h_extra);
  return s;
}

ColumnSchema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file '" + path + "' is not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

Dataset read_csv(std::istream& in, const ColumnSchema& schema) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw DataError("empty dataset: no header row");
  }
  const auto header = split_row(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);

  std::vector<std::string> missing;
  auto locate = [&](const std::string& name) -> std::size_t {
    auto it = index.find(name);
    if (it == index.end()) {
      missing.push_back(name);
      return 0;
    }
    return it->second;
  };
  if (schema.v.empty() || schema.delta.empty() || schema.y.empty()) {
    throw SchemaError("schema must name the v, delta, and y columns");
  }
  const std::size_t v_col = locate(schema.v);
  const std::size_t d_col = locate(schema.delta);
  const std::size_t y_col = locate(schema.y);
  std::vector<std::size_t> z_cols, h_cols;
  for (const auto& name : schema.z) z_cols.push_back(locate(name));
  for (const auto& name : schema.h_extra) h_cols.push_back(locate(name));
  if (!missing.empty()) {
    std::string msg = "column(s) not found in header:";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw SchemaError(msg);
  }

  std::vector<ObservedRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                std::to_string(cells.size()));
    }
    ObservedRecord r;
    r.v = parse_cell(cells[v_col], row, schema.v);
    if (r.v < 0.0) throw ParseError(row, "negative value in column '" + schema.v + "'");
    const double d = parse_cell(cells[d_col], row, schema.delta);
    if (d != 0.0 && d != 1.0) {
      throw ParseError(row, "column '" + schema.delta + "' must be 0 or 1, found '" +
                                cells[d_col] + "'");
    }
    r.delta = static_cast<int>(d);
    r.y = parse_cell(cells[y_col], row, schema.y);
    for (std::size_t k = 0; k < z_cols.size(); ++k) {
      r.z.push_back(parse_cell(cells[z_cols[k]], row, schema.z[k]));
    }
    for (std::size_t k = 0; k < h_cols.size(); ++k) {
      r.h_extra.push_back(parse_cell(cells[h_cols[k]], row, schema.h_extra[k]));
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw DataError("empty dataset: header but no data rows");

  ColumnNames names{schema.v, schema.delta, schema.y, schema.z, schema.h_extra};
  return Dataset(std::move(records), std::move(names));
}

Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& d) {
  const auto& nm = d.names();
  out << nm.v << ',' << nm.delta;
  for (const auto& z : nm.z) out << ',' << z;
  for (const auto& h : nm.h_extra) out << ',' << h;
  out << ',' << nm.y << '\n';
  for (const auto& r : d) {
    out << fmt_roundtrip(r.v) << ',' << r.delta;
    for (double z : r.z) out << ',' << fmt_roundtrip(z);
    for (double h : r.h_extra) out << ',' << fmt_roundtrip(h);
    out << ',' << fmt_roundtrip(r.y) << '\n';
  }
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport rep;
  rep.n = d.n();
  rep.n_censored = d.n_censored();
  rep.censoring_fraction = rep.n ? static_cast<double>(rep.n_censored) / static_cast<double>(rep.n) : 0.0;
  rep.design_columns = d.p() + 2;
  if (rep.n < rep.design_columns) {
    rep.too_few_rows = true;
    rep.flags.emplace_back("fewer rows than design columns (n < p + 2)");
  }
  const std::size_t n_cc = d.n_uncensored();
  if (n_cc == 0) {
    rep.no_complete_cases = true;
    rep.flags.emplace_back("no complete cases; all fits impossible");
    return rep;
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_cc), static_cast<Eigen::Index>(rep.design_columns));
  Eigen::Index row = 0;
  for (const auto& r : d) {
    if (r.delta != 1) continue;
    x(row, 0) = 1.0;
    x(row, 1) = r.v;
    for (std::size_t j = 0; j < r.z.size(); ++j) x(row, static_cast<Eigen::Index>(j + 2)) = r.z[j];
    ++row;
  }
  // Column scaling keeps the rank decision independent of covariate units.
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double norm = x.col(c).norm();
    if (norm > 0.0) x.col(c) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  rep.design_rank = static_cast<std::size_t>(qr.rank());
  if (rep.design_rank < rep.design_columns) {
    rep.rank_deficient = true;
    rep.flags.emplace_back("complete-case design matrix is rank deficient (rank " +
                           std::to_string(rep.design_rank) + " of " +
                           std::to_string(rep.design_columns) + ")");
  }
  return rep;
}

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::CC: return "cc";
    case Scheme::IpcwLogistic: return "ipcw";
    case Scheme::IpcwKm: return "ipcw-km";
    case Scheme::IpcwCox: return "ipcw-cox";
  }
  return "?";
}

Scheme scheme_from_string(std::string_view s) {
  if (s == "cc") return Scheme::CC;
  if (s == "ipcw" || s == "ipcw-logistic") return Scheme::IpcwLogistic;
  if (s == "ipcw-km") return Scheme::IpcwKm;
  if (s == "ipcw-cox") return Scheme::IpcwCox;
  throw SchemaError("unknown weighting method '" + std::string(s) +
                    "' (expected cc, ipcw, ipcw-km, ipcw-cox)");
}

}  // namespace censreg
