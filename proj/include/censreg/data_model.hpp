#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace censreg {

// One subject: v = min(X, C), delta = 1 when X was observed.
struct ObservedRecord {
  double v = 0.0;
  int delta = 1;
  std::vector<double> z;        // fully observed regression covariates
  double y = 0.0;
  std::vector<double> h_extra;  // auxiliary covariates for the selection models only

  // Reverse indicator used when censoring is treated as the event. Never stored.
  int delta_star() const noexcept { return 1 - delta; }

  // Selection-model covariates: z followed by h_extra.
  std::vector<double> h() const;

  friend bool operator==(const ObservedRecord&, const ObservedRecord&) = default;
};

// Column labels carried along for reporting. Defaults are used when a dataset
// is built in code rather than loaded from a file.
struct ColumnNames {
  std::string v = "x";
  std::string delta = "delta";
  std::string y = "y";
  std::vector<std::string> z;
  std::vector<std::string> h_extra;

  friend bool operator==(const ColumnNames&, const ColumnNames&) = default;
};

// Immutable, validated collection of records sharing one (p, q) shape.
class Dataset {
 public:
  Dataset() = default;
  // Throws DataError when records disagree on p or q, or when a field breaks
  // the record invariants (negative/non-finite v, delta outside {0,1}, ...).
  explicit Dataset(std::vector<ObservedRecord> records, ColumnNames names = {});

  std::size_t n() const noexcept { return records_.size(); }
  std::size_t p() const noexcept { return p_; }
  std::size_t q() const noexcept { return q_; }
  bool empty() const noexcept { return records_.empty(); }

  const std::vector<ObservedRecord>& records() const noexcept { return records_; }
  const ObservedRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  const ColumnNames& names() const noexcept { return names_; }

  std::size_t n_uncensored() const noexcept;
  std::size_t n_censored() const noexcept { return n() - n_uncensored(); }

  std::vector<double> v_column() const;
  std::vector<int> delta_column() const;
  std::vector<double> y_column() const;

 private:
  std::vector<ObservedRecord> records_;
  ColumnNames names_;
  std::size_t p_ = 0;
  std::size_t q_ = 0;
};

// Column-role mapping for CSV input.
struct ColumnSchema {
  std::string v;
  std::string delta;
  std::string y;
  std::vector<std::string> z;
  std::vector<std::string> h_extra;
};

// Accepts {"v": ..., "delta": ..., "y": ..., "z": [...], "h": [...]}.
ColumnSchema schema_from_json(const nlohmann::json& j);
ColumnSchema load_schema_file(const std::string& path);

Dataset read_csv(std::istream& in, const ColumnSchema& schema);
Dataset load_csv(const std::string& path, const ColumnSchema& schema);

// Writes v, delta, z..., h..., y under the dataset's column names, with
// round-trip precision.
void write_csv(std::ostream& out, const Dataset& d);

struct ValidationReport {
  std::size_t n = 0;
  std::size_t n_censored = 0;
  double censoring_fraction = 0.0;
  std::size_t design_columns = 0;  // p + 2
  std::size_t design_rank = 0;     // rank of the complete-case (1, v, z) design
  bool rank_deficient = false;
  bool no_complete_cases = false;
  bool too_few_rows = false;       // n < p + 2
  std::vector<std::string> flags;
};

ValidationReport validate_dataset(const Dataset& d);

// Selection scheme producing a WeightVector.
enum class Scheme { CC, IpcwLogistic, IpcwKm, IpcwCox };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);

struct WeightVector {
  std::vector<double> pi;  // estimated P(delta = 1 | ...) per record
  std::vector<double> w;   // 0 where delta = 0
  Scheme scheme = Scheme::CC;
  bool stabilized = false;
  std::size_t n_floored = 0;    // records whose pi was raised to the floor
  std::size_t n_truncated = 0;  // weights clipped by percentile truncation
  std::size_t n_degenerate = 0; // Cox survival products that hit a nonpositive factor
  std::vector<bool> floored;

  std::size_t size() const noexcept { return w.size(); }
};

}  // namespace censreg
