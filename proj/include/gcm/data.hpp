#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gcm {

enum class ColumnType { kContinuous, kCategorical };

// A single cell: a finite real for continuous columns, a string for
// categorical ones.
using Cell = std::variant<double, std::string>;

using ColumnValues = std::variant<std::vector<double>, std::vector<std::string>>;

struct Column {
  std::string name;
  ColumnValues values;

  static Column continuous(std::string name, std::vector<double> values) {
    return Column{std::move(name), std::move(values)};
  }
  static Column categorical(std::string name, std::vector<std::string> values) {
    return Column{std::move(name), std::move(values)};
  }

  ColumnType type() const {
    return values.index() == 0 ? ColumnType::kContinuous : ColumnType::kCategorical;
  }
  bool is_continuous() const { return values.index() == 0; }
  std::size_t size() const;
  Cell cell(std::size_t row) const;

  const std::vector<double>& reals() const;
  const std::vector<std::string>& labels() const;
};

// Typed tabular data. Storage is column-major; every column has the same
// number of rows and continuous cells are finite.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_columns() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<std::string> column_names() const;

  bool has_column(std::string_view name) const;
  const Column& column(std::string_view name) const;
  const Column& column(std::size_t index) const { return columns_[index]; }

  // Continuous column values; throws kTypeMismatch for categorical columns.
  const std::vector<double>& reals(std::string_view name) const;

  Dataset select(std::span<const std::string> names) const;
  Dataset take_rows(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.num_rows_ == b.num_rows_ && a.columns_.size() == b.columns_.size() &&
           std::equal(a.columns_.begin(), a.columns_.end(), b.columns_.begin(),
                      [](const Column& x, const Column& y) {
                        return x.name == y.name && x.values == y.values;
                      });
  }

 private:
  std::vector<Column> columns_;
  std::size_t num_rows_ = 0;
};

// Header row, comma separator, '.' decimal point. A column is continuous iff
// every cell parses as a finite real. Empty cells are rejected.
Dataset read_csv(std::string_view text);
std::string write_csv(const Dataset& data);

// Shortest decimal string that parses back to the same double.
std::string format_real(double value);

// Parses a cell as a finite real; returns false if it is not one.
bool parse_real(std::string_view text, double& out);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace gcm
