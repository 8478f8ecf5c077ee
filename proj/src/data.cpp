#include "gcm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gcm/error.hpp"

namespace gcm {

std::size_t Column::size() const {
  return std::visit([](const auto& v) { return v.size(); }, values);
}

Cell Column::cell(std::size_t row) const {
  if (is_continuous()) return std::get<0>(values)[row];
  return std::get<1>(values)[row];
}

const std::vector<double>& Column::reals() const {
  if (!is_continuous()) {
    throw Error(ErrorCode::kTypeMismatch, "column '" + name + "' is categorical");
  }
  return std::get<0>(values);
}

const std::vector<std::string>& Column::labels() const {
  if (is_continuous()) {
    throw Error(ErrorCode::kTypeMismatch, "column '" + name + "' is continuous");
  }
  return std::get<1>(values);
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const Column& col = columns_[c];
    if (!names.insert(col.name).second) {
      throw Error(ErrorCode::kDuplicateHeader, "duplicate column '" + col.name + "'");
    }
    if (c == 0) {
      num_rows_ = col.size();
    } else if (col.size() != num_rows_) {
      throw Error(ErrorCode::kRaggedRow, "column '" + col.name + "' has " +
                                             std::to_string(col.size()) + " rows, expected " +
                                             std::to_string(num_rows_));
    }
    if (col.is_continuous()) {
      for (double v : std::get<0>(col.values)) {
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::kNonFinite, "column '" + col.name + "' has a non-finite value");
        }
      }
    }
  }
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

bool Dataset::has_column(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::kUnknownColumn, "unknown column '" + std::string(name) + "'");
}

const std::vector<double>& Dataset::reals(std::string_view name) const {
  return column(name).reals();
}

Dataset Dataset::select(std::span<const std::string> names) const {
  std::vector<Column> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(column(n));
  return Dataset(std::move(out));
}

Dataset Dataset::take_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> out;
  out.reserve(columns_.size());
  for (const auto& col : columns_) {
    Column picked{col.name, {}};
    std::visit(
        [&](const auto& values) {
          std::decay_t<decltype(values)> sub;
          sub.reserve(rows.size());
          for (std::size_t r : rows) sub.push_back(values.at(r));
          picked.values = std::move(sub);
        },
        col.values);
    out.push_back(std::move(picked));
  }
  Dataset d(std::move(out));
  if (columns_.empty()) d.num_rows_ = 0;
  return d;
}

bool parse_real(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

// Splits CSV text into records of raw fields. Supports RFC-4180 quoting.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // handled with the '\n'
    } else if (c == '\n') {
      end_record();
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw Error(ErrorCode::kParse, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  // Trailing blank lines.
  while (!records.empty() && records.back().size() == 1 && records.back()[0].empty()) {
    records.pop_back();
  }
  return records;
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quote(const std::string& s) {
  if (!needs_quoting(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Dataset read_csv(std::string_view text) {
  const auto records = split_records(text);
  if (records.empty()) throw Error(ErrorCode::kEmptyFile, "CSV input is empty");
  const auto& header = records.front();
  const std::size_t width = header.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw Error(ErrorCode::kRaggedRow, "CSV row " + std::to_string(r + 1) + " has " +
                                             std::to_string(records[r].size()) +
                                             " fields, header has " + std::to_string(width));
    }
  }
  std::vector<Column> columns;
  columns.reserve(width);
  const std::size_t n = records.size() - 1;
  for (std::size_t c = 0; c < width; ++c) {
    std::vector<double> reals;
    reals.reserve(n);
    bool continuous = true;
    for (std::size_t r = 1; r <= n; ++r) {
      const std::string& cell = records[r][c];
      if (cell.empty()) {
        throw Error(ErrorCode::kMissingValue, "missing value in column '" + header[c] +
                                                  "' at row " + std::to_string(r + 1));
      }
      double v = 0.0;
      if (continuous && parse_real(cell, v)) {
        reals.push_back(v);
      } else {
        continuous = false;
      }
    }
    if (continuous) {
      columns.push_back(Column::continuous(header[c], std::move(reals)));
    } else {
      std::vector<std::string> labels;
      labels.reserve(n);
      for (std::size_t r = 1; r <= n; ++r) labels.push_back(records[r][c]);
      columns.push_back(Column::categorical(header[c], std::move(labels)));
    }
  }
  return Dataset(std::move(columns));
}

std::string write_csv(const Dataset& data) {
  std::string out;
  const auto& cols = data.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c > 0) out += ',';
    out += quote(cols[c].name);
  }
  out += '\n';
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c > 0) out += ',';
      if (cols[c].is_continuous()) {
        out += format_real(std::get<0>(cols[c].values)[r]);
      } else {
        out += quote(std::get<1>(cols[c].values)[r]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

}  // namespace gcm
