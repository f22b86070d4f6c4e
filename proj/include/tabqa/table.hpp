#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"

#include "tabqa/error.hpp"
#include "tabqa/text.hpp"

namespace tabqa {

enum class ColumnType { Numerical, Temporal, Categorical };

inline std::string to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Numerical: return "numerical";
    case ColumnType::Temporal: return "temporal";
    case ColumnType::Categorical: return "categorical";
  }
  return "categorical";
}

inline ColumnType column_type_from_string(std::string_view s) {
  if (s == "numerical") return ColumnType::Numerical;
  if (s == "temporal") return ColumnType::Temporal;
  if (s == "categorical") return ColumnType::Categorical;
  throw SchemaError("unknown column type '" + std::string(s) + "'");
}

/// Marker used in formulated questions ("<N>", "<T>", "<C>").
inline std::string type_marker(ColumnType t) {
  switch (t) {
    case ColumnType::Numerical: return "<N>";
    case ColumnType::Temporal: return "<T>";
    case ColumnType::Categorical: return "<C>";
  }
  return "<C>";
}

namespace cell {

/// Locale-free number parse; strips well-formed thousands separators.
inline std::optional<double> parse_number(std::string_view raw) {
  std::string s = text::trim(raw);
  if (s.empty()) return std::nullopt;
  if (s.find(',') != std::string::npos) {
    // Integer part must look like 1,234,567.
    std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    std::size_t dot = s.find('.');
    std::string ip = s.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    std::size_t first = ip.find(',');
    if (first == 0 || first > 3 || (ip.size() - first) % 4 != 0) return std::nullopt;
    for (std::size_t i = 0; i < ip.size(); ++i) {
      bool comma_slot = i >= first && (i - first) % 4 == 0;
      if (comma_slot ? ip[i] != ',' : !std::isdigit(static_cast<unsigned char>(ip[i])))
        return std::nullopt;
    }
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  }
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  double v = 0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

/// Temporal sort key in days. Accepts a bare year in [1000, 2999] or an ISO
/// date YYYY-MM-DD.
inline std::optional<double> parse_temporal(std::string_view raw) {
  std::string s = text::trim(raw);
  auto all_digits = [](std::string_view v) {
    return !v.empty() && std::all_of(v.begin(), v.end(),
                                     [](unsigned char c) { return std::isdigit(c); });
  };
  if (s.size() == 4 && all_digits(s)) {
    int y = std::stoi(s);
    if (y < 1000 || y > 2999) return std::nullopt;
    return static_cast<double>(days_from_civil(y, 1, 1));
  }
  if (s.size() == 10 && s[4] == '-' && s[7] == '-' && all_digits(s.substr(0, 4)) &&
      all_digits(s.substr(5, 2)) && all_digits(s.substr(8, 2))) {
    int y = std::stoi(s.substr(0, 4));
    int m = std::stoi(s.substr(5, 2));
    int d = std::stoi(s.substr(8, 2));
    static constexpr int kDays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12 || d < 1 || d > kDays[m - 1]) return std::nullopt;
    return static_cast<double>(days_from_civil(y, static_cast<unsigned>(m),
                                               static_cast<unsigned>(d)));
  }
  return std::nullopt;
}

} // namespace cell

/// Temporal if >= 95% of non-empty cells are dates or 4-digit years, else
/// Numerical if >= 95% parse as numbers, else Categorical.
inline ColumnType infer_column_type(const std::vector<std::string>& values) {
  if (values.empty()) throw InferError("cannot infer the type of an empty column");
  std::size_t non_empty = 0, temporal = 0, numeric = 0;
  for (const auto& v : values) {
    if (text::trim(v).empty()) continue;
    ++non_empty;
    if (cell::parse_temporal(v)) ++temporal;
    if (cell::parse_number(v)) ++numeric;
  }
  if (non_empty == 0) throw InferError("column has no non-empty cells");
  auto share = [&](std::size_t n) { return static_cast<double>(n) / static_cast<double>(non_empty); };
  if (share(temporal) >= 0.95) return ColumnType::Temporal;
  if (share(numeric) >= 0.95) return ColumnType::Numerical;
  return ColumnType::Categorical;
}

struct Column {
  std::string name;
  ColumnType type = ColumnType::Categorical;
  /// Trimmed cell text; empty means null.
  std::vector<std::string> text;
  /// Numeric value (Numerical) or day key (Temporal); nullopt for null cells.
  std::vector<std::optional<double>> number;

  bool is_null(std::size_t row) const {
    return type == ColumnType::Categorical ? text[row].empty() : !number[row].has_value();
  }
};

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
};

/// Immutable after construction.
class DataTable {
public:
  DataTable() = default;

  DataTable(std::string name, std::vector<Column> columns) : name_(std::move(name)), columns_(std::move(columns)) {
    row_count_ = columns_.empty() ? 0 : columns_.front().text.size();
    std::set<std::string> seen;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& c = columns_[i];
      if (c.text.size() != row_count_ || c.number.size() != row_count_)
        throw SchemaError("column '" + c.name + "' has a different length");
      auto key = fold(c.name);
      if (!seen.insert(key).second) throw SchemaError("duplicate column name '" + c.name + "'");
      index_[key] = i;
    }
  }

  const std::string& name() const { return name_; }
  std::size_t row_count() const { return row_count_; }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(fold(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool has(std::string_view name) const { return find(name).has_value(); }

  const Column& column(std::string_view name) const {
    auto i = find(name);
    if (!i) throw SchemaError("unknown column '" + std::string(name) + "'");
    return columns_[*i];
  }

  std::vector<std::string> columns_of(ColumnType t) const {
    std::vector<std::string> out;
    for (const auto& c : columns_)
      if (c.type == t) out.push_back(c.name);
    return out;
  }

  /// Distinct non-null cell texts in first-appearance order.
  std::vector<std::string> distinct(std::string_view name) const {
    const auto& c = column(name);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < row_count_; ++r) {
      if (c.is_null(r)) continue;
      if (seen.insert(c.text[r]).second) out.push_back(c.text[r]);
    }
    return out;
  }

  std::size_t cardinality(std::string_view name) const { return distinct(name).size(); }

  nlohmann::json schema_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns_) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
    return {{"name", name_}, {"columns", cols}, {"row_count", row_count_}};
  }

  /// Canonical CSV rendering (RFC-4180 quoting where needed).
  std::string to_csv() const {
    std::ostringstream out;
    auto emit = [&](const std::string& v) {
      if (v.find_first_of(",\"\n\r") != std::string::npos) {
        out << '"';
        for (char ch : v) {
          if (ch == '"') out << '"';
          out << ch;
        }
        out << '"';
      } else {
        out << v;
      }
    };
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out << ',';
      emit(columns_[i].name);
    }
    out << '\n';
    for (std::size_t r = 0; r < row_count_; ++r) {
      for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (i) out << ',';
        emit(columns_[i].text[r]);
      }
      out << '\n';
    }
    return out.str();
  }

  static std::string fold(std::string_view s) { return text::lower(text::trim(s)); }

private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

/// RFC-4180 record splitter. Returns rows of raw fields.
inline std::vector<std::vector<std::string>> split_csv(std::string_view data, char delim) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false, any = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < data.size() && data[i + 1] == '\n') ++i;
      end_row();
      any = false;
    } else if (c == '\n') {
      end_row();
      any = false;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw ParseError(rows.size(), "unterminated quoted field");
  if (any) end_row();
  // Drop blank lines.
  std::vector<std::vector<std::string>> out;
  for (auto& r : rows)
    if (!(r.size() == 1 && text::trim(r[0]).empty())) out.push_back(std::move(r));
  return out;
}

} // namespace detail

inline Column make_column(std::string name, std::vector<std::string> cells) {
  Column c;
  c.name = text::trim(name);
  for (auto& v : cells) v = text::trim(v);
  try {
    c.type = infer_column_type(cells);
  } catch (const InferError&) {
    c.type = ColumnType::Categorical;
  }
  c.number.resize(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (cells[r].empty()) continue;
    if (c.type == ColumnType::Numerical) c.number[r] = cell::parse_number(cells[r]);
    if (c.type == ColumnType::Temporal) c.number[r] = cell::parse_temporal(cells[r]);
  }
  c.text = std::move(cells);
  return c;
}

inline DataTable load_table(std::string_view bytes, std::string name = "table",
                            const CsvOptions& options = {}) {
  if (text::trim(bytes).empty()) throw EmptyInput("CSV input is empty");
  auto rows = detail::split_csv(bytes, options.delimiter);
  if (rows.empty()) throw EmptyInput("CSV input has no records");
  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (options.header) {
    header = rows[0];
    first_data = 1;
  } else {
    for (std::size_t i = 0; i < rows[0].size(); ++i) header.push_back("column" + std::to_string(i + 1));
  }
  const std::size_t width = header.size();
  std::vector<std::vector<std::string>> cells(width);
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    std::size_t data_row = r - first_data + 1;
    if (rows[r].size() != width)
      throw ParseError(data_row, "row " + std::to_string(data_row) + " has " +
                                     std::to_string(rows[r].size()) + " cells, expected " +
                                     std::to_string(width));
    for (std::size_t c = 0; c < width; ++c) cells[c].push_back(std::move(rows[r][c]));
  }
  std::vector<Column> columns;
  for (std::size_t c = 0; c < width; ++c) columns.push_back(make_column(header[c], std::move(cells[c])));
  try {
    return DataTable(std::move(name), std::move(columns));
  } catch (const SchemaError& e) {
    throw ParseError(0, e.what());
  }
}

inline DataTable load_table(std::istream& in, std::string name = "table", const CsvOptions& options = {}) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_table(buf.str(), std::move(name), options);
}

/// Loads a CSV file; the table is named after the file stem.
inline DataTable load_table_file(const std::filesystem::path& path, const CsvOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmptyInput("cannot open " + path.string());
  return load_table(in, path.stem().string(), options);
}

// ---------------------------------------------------------------------------
// Filters and subspaces

enum class FilterOp { Equals, InSet, NumericRange, TemporalRange };

inline std::string to_string(FilterOp op) {
  switch (op) {
    case FilterOp::Equals: return "equals";
    case FilterOp::InSet: return "in-set";
    case FilterOp::NumericRange: return "numeric-range";
    case FilterOp::TemporalRange: return "temporal-range";
  }
  return "equals";
}

inline FilterOp filter_op_from_string(std::string_view s) {
  if (s == "equals") return FilterOp::Equals;
  if (s == "in-set") return FilterOp::InSet;
  if (s == "numeric-range") return FilterOp::NumericRange;
  if (s == "temporal-range") return FilterOp::TemporalRange;
  throw SchemaError("unknown filter op '" + std::string(s) + "'");
}

struct Filter {
  std::string column;
  FilterOp op = FilterOp::Equals;
  /// equals: one value; in-set: any number; ranges: [lo, hi] as text.
  std::vector<std::string> values;

  static Filter equals(std::string column, std::string value) {
    return {std::move(column), FilterOp::Equals, {std::move(value)}};
  }
  static Filter range(std::string column, FilterOp op, std::string lo, std::string hi) {
    return {std::move(column), op, {std::move(lo), std::move(hi)}};
  }

  auto operator<=>(const Filter&) const = default;
  bool operator==(const Filter&) const = default;
};

/// Conjunction of filters; empty means the full table.
struct Subspace {
  std::vector<Filter> filters;

  bool empty() const { return filters.empty(); }
  auto operator<=>(const Subspace&) const = default;
  bool operator==(const Subspace&) const = default;
};

inline void validate_subspace(const DataTable& table, const Subspace& s) {
  std::set<std::string> seen;
  for (const auto& f : s.filters) {
    auto idx = table.find(f.column);
    if (!idx) throw SchemaError("unknown column '" + f.column + "'");
    const auto& col = table.column(*idx);
    if (!seen.insert(DataTable::fold(f.column)).second)
      throw SchemaError("more than one filter on column '" + f.column + "'");
    switch (f.op) {
      case FilterOp::Equals:
        if (f.values.size() != 1) throw SchemaError("equals filter needs exactly one value");
        break;
      case FilterOp::InSet:
        break;
      case FilterOp::NumericRange:
        if (col.type != ColumnType::Numerical) throw SchemaError("numeric-range on non-numerical column '" + f.column + "'");
        if (f.values.size() != 2 || !cell::parse_number(f.values[0]) || !cell::parse_number(f.values[1]))
          throw SchemaError("numeric-range needs two numbers");
        break;
      case FilterOp::TemporalRange:
        if (col.type != ColumnType::Temporal) throw SchemaError("temporal-range on non-temporal column '" + f.column + "'");
        if (f.values.size() != 2 || !cell::parse_temporal(f.values[0]) || !cell::parse_temporal(f.values[1]))
          throw SchemaError("temporal-range needs two dates or years");
        break;
    }
  }
}

/// Rows satisfying every filter, ascending.
inline std::vector<std::size_t> apply_subspace(const DataTable& table, const Subspace& s) {
  validate_subspace(table, s);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    bool keep = true;
    for (const auto& f : s.filters) {
      const auto& col = table.column(f.column);
      if (col.is_null(r)) {
        keep = false;
        break;
      }
      switch (f.op) {
        case FilterOp::Equals:
          keep = col.text[r] == f.values[0];
          break;
        case FilterOp::InSet:
          keep = std::find(f.values.begin(), f.values.end(), col.text[r]) != f.values.end();
          break;
        case FilterOp::NumericRange: {
          double v = *col.number[r];
          keep = v >= *cell::parse_number(f.values[0]) && v <= *cell::parse_number(f.values[1]);
          break;
        }
        case FilterOp::TemporalRange: {
          double v = *col.number[r];
          keep = v >= *cell::parse_temporal(f.values[0]) && v <= *cell::parse_temporal(f.values[1]);
          break;
        }
      }
      if (!keep) break;
    }
    if (keep) rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Agg { Sum, Mean, Count, Min, Max };

inline std::string to_string(Agg a) {
  switch (a) {
    case Agg::Sum: return "sum";
    case Agg::Mean: return "mean";
    case Agg::Count: return "count";
    case Agg::Min: return "min";
    case Agg::Max: return "max";
  }
  return "sum";
}

inline Agg agg_from_string(std::string_view s) {
  if (s == "sum") return Agg::Sum;
  if (s == "mean") return Agg::Mean;
  if (s == "count") return Agg::Count;
  if (s == "min") return Agg::Min;
  if (s == "max") return Agg::Max;
  throw SchemaError("unknown aggregation '" + std::string(s) + "'");
}

struct Measure {
  std::string column;
  Agg agg = Agg::Sum;

  auto operator<=>(const Measure&) const = default;
  bool operator==(const Measure&) const = default;
};

struct Group {
  std::string key;
  double value = 0;
  /// Temporal day key of the group (0 for categorical groups).
  double order = 0;

  bool operator==(const Group&) const = default;
};

/// Groups the subspace rows by `breakdown` and aggregates `measure` per
/// group. Without a breakdown a single group keyed "all" is returned (or none
/// when the subspace is empty); without a measure the value is the row count.
/// Null breakdown cells are skipped; null measure cells are excluded, and a
/// group whose measure cells are all null is dropped unless agg is sum/count.
inline std::vector<Group> group_and_aggregate(const DataTable& table, const Subspace& s,
                                              const std::optional<std::string>& breakdown,
                                              const std::optional<Measure>& measure) {
  const Column* bd = nullptr;
  const Column* mc = nullptr;
  if (breakdown) {
    bd = &table.column(*breakdown);
    if (bd->type == ColumnType::Numerical)
      throw SchemaError("breakdown column '" + *breakdown + "' must be temporal or categorical");
  }
  if (measure) {
    mc = &table.column(measure->column);
    if (mc->type != ColumnType::Numerical)
      throw SchemaError("measure column '" + measure->column + "' is not numerical");
  }
  auto rows = apply_subspace(table, s);

  struct Acc {
    double sum = 0, mn = INFINITY, mx = -INFINITY;
    std::size_t n = 0, rows = 0;
    double order = 0;
  };
  std::vector<std::string> keys;
  std::map<std::string, Acc> acc;
  for (auto r : rows) {
    std::string key = "all";
    double order = 0;
    if (bd) {
      if (bd->is_null(r)) continue;
      key = bd->text[r];
      if (bd->type == ColumnType::Temporal) order = *bd->number[r];
    }
    auto [it, fresh] = acc.try_emplace(key);
    if (fresh) {
      keys.push_back(key);
      it->second.order = order;
    }
    auto& a = it->second;
    ++a.rows;
    if (mc) {
      if (mc->is_null(r)) continue;
      double v = *mc->number[r];
      a.sum += v;
      a.mn = std::min(a.mn, v);
      a.mx = std::max(a.mx, v);
      ++a.n;
    }
  }
  if (bd && bd->type == ColumnType::Temporal) {
    std::stable_sort(keys.begin(), keys.end(),
                     [&](const auto& x, const auto& y) { return acc[x].order < acc[y].order; });
  }
  std::vector<Group> out;
  for (const auto& k : keys) {
    const auto& a = acc[k];
    Group g{k, 0, a.order};
    if (!mc) {
      g.value = static_cast<double>(a.rows);
    } else {
      switch (measure->agg) {
        case Agg::Sum: g.value = a.sum; break;
        case Agg::Count: g.value = static_cast<double>(a.n); break;
        case Agg::Mean:
          if (!a.n) continue;
          g.value = a.sum / static_cast<double>(a.n);
          break;
        case Agg::Min:
          if (!a.n) continue;
          g.value = a.mn;
          break;
        case Agg::Max:
          if (!a.n) continue;
          g.value = a.mx;
          break;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

} // namespace tabqa
