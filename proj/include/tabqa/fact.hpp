#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tabqa/error.hpp"
#include "tabqa/table.hpp"

namespace tabqa {

enum class FactType {
  Value,
  Difference,
  Proportion,
  Trend,
  Categorization,
  Distribution,
  Rank,
  Association,
  Extreme,
  Outlier,
};

inline constexpr std::array<FactType, 10> kAllFactTypes = {
    FactType::Value,        FactType::Difference,   FactType::Proportion, FactType::Trend,
    FactType::Categorization, FactType::Distribution, FactType::Rank,     FactType::Association,
    FactType::Extreme,      FactType::Outlier};

inline std::string to_string(FactType t) {
  switch (t) {
    case FactType::Value: return "value";
    case FactType::Difference: return "difference";
    case FactType::Proportion: return "proportion";
    case FactType::Trend: return "trend";
    case FactType::Categorization: return "categorization";
    case FactType::Distribution: return "distribution";
    case FactType::Rank: return "rank";
    case FactType::Association: return "association";
    case FactType::Extreme: return "extreme";
    case FactType::Outlier: return "outlier";
  }
  return "value";
}

inline FactType fact_type_from_string(std::string_view s) {
  for (auto t : kAllFactTypes)
    if (to_string(t) == s) return t;
  throw SchemaError("unknown fact type '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Required-field matrix

enum class Need { None, Optional, Required };
enum class BreakdownKind { Any, Temporal, Categorical };
enum class FocusRule { None, One, Two, AtLeastOne };

struct FieldMask {
  Need breakdown = Need::None;
  BreakdownKind kind = BreakdownKind::Any;
  int measures = 0;
  FocusRule focus = FocusRule::None;

  bool operator==(const FieldMask&) const = default;
};

/// Per-type field requirements.
///
///   value          no breakdown, 1 measure
///   difference     breakdown, 1 measure, 2 focus groups
///   proportion     categorical breakdown, 1 measure, 1 focus group
///   trend          temporal breakdown, 1 measure
///   categorization categorical breakdown, no measure
///   distribution   breakdown, 1 measure
///   rank           breakdown, 1 measure
///   association    optional breakdown, 2 measures
///   extreme        breakdown, 1 measure, 1 focus group (>= 1 for threshold roles)
///   outlier        breakdown, 1 measure, >= 1 focus group
inline constexpr FieldMask required_fields(FactType t) {
  switch (t) {
    case FactType::Value: return {Need::None, BreakdownKind::Any, 1, FocusRule::None};
    case FactType::Difference: return {Need::Required, BreakdownKind::Any, 1, FocusRule::Two};
    case FactType::Proportion: return {Need::Required, BreakdownKind::Categorical, 1, FocusRule::One};
    case FactType::Trend: return {Need::Required, BreakdownKind::Temporal, 1, FocusRule::None};
    case FactType::Categorization: return {Need::Required, BreakdownKind::Categorical, 0, FocusRule::None};
    case FactType::Distribution: return {Need::Required, BreakdownKind::Any, 1, FocusRule::None};
    case FactType::Rank: return {Need::Required, BreakdownKind::Any, 1, FocusRule::None};
    case FactType::Association: return {Need::Optional, BreakdownKind::Any, 2, FocusRule::None};
    case FactType::Extreme: return {Need::Required, BreakdownKind::Any, 1, FocusRule::One};
    case FactType::Outlier: return {Need::Required, BreakdownKind::Any, 1, FocusRule::AtLeastOne};
  }
  return {};
}

inline bool breakdown_admissible(FactType t, ColumnType c) {
  auto mask = required_fields(t);
  if (mask.breakdown == Need::None || c == ColumnType::Numerical) return false;
  switch (mask.kind) {
    case BreakdownKind::Any: return true;
    case BreakdownKind::Temporal: return c == ColumnType::Temporal;
    case BreakdownKind::Categorical: return c == ColumnType::Categorical;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Facts

enum class FocusRole { Item, Max, Min, AboveAverage, BelowAverage, Outlier };

inline std::string to_string(FocusRole r) {
  switch (r) {
    case FocusRole::Item: return "item";
    case FocusRole::Max: return "max";
    case FocusRole::Min: return "min";
    case FocusRole::AboveAverage: return "above-average";
    case FocusRole::BelowAverage: return "below-average";
    case FocusRole::Outlier: return "outlier";
  }
  return "item";
}

inline FocusRole focus_role_from_string(std::string_view s) {
  for (auto r : {FocusRole::Item, FocusRole::Max, FocusRole::Min, FocusRole::AboveAverage,
                 FocusRole::BelowAverage, FocusRole::Outlier})
    if (to_string(r) == s) return r;
  throw SchemaError("unknown focus role '" + std::string(s) + "'");
}

inline bool is_threshold(FocusRole r) {
  return r == FocusRole::AboveAverage || r == FocusRole::BelowAverage;
}

/// A group referenced by a fact, tagged with why it is referenced.
struct FocusItem {
  std::string key;
  FocusRole role = FocusRole::Item;

  auto operator<=>(const FocusItem&) const = default;
  bool operator==(const FocusItem&) const = default;
};

struct DataFact {
  FactType type = FactType::Value;
  Subspace subspace;
  std::optional<std::string> breakdown;
  std::vector<Measure> measures;
  std::vector<FocusItem> focus;

  bool operator==(const DataFact&) const = default;
};

inline nlohmann::json to_json(const Filter& f) {
  nlohmann::json value;
  if (f.op == FilterOp::Equals && f.values.size() == 1)
    value = f.values[0];
  else
    value = f.values;
  return {{"column", f.column}, {"op", to_string(f.op)}, {"value", value}};
}

inline Filter filter_from_json(const nlohmann::json& j) {
  Filter f;
  f.column = j.at("column").get<std::string>();
  f.op = filter_op_from_string(j.value("op", std::string("equals")));
  const auto& v = j.at("value");
  if (v.is_array()) {
    for (const auto& e : v) f.values.push_back(e.is_string() ? e.get<std::string>() : e.dump());
  } else {
    f.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  }
  return f;
}

inline nlohmann::json to_json(const DataFact& f) {
  nlohmann::json sub = nlohmann::json::array();
  for (const auto& flt : f.subspace.filters) sub.push_back(to_json(flt));
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : f.measures) ms.push_back({{"column", m.column}, {"agg", to_string(m.agg)}});
  nlohmann::json focus = nlohmann::json::array();
  for (const auto& x : f.focus) focus.push_back({{"key", x.key}, {"role", to_string(x.role)}});
  return {{"type", to_string(f.type)},
          {"subspace", sub},
          {"breakdown", f.breakdown ? nlohmann::json(*f.breakdown) : nlohmann::json(nullptr)},
          {"measure", ms},
          {"focus", focus}};
}

inline DataFact fact_from_json(const nlohmann::json& j) {
  DataFact f;
  f.type = fact_type_from_string(j.at("type").get<std::string>());
  if (j.contains("subspace"))
    for (const auto& e : j.at("subspace")) f.subspace.filters.push_back(filter_from_json(e));
  if (j.contains("breakdown") && !j.at("breakdown").is_null())
    f.breakdown = j.at("breakdown").get<std::string>();
  if (j.contains("measure"))
    for (const auto& e : j.at("measure"))
      f.measures.push_back({e.at("column").get<std::string>(),
                            agg_from_string(e.value("agg", std::string("sum")))});
  if (j.contains("focus"))
    for (const auto& e : j.at("focus")) {
      if (e.is_string())
        f.focus.push_back({e.get<std::string>(), FocusRole::Item});
      else
        f.focus.push_back({e.at("key").get<std::string>(),
                           focus_role_from_string(e.value("role", std::string("item")))});
    }
  return f;
}

/// Canonical serialization; used as the deterministic tie-breaker.
inline std::string canonical(const DataFact& f) { return to_json(f).dump(); }

// ---------------------------------------------------------------------------
// Validation

/// Field-count violations that can be checked without a table.
inline std::vector<std::string> structural_violations(const DataFact& f) {
  std::vector<std::string> out;
  auto mask = required_fields(f.type);
  if (mask.breakdown == Need::Required && !f.breakdown) out.push_back("breakdown required");
  if (mask.breakdown == Need::None && f.breakdown) out.push_back("breakdown not allowed");
  if (static_cast<int>(f.measures.size()) != mask.measures)
    out.push_back("expected " + std::to_string(mask.measures) + " measure(s)");
  std::size_t n = f.focus.size();
  bool threshold = !f.focus.empty() && is_threshold(f.focus.front().role);
  switch (mask.focus) {
    case FocusRule::None:
      if (n) out.push_back("focus not allowed");
      break;
    case FocusRule::One:
      if (threshold ? n < 1 : n != 1) out.push_back("expected 1 focus item");
      break;
    case FocusRule::Two:
      if (n != 2) out.push_back("expected 2 focus items");
      break;
    case FocusRule::AtLeastOne:
      if (n < 1) out.push_back("expected at least 1 focus item");
      break;
  }
  for (const auto& x : f.focus) {
    bool ok = true;
    switch (f.type) {
      case FactType::Extreme:
        ok = x.role == FocusRole::Max || x.role == FocusRole::Min || is_threshold(x.role);
        if (ok && x.role != f.focus.front().role) ok = false;
        break;
      case FactType::Outlier: ok = x.role == FocusRole::Outlier || x.role == FocusRole::Item; break;
      default: ok = x.role == FocusRole::Item; break;
    }
    if (!ok) {
      out.push_back("focus role '" + to_string(x.role) + "' not valid for " + to_string(f.type));
      break;
    }
  }
  return out;
}

/// Empty result means the fact is valid against `x`. Never throws.
inline std::vector<std::string> validate_fact(const DataFact& f, const DataTable& x) {
  std::vector<std::string> out = structural_violations(f);
  bool schema_ok = true;
  auto check_column = [&](const std::string& name) -> const Column* {
    auto i = x.find(name);
    if (!i) {
      out.push_back("unknown column '" + name + "'");
      schema_ok = false;
      return nullptr;
    }
    return &x.column(*i);
  };
  if (f.breakdown) {
    if (const Column* c = check_column(*f.breakdown)) {
      auto kind = required_fields(f.type).kind;
      if (c->type == ColumnType::Numerical) {
        out.push_back("breakdown must be temporal or categorical");
        schema_ok = false;
      } else if (kind == BreakdownKind::Temporal && c->type != ColumnType::Temporal) {
        out.push_back("breakdown must be temporal");
        schema_ok = false;
      } else if (kind == BreakdownKind::Categorical && c->type != ColumnType::Categorical) {
        out.push_back("breakdown must be categorical");
        schema_ok = false;
      }
    }
  }
  for (const auto& m : f.measures) {
    if (const Column* c = check_column(m.column)) {
      if (c->type != ColumnType::Numerical) {
        out.push_back("measure '" + m.column + "' must be numerical");
        schema_ok = false;
      }
    }
  }
  try {
    validate_subspace(x, f.subspace);
  } catch (const Error& e) {
    out.push_back(e.what());
    schema_ok = false;
  }
  if (schema_ok && !f.focus.empty() && f.breakdown) {
    try {
      std::optional<Measure> m;
      if (!f.measures.empty()) m = f.measures.front();
      auto groups = group_and_aggregate(x, f.subspace, f.breakdown, m);
      for (const auto& item : f.focus) {
        bool found = std::any_of(groups.begin(), groups.end(),
                                 [&](const Group& g) { return g.key == item.key; });
        if (!found) out.push_back("focus '" + item.key + "' is not a group of the fact");
      }
    } catch (const Error& e) {
      out.push_back(e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

enum class TrendDirection { Decreasing = -1, Flat = 0, Increasing = 1 };

inline std::string to_string(TrendDirection d) {
  switch (d) {
    case TrendDirection::Decreasing: return "decreasing";
    case TrendDirection::Flat: return "flat";
    case TrendDirection::Increasing: return "increasing";
  }
  return "flat";
}

/// Type-specific computed content of a fact. Only the members relevant to
/// the fact's type are set.
struct Derived {
  std::optional<double> value;
  std::optional<TrendDirection> direction;
  std::optional<double> slope;
  std::optional<Group> max, min;
  std::optional<double> average;
  std::vector<std::string> highlighted;  // outliers or threshold groups
  std::vector<Group> ranked;
  std::optional<double> correlation;
  std::optional<double> intercept;       // regression of second measure on first
  std::optional<double> regression_slope;
  std::optional<double> share, total;
  std::optional<double> gap;
};

struct FactResult {
  DataFact fact;
  std::vector<Group> groups;
  /// Second measure series (association only), aligned with `groups`.
  std::vector<Group> groups2;
  Derived derived;
  std::optional<ColumnType> breakdown_type;
};

namespace stats {

inline double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean(x), my = mean(y), sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx == 0 ? 0.0 : sxy / sxx;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean(x), my = mean(y), sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Linear-interpolated quantile of sorted data.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0;
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

/// Indices of outlying values: |z| > 3 for n >= 10, else outside 1.5 x IQR.
inline std::vector<std::size_t> outliers(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  if (v.size() < 3) return out;
  if (v.size() >= 10) {
    double m = mean(v), ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    double sd = std::sqrt(ss / static_cast<double>(v.size()));
    if (sd == 0) return out;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::fabs((v[i] - m) / sd) > 3.0) out.push_back(i);
    return out;
  }
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  double q1 = quantile(sorted, 0.25), q3 = quantile(sorted, 0.75), iqr = q3 - q1;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] < q1 - 1.5 * iqr || v[i] > q3 + 1.5 * iqr) out.push_back(i);
  return out;
}

} // namespace stats

inline const Group* find_group(const std::vector<Group>& groups, const std::string& key) {
  for (const auto& g : groups)
    if (g.key == key) return &g;
  return nullptr;
}

/// Groups and derived payload of a fact. Focus is optional for evaluation:
/// payload parts that depend on it (proportion share, difference gap) are
/// only filled when focus is present.
inline FactResult evaluate_fact(const DataFact& f, const DataTable& x) {
  FactResult r;
  r.fact = f;
  if (f.breakdown) r.breakdown_type = x.column(*f.breakdown).type;
  std::optional<Measure> m;
  if (!f.measures.empty()) m = f.measures.front();
  auto& d = r.derived;

  if (f.type == FactType::Association) {
    if (f.measures.size() != 2) throw SchemaError("association needs two measures");
    std::vector<double> xs, ys;
    if (f.breakdown) {
      auto a = group_and_aggregate(x, f.subspace, f.breakdown, f.measures[0]);
      auto b = group_and_aggregate(x, f.subspace, f.breakdown, f.measures[1]);
      for (const auto& g : a) {
        if (const Group* h = find_group(b, g.key)) {
          r.groups.push_back(g);
          r.groups2.push_back(*h);
        }
      }
    } else {
      const auto& ca = x.column(f.measures[0].column);
      const auto& cb = x.column(f.measures[1].column);
      if (ca.type != ColumnType::Numerical || cb.type != ColumnType::Numerical)
        throw SchemaError("association measures must be numerical");
      for (auto row : apply_subspace(x, f.subspace)) {
        if (ca.is_null(row) || cb.is_null(row)) continue;
        std::string key = std::to_string(row + 1);
        r.groups.push_back({key, *ca.number[row], 0});
        r.groups2.push_back({key, *cb.number[row], 0});
      }
    }
    for (std::size_t i = 0; i < r.groups.size(); ++i) {
      xs.push_back(r.groups[i].value);
      ys.push_back(r.groups2[i].value);
    }
    if (xs.size() < 2) throw InsufficientData("association needs at least 2 points");
    d.correlation = stats::pearson(xs, ys);
    if (!d.correlation) throw InsufficientData("association needs non-constant measures");
    d.regression_slope = stats::slope(xs, ys);
    d.intercept = stats::mean(ys) - *d.regression_slope * stats::mean(xs);
    return r;
  }

  r.groups = group_and_aggregate(x, f.subspace, f.breakdown,
                                 f.type == FactType::Categorization ? std::nullopt : m);
  const auto& g = r.groups;
  std::vector<double> values;
  for (const auto& e : g) values.push_back(e.value);

  auto need = [&](std::size_t n, const char* what) {
    if (g.size() < n) throw InsufficientData(std::string(what));
  };

  switch (f.type) {
    case FactType::Value:
      need(1, "no rows in subspace");
      d.value = g.front().value;
      break;
    case FactType::Trend: {
      need(2, "trend needs at least 2 points");
      std::vector<double> t;
      for (const auto& e : g) t.push_back(e.order);
      double s = stats::slope(t, values);
      double scale = 0;
      for (double v : values) scale = std::max(scale, std::fabs(v));
      d.slope = s;
      if (std::fabs(s) <= 1e-12 * std::max(scale, 1.0))
        d.direction = TrendDirection::Flat;
      else
        d.direction = s > 0 ? TrendDirection::Increasing : TrendDirection::Decreasing;
      break;
    }
    case FactType::Extreme: {
      need(1, "no groups in subspace");
      auto mx = std::max_element(g.begin(), g.end(), [](auto& a, auto& b) { return a.value < b.value; });
      auto mn = std::min_element(g.begin(), g.end(), [](auto& a, auto& b) { return a.value < b.value; });
      d.max = *mx;
      d.min = *mn;
      d.average = stats::mean(values);
      if (!f.focus.empty() && is_threshold(f.focus.front().role)) {
        bool above = f.focus.front().role == FocusRole::AboveAverage;
        for (const auto& e : g)
          if (above ? e.value > *d.average : e.value < *d.average) d.highlighted.push_back(e.key);
      }
      break;
    }
    case FactType::Outlier:
      for (auto i : stats::outliers(values)) d.highlighted.push_back(g[i].key);
      break;
    case FactType::Rank:
      d.ranked = g;
      std::stable_sort(d.ranked.begin(), d.ranked.end(),
                       [](const Group& a, const Group& b) { return a.value > b.value; });
      break;
    case FactType::Proportion: {
      need(1, "no groups in subspace");
      double total = std::accumulate(values.begin(), values.end(), 0.0);
      d.total = total;
      if (!f.focus.empty()) {
        const Group* a = find_group(g, f.focus.front().key);
        if (!a) throw SchemaError("focus '" + f.focus.front().key + "' is not a group");
        if (total == 0) throw InsufficientData("proportion of a zero total");
        d.share = a->value / total;
      }
      break;
    }
    case FactType::Difference:
      need(1, "no groups in subspace");
      if (f.focus.size() == 2) {
        const Group* a = find_group(g, f.focus[0].key);
        const Group* b = find_group(g, f.focus[1].key);
        if (!a || !b) throw SchemaError("difference focus is not a group");
        d.gap = a->value - b->value;
      }
      break;
    case FactType::Distribution:
    case FactType::Categorization:
      if (!g.empty()) {
        auto mx = std::max_element(g.begin(), g.end(), [](auto& a, auto& b) { return a.value < b.value; });
        auto mn = std::min_element(g.begin(), g.end(), [](auto& a, auto& b) { return a.value < b.value; });
        d.max = *mx;
        d.min = *mn;
      }
      break;
    case FactType::Association: break;
  }
  return r;
}

} // namespace tabqa
