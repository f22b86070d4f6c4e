#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tabqa/fact.hpp"
#include "tabqa/templates.hpp"

namespace tabqa {

inline constexpr const char* kChartSchemaVersion = "1.0";

inline const std::vector<std::string>& chart_bases() {
  static const std::vector<std::string> b = {"bar", "line", "pie", "area", "scatter"};
  return b;
}

inline const std::vector<std::string>& annotation_kinds() {
  static const std::vector<std::string> k = {"value-label", "dashed-difference-line", "trend-line",
                                             "highlight-color", "pointer", "rank-badge",
                                             "regression-line", "outlier-ring", "slice-emphasis"};
  return k;
}

/// A base chart plus its annotation kinds (sorted).
struct ChartKind {
  std::string base;
  std::vector<std::string> annotations;

  auto operator<=>(const ChartKind&) const = default;
  bool operator==(const ChartKind&) const = default;
};

/// Fact type and breakdown kind to annotated chart. Temporal breakdowns get
/// line-based variants for difference, rank and extreme.
inline ChartKind select_chart(FactType t, ColumnType breakdown) {
  const bool temporal = breakdown == ColumnType::Temporal;
  ChartKind k;
  switch (t) {
    case FactType::Value: k = {"bar", {"value-label"}}; break;
    case FactType::Difference: k = {temporal ? "line" : "bar", {"dashed-difference-line"}}; break;
    case FactType::Proportion: k = {"pie", {"slice-emphasis"}}; break;
    case FactType::Trend: k = {temporal ? "line" : "bar", {"trend-line"}}; break;
    case FactType::Categorization: k = {"bar", {"highlight-color"}}; break;
    case FactType::Distribution: k = {temporal ? "area" : "bar", {"value-label"}}; break;
    case FactType::Rank: k = {temporal ? "line" : "bar", {"rank-badge"}}; break;
    case FactType::Association: k = {"scatter", {"regression-line"}}; break;
    case FactType::Extreme: k = {temporal ? "line" : "bar", {"highlight-color", "pointer"}}; break;
    case FactType::Outlier: k = {temporal ? "line" : "scatter", {"outlier-ring"}}; break;
  }
  std::sort(k.annotations.begin(), k.annotations.end());
  return k;
}

/// Every (base, annotation set) the mapping can produce.
inline std::set<ChartKind> registered_charts() {
  std::set<ChartKind> out;
  for (auto t : kAllFactTypes)
    for (auto c : {ColumnType::Temporal, ColumnType::Categorical}) out.insert(select_chart(t, c));
  return out;
}

struct Annotation {
  std::string kind;
  std::vector<std::string> targets;
  nlohmann::json params = nlohmann::json::object();
};

struct Datum {
  std::string key;
  double value = 0;
  std::optional<double> value2;
};

struct ChartSpec {
  std::string base;
  nlohmann::json encodings = nlohmann::json::object();
  std::vector<Datum> data;
  std::vector<Annotation> annotations;
  std::string caption;
  double relevance = 0;
  DataFact fact;
};

inline nlohmann::json to_json(const ChartSpec& c) {
  nlohmann::json data = nlohmann::json::array();
  for (const auto& d : c.data) {
    nlohmann::json j = {{"key", d.key}, {"value", d.value}};
    if (d.value2) j["value2"] = *d.value2;
    data.push_back(j);
  }
  nlohmann::json anns = nlohmann::json::array();
  for (const auto& a : c.annotations) anns.push_back({{"kind", a.kind}, {"targets", a.targets}, {"params", a.params}});
  return {{"version", kChartSchemaVersion}, {"base", c.base}, {"encodings", c.encodings}, {"data", data},
          {"annotations", anns}, {"caption", c.caption}, {"relevance", c.relevance}, {"fact", to_json(c.fact)}};
}

inline ChartSpec chart_from_json(const nlohmann::json& j) {
  ChartSpec c;
  c.base = j.at("base").get<std::string>();
  c.encodings = j.value("encodings", nlohmann::json::object());
  for (const auto& d : j.at("data")) {
    Datum x{d.at("key").get<std::string>(), d.at("value").get<double>(), std::nullopt};
    if (d.contains("value2")) x.value2 = d.at("value2").get<double>();
    c.data.push_back(x);
  }
  for (const auto& a : j.at("annotations"))
    c.annotations.push_back({a.at("kind").get<std::string>(), a.at("targets").get<std::vector<std::string>>(),
                             a.value("params", nlohmann::json::object())});
  c.caption = j.value("caption", "");
  c.relevance = j.value("relevance", 0.0);
  if (j.contains("fact")) c.fact = fact_from_json(j.at("fact"));
  return c;
}

/// Problems with a chart spec: unregistered combination, unknown kinds,
/// dangling annotation targets.
inline std::vector<std::string> chart_violations(const ChartSpec& c) {
  std::vector<std::string> out;
  if (std::find(chart_bases().begin(), chart_bases().end(), c.base) == chart_bases().end())
    out.push_back("unknown base '" + c.base + "'");
  ChartKind k{c.base, {}};
  std::set<std::string> keys;
  for (const auto& d : c.data) keys.insert(d.key);
  for (const auto& a : c.annotations) {
    k.annotations.push_back(a.kind);
    if (std::find(annotation_kinds().begin(), annotation_kinds().end(), a.kind) == annotation_kinds().end())
      out.push_back("unknown annotation '" + a.kind + "'");
    for (const auto& t : a.targets)
      if (!keys.count(t)) out.push_back("annotation '" + a.kind + "' targets missing datum '" + t + "'");
  }
  std::sort(k.annotations.begin(), k.annotations.end());
  if (!registered_charts().count(k)) out.push_back("unregistered chart combination");
  if (!std::isfinite(c.relevance)) out.push_back("relevance is not finite");
  return out;
}

/// Annotated chart for an evaluated fact.
inline ChartSpec build_chart(const FactResult& r, double score) {
  if (r.groups.empty()) throw EmptyChartError("fact has no groups to chart");
  const auto& f = r.fact;
  const auto& d = r.derived;
  ColumnType kind = r.breakdown_type.value_or(ColumnType::Categorical);
  auto chart = select_chart(f.type, kind);

  ChartSpec c;
  c.base = chart.base;
  c.fact = f;
  c.relevance = score;
  c.caption = fact_to_caption(r);
  for (std::size_t i = 0; i < r.groups.size(); ++i) {
    Datum x{r.groups[i].key, r.groups[i].value, std::nullopt};
    if (i < r.groups2.size()) x.value2 = r.groups2[i].value;
    c.data.push_back(x);
  }

  const std::string bd = f.breakdown.value_or("group");
  const std::string m = f.measures.empty() ? std::string("count") : f.measures[0].column;
  if (c.base == "pie")
    c.encodings = {{"angle", m}, {"color", bd}};
  else if (f.type == FactType::Association)
    c.encodings = {{"x", f.measures[0].column}, {"y", f.measures[1].column}, {"label", bd}};
  else
    c.encodings = {{"x", bd}, {"y", m}};

  std::vector<std::string> all;
  for (const auto& x : c.data) all.push_back(x.key);
  auto focus_keys = [&] {
    std::vector<std::string> k;
    for (const auto& x : f.focus) k.push_back(x.key);
    return k;
  };
  auto add = [&](std::string k, std::vector<std::string> targets, nlohmann::json params = nlohmann::json::object()) {
    c.annotations.push_back({std::move(k), std::move(targets), std::move(params)});
  };

  switch (f.type) {
    case FactType::Value:
    case FactType::Distribution: add("value-label", all); break;
    case FactType::Difference: {
      auto k = focus_keys();
      if (k.size() != 2 && d.max && d.min) k = {d.max->key, d.min->key};
      if (k.size() != 2) k = {all.front(), all.back()};
      nlohmann::json p = nlohmann::json::object();
      if (d.gap) p["gap"] = *d.gap;
      add("dashed-difference-line", k, p);
      break;
    }
    case FactType::Proportion: {
      auto k = focus_keys();
      if (k.empty() && d.max) k = {d.max->key};
      nlohmann::json p = nlohmann::json::object();
      if (d.share) p["share"] = *d.share;
      add("slice-emphasis", k, p);
      break;
    }
    case FactType::Trend:
      add("trend-line", {all.front(), all.back()},
          {{"slope", d.slope.value_or(0)}, {"direction", to_string(d.direction.value_or(TrendDirection::Flat))}});
      break;
    case FactType::Categorization: {
      std::vector<std::string> k;
      if (d.max) k.push_back(d.max->key);
      add("highlight-color", k);
      break;
    }
    case FactType::Rank: {
      std::vector<std::string> k;
      for (std::size_t i = 0; i < d.ranked.size() && i < 3; ++i) k.push_back(d.ranked[i].key);
      add("rank-badge", k);
      break;
    }
    case FactType::Association:
      add("regression-line", {all.front(), all.back()},
          {{"slope", d.regression_slope.value_or(0)}, {"intercept", d.intercept.value_or(0)},
           {"correlation", d.correlation.value_or(0)}});
      break;
    case FactType::Extreme: {
      auto k = focus_keys();
      bool threshold = !f.focus.empty() && is_threshold(f.focus.front().role);
      if (k.empty() && d.max) k = {d.max->key};
      nlohmann::json p = nlohmann::json::object();
      if (threshold && d.average) p["average"] = *d.average;
      add("highlight-color", k, p);
      add("pointer", threshold ? k : std::vector<std::string>{k.front()});
      break;
    }
    case FactType::Outlier: add("outlier-ring", d.highlighted); break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Layout

inline constexpr int kGridColumns = 12;
inline constexpr int kChartHeight = 4;

struct PlacedChart {
  int x = 0, y = 0, w = 0, h = 0;
  ChartSpec spec;
};

struct Section {
  std::string sub_question;
  std::vector<ChartSpec> charts;
};

struct DashboardSection {
  std::string sub_question;
  std::vector<PlacedChart> charts;
};

struct Dashboard {
  std::string title;
  std::vector<DashboardSection> sections;
};

/// Charts flow left to right, top to bottom in descending relevance on a
/// 12-column grid. Width 6 for charts within 80% of the section's best,
/// else 4.
inline Dashboard layout(const std::string& title, const std::vector<Section>& sections) {
  if (sections.empty()) throw PreconditionError("layout needs at least one section");
  Dashboard db;
  db.title = title;
  for (const auto& s : sections) {
    DashboardSection out;
    out.sub_question = s.sub_question;
    auto charts = s.charts;
    std::stable_sort(charts.begin(), charts.end(),
                     [](const ChartSpec& a, const ChartSpec& b) { return a.relevance > b.relevance; });
    double best = charts.empty() ? 0 : charts.front().relevance;
    double cut = best - 0.2 * std::fabs(best);
    int x = 0, y = 0;
    for (auto& c : charts) {
      int w = c.relevance >= cut ? 6 : 4;
      if (x + w > kGridColumns) {
        x = 0;
        y += kChartHeight;
      }
      out.charts.push_back({x, y, w, kChartHeight, std::move(c)});
      x += w;
    }
    db.sections.push_back(std::move(out));
  }
  return db;
}

inline nlohmann::json to_json(const Dashboard& db) {
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& s : db.sections) {
    nlohmann::json charts = nlohmann::json::array();
    for (const auto& c : s.charts)
      charts.push_back({{"x", c.x}, {"y", c.y}, {"w", c.w}, {"h", c.h}, {"spec", to_json(c.spec)}});
    sections.push_back({{"sub_question", s.sub_question}, {"charts", charts}});
  }
  return {{"version", kChartSchemaVersion}, {"title", db.title}, {"sections", sections}};
}

inline Dashboard dashboard_from_json(const nlohmann::json& j) {
  Dashboard db;
  db.title = j.at("title").get<std::string>();
  for (const auto& s : j.at("sections")) {
    DashboardSection out;
    out.sub_question = s.at("sub_question").get<std::string>();
    for (const auto& c : s.at("charts"))
      out.charts.push_back({c.at("x").get<int>(), c.at("y").get<int>(), c.at("w").get<int>(), c.at("h").get<int>(),
                            chart_from_json(c.at("spec"))});
    db.sections.push_back(std::move(out));
  }
  return db;
}

/// Row-major reading order must match descending relevance, with no
/// overlaps inside the grid.
inline std::vector<std::string> layout_violations(const Dashboard& db) {
  std::vector<std::string> out;
  for (const auto& s : db.sections) {
    auto charts = s.charts;
    std::stable_sort(charts.begin(), charts.end(), [](const PlacedChart& a, const PlacedChart& b) {
      return std::pair(a.y, a.x) < std::pair(b.y, b.x);
    });
    for (std::size_t i = 0; i < charts.size(); ++i) {
      const auto& a = charts[i];
      if (a.x < 0 || a.w <= 0 || a.x + a.w > kGridColumns) out.push_back("chart outside the grid");
      if (i && charts[i - 1].spec.relevance < a.spec.relevance) out.push_back("relevance increases in reading order");
      for (std::size_t k = 0; k < i; ++k) {
        const auto& b = charts[k];
        bool overlap = a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
        if (overlap) out.push_back("charts overlap");
      }
    }
  }
  return out;
}

} // namespace tabqa
