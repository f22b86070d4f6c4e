#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabqa/chart.hpp"
#include "tabqa/fact.hpp"

namespace tabqa::schema {

using nlohmann::json;

namespace detail {

inline json string_enum(const std::vector<std::string>& values) { return {{"type", "string"}, {"enum", values}}; }

inline std::vector<std::string> fact_type_names() {
  std::vector<std::string> out;
  for (auto t : kAllFactTypes) out.push_back(to_string(t));
  return out;
}

inline json definitions() {
  json d;
  d["Filter"] = {{"type", "object"},
                 {"required", {"column", "op", "value"}},
                 {"properties",
                  {{"column", {{"type", "string"}}},
                   {"op", string_enum({"equals", "in-set", "numeric-range", "temporal-range"})},
                   {"value", json::object()}}}};
  d["DataFact"] = {
      {"type", "object"},
      {"required", {"type", "subspace", "breakdown", "measure", "focus"}},
      {"properties",
       {{"type", string_enum(fact_type_names())},
        {"subspace", {{"type", "array"}, {"items", {{"$ref", "#/definitions/Filter"}}}}},
        {"breakdown", {{"type", {"string", "null"}}}},
        {"measure",
         {{"type", "array"},
          {"maxItems", 2},
          {"items",
           {{"type", "object"},
            {"required", {"column", "agg"}},
            {"properties",
             {{"column", {{"type", "string"}}}, {"agg", string_enum({"sum", "mean", "count", "min", "max"})}}}}}}},
        {"focus",
         {{"type", "array"},
          {"items",
           {{"type", "object"},
            {"required", {"key", "role"}},
            {"properties",
             {{"key", {{"type", "string"}}},
              {"role", string_enum({"item", "max", "min", "above-average", "below-average", "outlier"})}}}}}}}}}};
  d["ChartSpec"] = {
      {"type", "object"},
      {"required", {"version", "base", "encodings", "data", "annotations", "caption", "relevance", "fact"}},
      {"properties",
       {{"version", {{"const", kChartSchemaVersion}}},
        {"base", string_enum(chart_bases())},
        {"encodings", {{"type", "object"}}},
        {"data",
         {{"type", "array"},
          {"items",
           {{"type", "object"},
            {"required", {"key", "value"}},
            {"properties",
             {{"key", {{"type", "string"}}}, {"value", {{"type", "number"}}}, {"value2", {{"type", "number"}}}}}}}}},
        {"annotations",
         {{"type", "array"},
          {"items",
           {{"type", "object"},
            {"required", {"kind", "targets", "params"}},
            {"properties",
             {{"kind", string_enum(annotation_kinds())},
              {"targets", {{"type", "array"}, {"items", {{"type", "string"}}}}},
              {"params", {{"type", "object"}}}}}}}}},
        {"caption", {{"type", "string"}}},
        {"relevance", {{"type", "number"}}},
        {"fact", {{"$ref", "#/definitions/DataFact"}}}}}};
  d["PlacedChart"] = {{"type", "object"},
                      {"required", {"x", "y", "w", "h", "spec"}},
                      {"properties",
                       {{"x", {{"type", "integer"}, {"minimum", 0}, {"maximum", kGridColumns - 1}}},
                        {"y", {{"type", "integer"}, {"minimum", 0}}},
                        {"w", {{"type", "integer"}, {"minimum", 1}, {"maximum", kGridColumns}}},
                        {"h", {{"type", "integer"}, {"minimum", 1}}},
                        {"spec", {{"$ref", "#/definitions/ChartSpec"}}}}}};
  d["Dashboard"] = {
      {"type", "object"},
      {"required", {"version", "title", "sections"}},
      {"properties",
       {{"version", {{"const", kChartSchemaVersion}}},
        {"title", {{"type", "string"}}},
        {"sections",
         {{"type", "array"},
          {"minItems", 1},
          {"items",
           {{"type", "object"},
            {"required", {"sub_question", "charts"}},
            {"properties",
             {{"sub_question", {{"type", "string"}}},
              {"charts", {{"type", "array"}, {"items", {{"$ref", "#/definitions/PlacedChart"}}}}}}}}}}},
        {"tree", {{"$ref", "#/definitions/Tree"}}},
        {"unanswered",
         {{"type", "array"},
          {"items",
           {{"type", "object"},
            {"required", {"question", "reason"}},
            {"properties", {{"question", {{"type", "string"}}}, {"reason", {{"type", "string"}}}}}}}}}}}};
  d["Tree"] = {{"type", "object"},
               {"required", {"question", "class", "backend", "forced", "children"}},
               {"properties",
                {{"question", {{"type", "string"}}},
                 {"class", string_enum({"simple", "type-1", "type-2"})},
                 {"backend", {{"type", "string"}}},
                 {"forced", {{"type", "boolean"}}},
                 {"children", {{"type", "array"}, {"items", {{"$ref", "#/definitions/Tree"}}}}}}}};
  d["Table"] = {{"type", "object"},
                {"required", {"name", "columns", "row_count"}},
                {"properties",
                 {{"name", {{"type", "string"}}},
                  {"row_count", {{"type", "integer"}, {"minimum", 0}}},
                  {"columns",
                   {{"type", "array"},
                    {"items",
                     {{"type", "object"},
                      {"required", {"name", "type"}},
                      {"properties",
                       {{"name", {{"type", "string"}}},
                        {"type", string_enum({"numerical", "temporal", "categorical"})}}}}}}}}}};
  return d;
}

} // namespace detail

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n = {"DataFact", "ChartSpec", "Dashboard", "Tree", "Table"};
  return n;
}

/// Self-contained schema document for one named type.
inline json get(const std::string& name) {
  auto defs = detail::definitions();
  if (!defs.contains(name)) throw SchemaError("unknown schema '" + name + "'");
  json s = {{"$schema", "http://json-schema.org/draft-07/schema#"},
            {"$id", "tabqa/" + name + "/" + kChartSchemaVersion},
            {"version", kChartSchemaVersion},
            {"$ref", "#/definitions/" + name},
            {"definitions", defs}};
  return s;
}

/// Every schema keyed by name, as served under /api/schema.
inline json all() {
  json out = {{"version", kChartSchemaVersion}, {"schemas", json::object()}};
  for (const auto& n : names()) out["schemas"][n] = get(n);
  return out;
}

namespace detail {

inline bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
  if (t == "number") return v.is_number();
  return false;
}

inline void check(const json& v, const json& s, const json& root, const std::string& path,
                  std::vector<std::string>& errs) {
  if (s.contains("$ref")) {
    auto ref = s["$ref"].get<std::string>();
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0 || !root["definitions"].contains(ref.substr(prefix.size()))) {
      errs.push_back(path + ": unresolvable $ref " + ref);
      return;
    }
    check(v, root["definitions"][ref.substr(prefix.size())], root, path, errs);
    return;
  }
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || type_matches(v, t.get<std::string>());
    } else {
      ok = type_matches(v, s["type"].get<std::string>());
    }
    if (!ok) {
      errs.push_back(path + ": expected " + s["type"].dump());
      return;
    }
  }
  if (s.contains("const") && v != s["const"]) errs.push_back(path + ": expected " + s["const"].dump());
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) errs.push_back(path + ": " + v.dump() + " not in enum");
  }
  if (v.is_number()) {
    double x = v.get<double>();
    if (!std::isfinite(x)) errs.push_back(path + ": non-finite number");
    if (s.contains("minimum") && x < s["minimum"].get<double>()) errs.push_back(path + ": below minimum");
    if (s.contains("maximum") && x > s["maximum"].get<double>()) errs.push_back(path + ": above maximum");
  }
  if (v.is_object()) {
    for (const auto& r : s.value("required", json::array()))
      if (!v.contains(r.get<std::string>())) errs.push_back(path + ": missing '" + r.get<std::string>() + "'");
    if (s.contains("properties"))
      for (const auto& [k, sub] : s["properties"].items())
        if (v.contains(k)) check(v[k], sub, root, path + "/" + k, errs);
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errs.push_back(path + ": too few items");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errs.push_back(path + ": too many items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s["items"], root, path + "/" + std::to_string(i), errs);
  }
}

} // namespace detail

/// Validates `doc` against the subset of JSON Schema used above
/// (type, const, enum, required, properties, items, min/max, local $ref).
/// Returns one message per violation; empty means valid.
inline std::vector<std::string> validate(const json& doc, const json& schema_doc) {
  std::vector<std::string> errs;
  detail::check(doc, schema_doc, schema_doc, "", errs);
  return errs;
}

inline std::vector<std::string> validate(const json& doc, const std::string& name) { return validate(doc, get(name)); }
inline std::vector<std::string> validate(const json& doc, const char* name) { return validate(doc, get(name)); }

} // namespace tabqa::schema
