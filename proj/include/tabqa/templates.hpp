#pragma once

#include <cctype>
#include <map>
#include <string>

#include "tabqa/fact.hpp"
#include "tabqa/text.hpp"

namespace tabqa {

/// Optional display words for columns (e.g. "title" shown as "book").
using Aliases = std::map<std::string, std::string>;

namespace detail {

inline std::string display(const std::string& column, const Aliases* aliases) {
  if (aliases) {
    auto it = aliases->find(column);
    if (it != aliases->end()) return it->second;
  }
  return column;
}

/// Measure wording; non-default aggregations are spelled out.
inline std::string measure_phrase(const Measure& m, const Aliases* aliases) {
  std::string name = display(m.column, aliases);
  switch (m.agg) {
    case Agg::Mean: return "average " + name;
    case Agg::Count: return "count of " + name;
    default: return name;
  }
}

inline std::string filter_phrase(const Filter& f) {
  switch (f.op) {
    case FilterOp::Equals: return f.values.at(0);
    case FilterOp::InSet: return text::join(f.values, " or ");
    case FilterOp::NumericRange:
    case FilterOp::TemporalRange:
      return f.column + " from " + f.values.at(0) + " to " + f.values.at(1);
  }
  return {};
}

inline std::string subspace_prefix(const Subspace& s) {
  std::string out;
  for (const auto& f : s.filters) out += "in " + filter_phrase(f) + ", ";
  return out;
}

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

} // namespace detail

/// Deterministic English question for a (possibly partial) fact. Every
/// combination of filled fields has a template; with `allow_partial` false a
/// fact with the wrong field counts is rejected with TemplateError.
inline std::string fact_to_question(const DataFact& f, bool allow_partial = false,
                                    const Aliases* aliases = nullptr) {
  if (!allow_partial) {
    auto v = structural_violations(f);
    if (!v.empty()) throw TemplateError("incomplete " + to_string(f.type) + " fact: " + v.front());
  }
  const bool has_m = !f.measures.empty();
  const bool has_bd = f.breakdown.has_value();
  const std::string m = has_m ? detail::measure_phrase(f.measures[0], aliases) : "";
  const std::string bd = has_bd ? detail::display(*f.breakdown, aliases) : "";
  const bool has_focus = !f.focus.empty();
  std::string q;

  switch (f.type) {
    case FactType::Value:
      q = has_m ? "what is the overall value of " + m + "?" : "what is the overall value?";
      break;
    case FactType::Difference:
      if (f.focus.size() == 2)
        q = "what is the difference " + (has_m ? "in " + m + " " : std::string()) + "between " +
            f.focus[0].key + " and " + f.focus[1].key + "?";
      else if (has_bd)
        q = "what are the differences " + (has_m ? "in " + m + " " : std::string()) + "between each " + bd + "?";
      else
        q = has_m ? "what are the differences in " + m + "?" : "what are the differences?";
      break;
    case FactType::Proportion:
      if (has_focus)
        q = "what is the proportion " + (has_m ? "of " + m + " " : std::string()) + "in " +
            f.focus[0].key + (has_bd ? " among all " + bd : std::string()) + "?";
      else if (has_bd)
        q = "what is the proportion " + (has_m ? "of " + m + " " : std::string()) + "for each " + bd + "?";
      else
        q = has_m ? "what is the proportion of " + m + "?" : "what is the proportion?";
      break;
    case FactType::Trend:
      q = "what is the trend" + (has_m ? " of " + m : std::string()) + (has_bd ? " over " + bd : std::string()) + "?";
      break;
    case FactType::Categorization:
      q = has_bd ? "what are the categories of " + bd + "?" : "what are the categories?";
      break;
    case FactType::Distribution:
      q = "what is the overall distribution" + (has_m ? " of " + m : std::string()) +
          (has_bd ? " over " + bd : std::string()) + "?";
      break;
    case FactType::Rank:
      if (has_m)
        q = "what is the order of " + m + (has_bd ? " for each " + bd : std::string()) + "?";
      else
        q = has_bd ? "what is the order of each " + bd + "?" : "what is the order?";
      break;
    case FactType::Association:
      if (f.measures.size() >= 2)
        q = "what is the correlation between " + m + " and " + detail::measure_phrase(f.measures[1], aliases);
      else
        q = has_m ? "what is the correlation of " + m : "what is the correlation";
      q += (has_bd ? " over " + bd : std::string()) + "?";
      break;
    case FactType::Extreme: {
      std::string who = has_bd ? bd : "category";
      FocusRole role = has_focus ? f.focus.front().role : FocusRole::Max;
      if (is_threshold(role)) {
        q = "which " + who + " has a " + (has_m ? m : "value") +
            (role == FocusRole::AboveAverage ? " higher" : " lower") + " than average?";
      } else {
        q = "which " + who + " has the " + (role == FocusRole::Min ? "lowest " : "highest ") +
            (has_m ? m : "value") + "?";
      }
      break;
    }
    case FactType::Outlier:
      if (has_bd && has_m)
        q = "which " + bd + " has anomaly " + m + "?";
      else if (has_m)
        q = "what is the outlier of " + m + "?";
      else if (has_bd)
        q = "which " + bd + " is an outlier?";
      else
        q = "what is the outlier?";
      break;
  }
  if (q.empty()) throw TemplateError("no template for " + to_string(f.type));
  return detail::subspace_prefix(f.subspace) + q;
}

namespace detail {

inline std::string agg_word(Agg a) {
  switch (a) {
    case Agg::Sum: return "total";
    case Agg::Mean: return "average";
    case Agg::Count: return "count of";
    case Agg::Min: return "minimum";
    case Agg::Max: return "maximum";
  }
  return "total";
}

inline std::string list_keys(const std::vector<std::string>& keys, std::size_t cap = 5) {
  std::vector<std::string> shown(keys.begin(), keys.begin() + static_cast<long>(std::min(cap, keys.size())));
  std::string out = text::join(shown, ", ");
  if (keys.size() > cap) out += " and " + std::to_string(keys.size() - cap) + " more";
  return out;
}

inline std::string sentence(const Subspace& s, const std::string& body) {
  std::string prefix;
  for (const auto& f : s.filters) prefix += "In " + filter_phrase(f) + ", ";
  if (prefix.empty()) return capitalize(body);
  return prefix + body;
}

} // namespace detail

/// Narrative caption embedding the computed values.
inline std::string fact_to_caption(const FactResult& r) {
  const auto& f = r.fact;
  const auto& d = r.derived;
  auto num = text::format_number;
  const std::string m = f.measures.empty() ? std::string("records") : f.measures[0].column;
  const std::string bd = f.breakdown.value_or("group");
  const std::string bds = text::pluralize(bd);
  std::string body;

  switch (f.type) {
    case FactType::Value:
      body = "the " + detail::agg_word(f.measures.empty() ? Agg::Sum : f.measures[0].agg) + " " + m +
             " is " + num(d.value.value_or(0)) + ".";
      break;
    case FactType::Difference:
      if (d.gap && f.focus.size() == 2)
        body = "the difference in " + m + " between " + f.focus[0].key + " and " + f.focus[1].key + " is " +
               num(*d.gap) + ".";
      else
        body = "the " + m + " differs across " + std::to_string(r.groups.size()) + " " + bds + ".";
      break;
    case FactType::Proportion:
      if (d.share && !f.focus.empty())
        body = f.focus[0].key + " accounts for " + num(*d.share * 100.0) + "% of the total " + m + ".";
      else
        body = "the total " + m + " of " + num(d.total.value_or(0)) + " is split across " +
               std::to_string(r.groups.size()) + " " + bds + ".";
      break;
    case FactType::Trend: {
      auto dir = d.direction.value_or(TrendDirection::Flat);
      if (dir == TrendDirection::Flat)
        body = "the " + m + " shows no clear trend over " + bd + ".";
      else
        body = "the " + m + " shows " + (dir == TrendDirection::Increasing ? "an increasing" : "a decreasing") +
               " trend over " + bd + ".";
      break;
    }
    case FactType::Categorization: {
      std::vector<std::string> keys;
      for (const auto& g : r.groups) keys.push_back(g.key);
      body = "there are " + std::to_string(keys.size()) + " categories of " + bd +
             (keys.empty() ? std::string(".") : ": " + detail::list_keys(keys) + ".");
      break;
    }
    case FactType::Distribution:
      if (d.max && d.min)
        body = "the " + m + " over " + bd + " ranges from " + num(d.min->value) + " (" + d.min->key + ") to " +
               num(d.max->value) + " (" + d.max->key + ").";
      else
        body = "there is no " + m + " to distribute over " + bd + ".";
      break;
    case FactType::Rank: {
      std::vector<std::string> top;
      for (std::size_t i = 0; i < std::min<std::size_t>(3, d.ranked.size()); ++i)
        top.push_back(d.ranked[i].key + " (" + num(d.ranked[i].value) + ")");
      if (top.size() <= 1)
        body = top.empty() ? "there is nothing to rank." : top[0] + " ranks first by " + m + ".";
      else
        body = "the top " + bds + " by " + m + " are " + text::join(top, ", ") + ".";
      break;
    }
    case FactType::Association: {
      std::string m2 = f.measures.size() > 1 ? f.measures[1].column : m;
      body = "the correlation between " + m + " and " + m2 + " is " + num(d.correlation.value_or(0)) + ".";
      break;
    }
    case FactType::Extreme: {
      FocusRole role = f.focus.empty() ? FocusRole::Max : f.focus.front().role;
      if (is_threshold(role)) {
        std::string cmp = role == FocusRole::AboveAverage ? "higher" : "lower";
        body = std::to_string(d.highlighted.size()) + " " + (d.highlighted.size() == 1 ? bd : bds) + " " +
               (d.highlighted.size() == 1 ? "has" : "have") + " a " + m + " " + cmp + " than average (" +
               num(d.average.value_or(0)) + ")" +
               (d.highlighted.empty() ? std::string(".") : ": " + detail::list_keys(d.highlighted) + ".");
      } else {
        const auto& g = role == FocusRole::Min ? d.min : d.max;
        body = (g ? g->key : std::string("none")) + " has the " + (role == FocusRole::Min ? "lowest " : "highest ") +
               m + " (" + num(g ? g->value : 0) + ") among all " + bds + ".";
      }
      break;
    }
    case FactType::Outlier:
      if (d.highlighted.empty())
        body = "no " + bd + " stands out as an outlier in " + m + ".";
      else if (d.highlighted.size() == 1)
        body = d.highlighted[0] + " is an outlier in " + m + " among all " + bds + ".";
      else
        body = detail::list_keys(d.highlighted) + " are outliers in " + m + " among all " + bds + ".";
      break;
  }
  return detail::sentence(f.subspace, body);
}

} // namespace tabqa
