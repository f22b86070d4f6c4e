#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tabqa/fact.hpp"
#include "tabqa/question.hpp"
#include "tabqa/reference.hpp"
#include "tabqa/similarity.hpp"
#include "tabqa/templates.hpp"

namespace tabqa {

struct SearchConfig {
  std::size_t beam_width = 5;
  std::size_t max_subspace_filters = 1;
  std::size_t max_categorical_cardinality = 20;
  std::size_t max_focus_candidates = 12;
  /// Aggregations tried for each measure column.
  std::vector<Agg> aggs = {Agg::Sum, Agg::Mean};
};

struct ScoredFact {
  DataFact fact;
  double score = 0;
  bool complete = false;
};

inline nlohmann::json to_json(const ScoredFact& s) {
  auto j = to_json(s.fact);
  j["score"] = s.score;
  return j;
}

enum class Field { Measure, Breakdown, Subspace, Focus };

inline constexpr std::array kFieldOrder = {Field::Measure, Field::Breakdown, Field::Subspace, Field::Focus};

inline std::string to_string(Field f) {
  switch (f) {
    case Field::Measure: return "measure";
    case Field::Breakdown: return "breakdown";
    case Field::Subspace: return "subspace";
    case Field::Focus: return "focus";
  }
  return "measure";
}

inline bool field_required(FactType t, Field field) {
  auto mask = required_fields(t);
  switch (field) {
    case Field::Measure: return mask.measures > 0;
    case Field::Breakdown: return mask.breakdown != Need::None;
    case Field::Subspace: return true;
    case Field::Focus: return mask.focus != FocusRule::None;
  }
  return false;
}

namespace detail {

inline bool evaluates(const DataFact& f, const DataTable& x) {
  try {
    evaluate_fact(f, x);
    return true;
  } catch (const Error&) {
    return false;
  }
}

inline void subspaces(const DataTable& x, const std::vector<std::string>& cols, std::size_t start, std::size_t left,
                      Subspace cur, std::vector<Subspace>& out) {
  if (left == 0) return;
  for (std::size_t i = start; i < cols.size(); ++i) {
    for (const auto& v : x.distinct(cols[i])) {
      Subspace s = cur;
      s.filters.push_back(Filter::equals(cols[i], v));
      out.push_back(s);
      subspaces(x, cols, i + 1, left - 1, s, out);
    }
  }
}

} // namespace detail

/// Children of a partial fact along one field (Algorithm 1 expansion).
/// Focus candidates come from evaluating the otherwise complete fact.
inline std::vector<DataFact> expand(const DataFact& f, Field field, const DataTable& x, const SearchConfig& cfg) {
  std::vector<DataFact> out;
  auto mask = required_fields(f.type);
  switch (field) {
    case Field::Measure: {
      auto numeric = x.columns_of(ColumnType::Numerical);
      if (mask.measures == 1) {
        for (const auto& c : numeric)
          for (auto a : cfg.aggs) {
            DataFact g = f;
            g.measures = {{c, a}};
            out.push_back(g);
          }
      } else if (mask.measures == 2) {
        for (std::size_t i = 0; i < numeric.size(); ++i)
          for (std::size_t j = i + 1; j < numeric.size(); ++j)
            for (auto a : cfg.aggs) {
              DataFact g = f;
              g.measures = {{numeric[i], a}, {numeric[j], a}};
              out.push_back(g);
            }
      }
      break;
    }
    case Field::Breakdown: {
      if (mask.breakdown == Need::Optional) out.push_back(f);
      for (const auto& c : x.columns()) {
        if (!breakdown_admissible(f.type, c.type)) continue;
        DataFact g = f;
        g.breakdown = c.name;
        out.push_back(g);
      }
      break;
    }
    case Field::Subspace: {
      std::vector<std::string> cols;
      for (const auto& c : x.columns()) {
        if (c.type != ColumnType::Categorical) continue;
        if (f.breakdown && *f.breakdown == c.name) continue;
        if (x.cardinality(c.name) > cfg.max_categorical_cardinality) continue;
        cols.push_back(c.name);
      }
      std::vector<Subspace> spaces = {Subspace{}};
      detail::subspaces(x, cols, 0, cfg.max_subspace_filters, {}, spaces);
      for (const auto& s : spaces) {
        DataFact g = f;
        g.subspace = s;
        if (detail::evaluates(g, x)) out.push_back(g);
      }
      break;
    }
    case Field::Focus: {
      FactResult r;
      try {
        DataFact probe = f;
        probe.focus.clear();
        r = evaluate_fact(probe, x);
      } catch (const Error&) {
        break;
      }
      const auto& d = r.derived;
      auto with = [&](std::vector<FocusItem> focus) {
        DataFact g = f;
        g.focus = std::move(focus);
        out.push_back(g);
      };
      switch (f.type) {
        case FactType::Extreme: {
          if (d.max) with({{d.max->key, FocusRole::Max}});
          if (d.min && (!d.max || d.min->key != d.max->key)) with({{d.min->key, FocusRole::Min}});
          for (auto role : {FocusRole::AboveAverage, FocusRole::BelowAverage}) {
            std::vector<FocusItem> items;
            for (const auto& g : r.groups) {
              bool hit = role == FocusRole::AboveAverage ? g.value > *d.average : g.value < *d.average;
              if (hit) items.push_back({g.key, role});
            }
            if (!items.empty()) with(items);
          }
          break;
        }
        case FactType::Outlier: {
          std::vector<FocusItem> items;
          for (const auto& k : d.highlighted) items.push_back({k, FocusRole::Outlier});
          if (!items.empty()) with(items);
          break;
        }
        case FactType::Proportion: {
          auto groups = r.groups;
          std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.value > b.value; });
          for (std::size_t i = 0; i < groups.size() && i < cfg.max_focus_candidates; ++i)
            if (d.total && *d.total != 0) with({{groups[i].key, FocusRole::Item}});
          break;
        }
        case FactType::Difference: {
          auto groups = r.groups;
          std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.value > b.value; });
          std::size_t n = 0;
          for (std::size_t i = 0; i < groups.size() && n < cfg.max_focus_candidates; ++i)
            for (std::size_t j = i + 1; j < groups.size() && n < cfg.max_focus_candidates; ++j, ++n)
              with({{groups[i].key, FocusRole::Item}, {groups[j].key, FocusRole::Item}});
          break;
        }
        default: break;
      }
      break;
    }
  }
  return out;
}

/// Scores facts by similarity of their (partial) template question to `q`;
/// descending, ties by canonical serialization.
inline std::vector<ScoredFact> rank(const std::vector<DataFact>& facts, const std::vector<double>& qv,
                                    const SimilarityProvider& p, const Aliases* aliases = nullptr) {
  std::vector<std::pair<ScoredFact, std::string>> scored;
  scored.reserve(facts.size());
  for (const auto& f : facts) {
    ScoredFact s;
    s.fact = f;
    s.score = std::clamp(dot(qv, checked_encode(p, fact_to_question(f, true, aliases))), -1.0, 1.0);
    s.complete = structural_violations(f).empty();
    scored.emplace_back(std::move(s), canonical(f));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first.score != b.first.score) return a.first.score > b.first.score;
    return a.second < b.second;
  });
  std::vector<ScoredFact> out;
  for (auto& s : scored) out.push_back(std::move(s.first));
  return out;
}

inline std::vector<ScoredFact> rank(const std::vector<DataFact>& facts, std::string_view q, const SimilarityProvider& p,
                                    const Aliases* aliases = nullptr) {
  return rank(facts, checked_encode(p, q), p, aliases);
}

/// Beam search over fact fields in the order measure, breakdown, subspace,
/// focus (Algorithm 1). Fields the type does not use are carried forward.
inline std::vector<ScoredFact> search(std::string_view q, FactType t, const DataTable& x, const SearchConfig& cfg,
                                      const SimilarityProvider& p, const Aliases* aliases = nullptr) {
  if (cfg.beam_width < 1) throw PreconditionError("beam width must be at least 1");
  auto qv = checked_encode(p, q);
  DataFact root;
  root.type = t;
  std::vector<ScoredFact> tree = rank({root}, qv, p, aliases);
  for (auto field : kFieldOrder) {
    std::vector<DataFact> children;
    std::set<std::string> seen;
    std::size_t top = std::min(cfg.beam_width, tree.size());
    for (std::size_t i = 0; i < top; ++i) {
      const auto& f = tree[i].fact;
      auto kids = field_required(t, field) ? expand(f, field, x, cfg) : std::vector<DataFact>{f};
      for (auto& k : kids)
        if (seen.insert(canonical(k)).second) children.push_back(std::move(k));
    }
    if (children.empty()) {
      std::string why = "no " + to_string(field) + " candidates for a " + to_string(t) + " fact";
      if (field == Field::Breakdown && required_fields(t).kind == BreakdownKind::Temporal)
        why = "no temporal column for a " + to_string(t) + " fact";
      else if (field == Field::Breakdown && required_fields(t).kind == BreakdownKind::Categorical)
        why = "no categorical column for a " + to_string(t) + " fact";
      else if (field == Field::Measure)
        why = "no numerical column for a " + to_string(t) + " fact";
      else if (field == Field::Focus && t == FactType::Outlier)
        why = "no outliers found";
      throw SearchError("unsatisfiable: " + why);
    }
    tree = rank(children, qv, p, aliases);
  }
  std::vector<ScoredFact> out;
  for (auto& s : tree) {
    if (out.size() >= cfg.beam_width) break;
    if (!s.complete || !validate_fact(s.fact, x).empty() || !detail::evaluates(s.fact, x)) continue;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw SearchError("unsatisfiable: no valid " + to_string(t) + " fact");
  return out;
}

/// Aggregations a question asks for: an explicit keyword wins, otherwise
/// the configured defaults.
inline std::vector<Agg> question_aggs(std::string_view q, const std::vector<Agg>& defaults) {
  if (auto a = agg_keyword(text::tokenize(q))) return {*a};
  return defaults;
}

/// Extract step for one simple question: fact type, then beam search.
inline std::vector<ScoredFact> answer(std::string_view q, const DataTable& x, SearchConfig cfg,
                                      const SimilarityProvider& p, const QuestionClassifier* classifier = nullptr) {
  RuleClassifier rule;
  const QuestionClassifier& c = classifier ? *classifier : rule;
  auto fq = formulate(q, x, cfg.max_categorical_cardinality);
  if (c.complexity(fq) != QuestionClass::Simple)
    throw PreconditionError("answer expects a simple question; decompose it first");
  cfg.aggs = question_aggs(q, cfg.aggs);
  auto aliases = fq.aliases();
  return search(q, c.fact_type(q), x, cfg, p, &aliases);
}

inline std::vector<ScoredFact> answer(std::string_view q, const DataTable& x, const SearchConfig& cfg = {}) {
  return answer(q, x, cfg, *make_reference_provider(x));
}

} // namespace tabqa
