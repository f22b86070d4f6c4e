#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tabqa/fact.hpp"
#include "tabqa/similarity.hpp"
#include "tabqa/table.hpp"
#include "tabqa/templates.hpp"

namespace tabqa {

/// Every template question (complete and partial) the table can produce,
/// deduplicated, in a fixed order. Categorical columns wider than
/// `cardinality_cap` are skipped as breakdowns.
inline std::vector<std::string> template_questions(const DataTable& x, std::size_t cardinality_cap = 20) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const DataFact& f) {
    auto q = fact_to_question(f, true);
    if (seen.insert(q).second) out.push_back(q);
  };
  auto numeric = x.columns_of(ColumnType::Numerical);
  std::vector<std::optional<std::string>> breakdowns = {std::nullopt};
  for (const auto& c : x.columns()) {
    if (c.type == ColumnType::Numerical) continue;
    if (c.type == ColumnType::Categorical && x.cardinality(c.name) > cardinality_cap) continue;
    breakdowns.push_back(c.name);
  }
  for (auto t : kAllFactTypes) {
    auto mask = required_fields(t);
    std::vector<std::vector<Measure>> measure_sets = {{}};
    if (mask.measures == 1)
      for (const auto& m : numeric) measure_sets.push_back({{m, Agg::Sum}});
    if (mask.measures == 2)
      for (std::size_t i = 0; i < numeric.size(); ++i)
        for (std::size_t j = i + 1; j < numeric.size(); ++j) measure_sets.push_back({{numeric[i], Agg::Sum}, {numeric[j], Agg::Sum}});
    for (const auto& ms : measure_sets) {
      for (const auto& bd : breakdowns) {
        if (bd && !breakdown_admissible(t, x.column(*bd).type)) continue;
        DataFact f;
        f.type = t;
        f.measures = ms;
        f.breakdown = bd;
        if (t == FactType::Extreme) {
          for (auto role : {FocusRole::Max, FocusRole::Min, FocusRole::AboveAverage}) {
            f.focus = {{"", role}};
            add(f);
          }
        } else {
          add(f);
        }
      }
    }
  }
  return out;
}

/// Reference similarity provider fitted to the table's template questions.
inline std::shared_ptr<const SimilarityProvider> make_reference_provider(const DataTable& x,
                                                                         std::size_t cardinality_cap = 20) {
  return std::make_shared<ReferenceProvider>(template_questions(x, cardinality_cap));
}

} // namespace tabqa
