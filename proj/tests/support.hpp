#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tabqa/fact.hpp"
#include "tabqa/similarity.hpp"
#include "tabqa/table.hpp"
#include "tabqa/templates.hpp"

namespace fixture {

inline std::string path(const std::string& name) { return std::string(TABQA_DATA_DIR) + "/" + name; }
inline std::string golden(const std::string& name) { return std::string(TABQA_GOLDEN_DIR) + "/" + name; }

inline const tabqa::DataTable& table(const std::string& stem) {
  static std::map<std::string, tabqa::DataTable> cache;
  auto it = cache.find(stem);
  if (it == cache.end()) it = cache.emplace(stem, tabqa::load_table_file(path(stem + ".csv"))).first;
  return it->second;
}

inline std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small seeded table: one year column, two or three numeric columns and
/// two categorical columns of low cardinality. Values are continuous so
/// that ties are improbable.
inline tabqa::DataTable small_table(unsigned seed, std::size_t rows = 40) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  static const std::vector<std::string> colors = {"red", "green", "blue", "amber"};
  static const std::vector<std::string> shapes = {"round", "square", "flat"};
  const std::size_t ncat1 = 2 + rng() % 3, ncat2 = 2 + rng() % 2, nyears = 3 + rng() % 3;
  const bool third = seed % 2 == 0;
  std::ostringstream csv;
  csv << "year,cost,weight" << (third ? ",speed" : "") << ",color,shape\n";
  for (std::size_t r = 0; r < rows; ++r) {
    csv << 2000 + rng() % nyears << ',';
    csv << std::round(u(rng) * 100) / 100 << ',' << std::round(u(rng) * 100) / 100 << ',';
    if (third) csv << std::round(u(rng) * 100) / 100 << ',';
    csv << colors[rng() % ncat1] << ',' << shapes[rng() % ncat2] << '\n';
  }
  return tabqa::load_table(csv.str(), "small" + std::to_string(seed));
}

inline tabqa::DataTable toy_brands() { return tabqa::load_table("brand,sales\nA,10\nB,30\nC,20\n", "toy_brands"); }

/// Every complete, evaluable fact of type `t` over `x`, written out
/// directly from the candidate-space definitions: measures are numeric
/// columns times `aggs` (pairs for two-measure types), breakdowns are the
/// admissible columns, subspaces are empty or one equality filter on a
/// categorical column of cardinality <= `cap`, and focus comes from the
/// group values.
inline std::vector<tabqa::DataFact> enumerate_facts(const tabqa::DataTable& x, tabqa::FactType t,
                                                    const std::vector<tabqa::Agg>& aggs = {tabqa::Agg::Sum, tabqa::Agg::Mean},
                                                    std::size_t cap = 20, std::size_t focus_cap = 12) {
  using namespace tabqa;
  auto mask = required_fields(t);
  std::vector<std::string> numeric, temporal, categorical;
  for (const auto& c : x.columns()) {
    if (c.type == ColumnType::Numerical) numeric.push_back(c.name);
    if (c.type == ColumnType::Temporal) temporal.push_back(c.name);
    if (c.type == ColumnType::Categorical) categorical.push_back(c.name);
  }
  std::vector<std::vector<Measure>> measures;
  if (mask.measures == 0) measures.push_back({});
  if (mask.measures == 1)
    for (const auto& c : numeric)
      for (auto a : aggs) measures.push_back({{c, a}});
  if (mask.measures == 2)
    for (std::size_t i = 0; i < numeric.size(); ++i)
      for (std::size_t j = i + 1; j < numeric.size(); ++j)
        for (auto a : aggs) measures.push_back({{numeric[i], a}, {numeric[j], a}});
  std::vector<std::optional<std::string>> breakdowns;
  if (mask.breakdown != Need::Required) breakdowns.push_back(std::nullopt);
  if (mask.breakdown != Need::None)
    for (const auto& c : x.columns()) {
      if (c.type == ColumnType::Numerical) continue;
      if (mask.kind == BreakdownKind::Temporal && c.type != ColumnType::Temporal) continue;
      if (mask.kind == BreakdownKind::Categorical && c.type != ColumnType::Categorical) continue;
      breakdowns.push_back(c.name);
    }

  std::vector<DataFact> out;
  auto keep = [&](const DataFact& f) {
    if (!validate_fact(f, x).empty()) return;
    try {
      evaluate_fact(f, x);
    } catch (const Error&) {
      return;
    }
    out.push_back(f);
  };
  for (const auto& m : measures)
    for (const auto& b : breakdowns) {
      std::vector<Subspace> spaces = {Subspace{}};
      for (const auto& c : categorical) {
        if (b && *b == c) continue;
        auto values = x.distinct(c);
        if (values.size() > cap) continue;
        for (const auto& v : values) spaces.push_back({{Filter::equals(c, v)}});
      }
      for (const auto& s : spaces) {
        DataFact f;
        f.type = t;
        f.measures = m;
        f.breakdown = b;
        f.subspace = s;
        if (mask.focus == FocusRule::None) {
          keep(f);
          continue;
        }
        std::vector<Group> groups;
        try {
          groups = group_and_aggregate(x, s, b, m.empty() ? std::nullopt : std::optional<Measure>(m[0]));
        } catch (const Error&) {
          continue;
        }
        if (groups.empty()) continue;
        auto by_value = groups;
        std::stable_sort(by_value.begin(), by_value.end(), [](const Group& a, const Group& c) { return a.value > c.value; });
        auto with = [&](std::vector<FocusItem> items) {
          DataFact g = f;
          g.focus = std::move(items);
          keep(g);
        };
        switch (t) {
          case FactType::Extreme: {
            const Group* hi = &groups[0];
            const Group* lo = &groups[0];
            double sum = 0;
            for (const auto& g : groups) {
              if (g.value > hi->value) hi = &g;
              if (g.value < lo->value) lo = &g;
              sum += g.value;
            }
            with({{hi->key, FocusRole::Max}});
            if (lo->key != hi->key) with({{lo->key, FocusRole::Min}});
            double avg = sum / static_cast<double>(groups.size());
            std::vector<FocusItem> above, below;
            for (const auto& g : groups) {
              if (g.value > avg) above.push_back({g.key, FocusRole::AboveAverage});
              if (g.value < avg) below.push_back({g.key, FocusRole::BelowAverage});
            }
            if (!above.empty()) with(above);
            if (!below.empty()) with(below);
            break;
          }
          case FactType::Outlier: {
            DataFact probe = f;
            auto r = evaluate_fact(probe, x);
            std::vector<FocusItem> items;
            for (const auto& k : r.derived.highlighted) items.push_back({k, FocusRole::Outlier});
            if (!items.empty()) with(items);
            break;
          }
          case FactType::Proportion: {
            double total = 0;
            for (const auto& g : groups) total += g.value;
            if (total == 0) break;
            for (std::size_t i = 0; i < by_value.size() && i < focus_cap; ++i) with({{by_value[i].key, FocusRole::Item}});
            break;
          }
          case FactType::Difference: {
            std::size_t n = 0;
            for (std::size_t i = 0; i < by_value.size() && n < focus_cap; ++i)
              for (std::size_t j = i + 1; j < by_value.size() && n < focus_cap; ++j, ++n)
                with({{by_value[i].key, FocusRole::Item}, {by_value[j].key, FocusRole::Item}});
            break;
          }
          default: break;
        }
      }
    }
  return out;
}

// Full-matrix Wagner-Fischer over bytes; test strings are ASCII.
inline std::size_t dp_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
  return d[a.size()][b.size()];
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len = 40) {
  std::string s(rng() % (max_len + 1), ' ');
  for (auto& c : s) c = static_cast<char>('a' + rng() % 4);
  return s;
}

struct OracleEntry {
  std::string canonical;
  double score;
};

/// Scores every enumerated fact directly and sorts: score descending, ties
/// by canonical form.
inline std::vector<OracleEntry> oracle_top(const tabqa::DataTable& x, tabqa::FactType t, const std::string& q,
                                          const tabqa::SimilarityProvider& p) {
  using namespace tabqa;
  std::vector<OracleEntry> out;
  for (const auto& f : fixture::enumerate_facts(x, t))
    out.push_back({canonical(f), std::clamp(semantic_sim(fact_to_question(f, true), q, p), -1.0, 1.0)});
  std::sort(out.begin(), out.end(), [](const OracleEntry& a, const OracleEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.canonical < b.canonical;
  });
  return out;
}

/// Hand-written phrasings per type; {m} is a measure, {b} a breakdown,
/// {t} a temporal column.
inline const std::map<tabqa::FactType, std::vector<std::string>>& phrasings() {
  using tabqa::FactType;
  static const std::map<FactType, std::vector<std::string>> p = {
    {FactType::Value, {"what is the total {m}?", "how much {m} is there overall?", "what is the overall {m}?"}},
    {FactType::Difference, {"what is the difference in {m} between each {b}?", "compare the {m} of each {b}",
                            "how big is the gap in {m} across {b}?"}},
    {FactType::Proportion, {"what is the proportion of {m} for each {b}?", "what percentage of {m} does each {b} have?",
                            "what share of {m} goes to each {b}?"}},
    {FactType::Trend, {"what is the trend of {m} over {t}?", "how does {m} change over {t}?",
                       "show the {m} trend across {t}"}},
    {FactType::Categorization, {"what are the categories of {b}?", "what kinds of {b} are there?",
                                "list the types of {b}"}},
    {FactType::Distribution, {"what is the distribution of {m} over {b}?", "how is {m} distributed across {b}?",
                              "what is the spread of {m} by {b}?"}},
    {FactType::Rank, {"what is the order of {m} for each {b}?", "rank each {b} by {m}",
                      "what are the top {b} by {m}?"}},
    {FactType::Association, {"what is the correlation between {m} and {m2}?", "how is {m} related to {m2}?",
                             "what is the relationship between {m} and {m2}?"}},
    {FactType::Extreme, {"which {b} has the highest {m}?", "which {b} has the lowest {m}?",
                         "what {b} has the most {m}?"}},
    {FactType::Outlier, {"which {b} is an outlier in {m}?", "are there any anomalies in {m} by {b}?",
                         "which {b} has unusual {m}?"}},
  };
  return p;
}

inline std::string fill(std::string s, const std::map<std::string, std::string>& slots) {
  for (const auto& [k, v] : slots) {
    std::string key = "{" + k + "}";
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key)) s.replace(pos, key.size(), v);
  }
  return s;
}

struct Labelled {
  std::string question;
  tabqa::FactType type;
};

/// 2,000 seeded simple questions: half rendered from random complete facts,
/// half from the hand-written phrasings.
inline std::vector<Labelled> template_corpus(unsigned seed, std::size_t n) {
  using namespace tabqa;
  std::mt19937_64 rng(seed);
  std::vector<const DataTable*> tables;
  for (auto stem : {"cars", "books", "movies", "shop"}) tables.push_back(&fixture::table(stem));
  std::vector<std::vector<DataFact>> facts;
  for (auto* t : tables)
    for (auto ft : kAllFactTypes) facts.push_back(fixture::enumerate_facts(*t, ft, {Agg::Sum}, 8, 4));
  std::vector<Labelled> out;
  while (out.size() < n) {
    if (out.size() % 2 == 0) {
      const auto& pool = facts[rng() % facts.size()];
      if (pool.empty()) continue;
      const auto& f = pool[rng() % pool.size()];
      out.push_back({fact_to_question(f), f.type});
      continue;
    }
    const auto& x = *tables[rng() % tables.size()];
    auto num = x.columns_of(ColumnType::Numerical);
    auto tmp = x.columns_of(ColumnType::Temporal);
    auto cat = x.columns_of(ColumnType::Categorical);
    auto ft = kAllFactTypes[rng() % kAllFactTypes.size()];
    if (num.size() < 2 || tmp.empty() || cat.empty()) continue;
    const auto& forms = phrasings().at(ft);
    std::string m = num[rng() % num.size()], m2 = m;
    while (m2 == m) m2 = num[rng() % num.size()];
    std::map<std::string, std::string> slots = {
        {"m", m}, {"m2", m2}, {"b", cat[rng() % cat.size()]}, {"t", tmp[rng() % tmp.size()]}};
    out.push_back({fill(forms[rng() % forms.size()], slots), ft});
  }
  return out;
}

} // namespace fixture
