#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tabqa/chart.hpp"
#include "tabqa/decompose.hpp"
#include "tabqa/search.hpp"

namespace tabqa {

struct AskOptions {
  SearchConfig search;
  std::size_t max_depth = 3;
  const Decomposer* backend = nullptr;  // rule backend when null
  std::chrono::milliseconds deadline{0}; // no deadline when zero
};

struct Unanswered {
  std::string question;
  std::string reason;
};

struct AskResult {
  DecompositionTree tree;
  Dashboard dashboard;
  std::vector<Unanswered> unanswered;
};

inline nlohmann::json to_json(const AskResult& r) {
  auto j = to_json(r.dashboard);
  j["tree"] = to_json(r.tree);
  nlohmann::json un = nlohmann::json::array();
  for (const auto& u : r.unanswered) un.push_back({{"question", u.question}, {"reason", u.reason}});
  j["unanswered"] = un;
  return j;
}

/// Charts answering one simple (or forced) question, best first.
inline std::vector<ChartSpec> answer_charts(const std::string& q, const DataTable& x, const SearchConfig& base,
                                            const SimilarityProvider& p) {
  SearchConfig cfg = base;
  cfg.aggs = question_aggs(q, cfg.aggs);
  auto fq = formulate(q, x, cfg.max_categorical_cardinality);
  auto aliases = fq.aliases();
  auto facts = search(q, classify_fact_type(q), x, cfg, p, &aliases);
  std::vector<ChartSpec> charts;
  for (const auto& s : facts) {
    try {
      charts.push_back(build_chart(evaluate_fact(s.fact, x), s.score));
    } catch (const EmptyChartError&) {
    }
  }
  if (charts.empty()) throw SearchError("unsatisfiable: no chartable fact");
  return charts;
}

/// Whole pipeline: formulate, resolve, answer each leaf, chart, lay out.
inline AskResult ask(std::string_view question, const DataTable& x, const AskOptions& opt,
                     std::shared_ptr<const SimilarityProvider> provider = nullptr) {
  using clock = std::chrono::steady_clock;
  auto start = clock::now();
  if (text::trim(question).empty()) throw EmptyInput("empty question");
  if (!provider) provider = make_reference_provider(x);
  ResolveOptions ro;
  ro.max_depth = opt.max_depth;
  ro.backend = opt.backend;
  ro.provider = provider;

  AskResult out;
  out.tree = resolve(question, x, ro);
  std::vector<Section> sections;
  for (const auto* leaf : leaves(out.tree)) {
    if (opt.deadline.count() > 0 && clock::now() - start > opt.deadline)
      throw DeadlineExceeded("deadline exceeded after " + std::to_string(sections.size()) + " of " +
                             std::to_string(leaves(out.tree).size()) + " sub-questions");
    try {
      sections.push_back({leaf->question, answer_charts(leaf->question, x, opt.search, *provider)});
    } catch (const SearchError& e) {
      out.unanswered.push_back({leaf->question, e.what()});
    } catch (const InsufficientData& e) {
      out.unanswered.push_back({leaf->question, e.what()});
    }
  }
  if (sections.empty()) {
    std::vector<std::string> reasons;
    for (const auto& u : out.unanswered) reasons.push_back(u.question + ": " + u.reason);
    throw Unanswerable(reasons);
  }
  out.dashboard = layout(std::string(question), sections);
  return out;
}

inline AskResult ask(std::string_view question, const DataTable& x) { return ask(question, x, AskOptions{}); }

inline constexpr std::size_t kMaxSuggestions = 12;

/// Template questions that use `column` (any column when unset), one fact
/// type at a time in round-robin order, at most 12.
inline std::vector<std::string> suggestions(const DataTable& x, const std::optional<std::string>& column = std::nullopt,
                                            std::size_t cardinality_cap = kDefaultCardinalityCap) {
  std::optional<ColumnType> ctype;
  if (column) ctype = x.column(*column).type;  // SchemaError for unknown columns
  auto numeric = x.columns_of(ColumnType::Numerical);
  std::vector<std::string> groups;
  for (const auto& c : x.columns()) {
    if (c.type == ColumnType::Numerical) continue;
    if (c.type == ColumnType::Categorical && x.cardinality(c.name) > cardinality_cap && c.name != column) continue;
    groups.push_back(c.name);
  }

  std::vector<std::vector<std::string>> per_type;
  for (auto t : kAllFactTypes) {
    auto mask = required_fields(t);
    std::vector<std::vector<Measure>> ms;
    if (mask.measures == 0) ms.push_back({});
    if (mask.measures == 1)
      for (const auto& m : numeric) ms.push_back({{m, Agg::Sum}});
    if (mask.measures == 2)
      for (std::size_t i = 0; i < numeric.size(); ++i)
        for (std::size_t j = i + 1; j < numeric.size(); ++j) ms.push_back({{numeric[i], Agg::Sum}, {numeric[j], Agg::Sum}});
    std::vector<std::optional<std::string>> bds;
    if (mask.breakdown != Need::Required) bds.push_back(std::nullopt);
    for (const auto& g : groups)
      if (mask.breakdown != Need::None && breakdown_admissible(t, x.column(g).type)) bds.push_back(g);

    std::vector<std::string> qs;
    for (const auto& bd : bds) {
      for (const auto& m : ms) {
        bool uses = !column || (bd && *bd == *column) ||
                    std::any_of(m.begin(), m.end(), [&](const Measure& k) { return k.column == *column; });
        if (!uses) continue;
        DataFact f{t, {}, bd, m, {}};
        if (t == FactType::Extreme) f.focus = {{"", FocusRole::Max}};
        qs.push_back(fact_to_question(f, true));
      }
    }
    per_type.push_back(std::move(qs));
  }

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t round = 0; out.size() < kMaxSuggestions; ++round) {
    bool any = false;
    for (const auto& qs : per_type) {
      if (round >= qs.size() || out.size() >= kMaxSuggestions) continue;
      any = true;
      if (seen.insert(qs[round]).second) out.push_back(qs[round]);
    }
    if (!any) break;
  }
  (void)ctype;
  return out;
}

} // namespace tabqa
