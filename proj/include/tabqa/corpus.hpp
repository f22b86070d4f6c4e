#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabqa/fact.hpp"
#include "tabqa/question.hpp"
#include "tabqa/reference.hpp"
#include "tabqa/similarity.hpp"
#include "tabqa/templates.hpp"

namespace tabqa::corpus {

inline constexpr const char* kCorpusVersion = "1";

enum class Method { Comparison, Intersection, Bridging, NoFactType, NoMeasure, NoBreakdown };

inline constexpr std::array kAllMethods = {Method::Comparison, Method::Intersection, Method::Bridging,
                                           Method::NoFactType, Method::NoMeasure,    Method::NoBreakdown};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Comparison: return "comparison";
    case Method::Intersection: return "intersection";
    case Method::Bridging: return "bridging";
    case Method::NoFactType: return "no-fact-type";
    case Method::NoMeasure: return "no-measure";
    case Method::NoBreakdown: return "no-breakdown";
  }
  return "comparison";
}

inline Method method_from_string(std::string_view s) {
  for (auto m : kAllMethods)
    if (to_string(m) == s) return m;
  throw SchemaError("unknown method '" + std::string(s) + "'");
}

inline QuestionClass method_class(Method m) {
  return m == Method::Comparison || m == Method::Intersection || m == Method::Bridging ? QuestionClass::ComplexTypeI
                                                                                      : QuestionClass::ComplexTypeII;
}

/// Two facts a complex question combines. `shared` is the partial fact the
/// Type-II question is asked about (the omitted slot left empty).
struct FactPair {
  DataFact first;
  DataFact second;
  DataFact shared;
  std::vector<std::string> values;  // compared values (comparison)
};

struct CorpusEntry {
  std::string table_id;
  Method method = Method::Comparison;
  std::size_t template_index = 0;
  std::string template_question;
  std::string complex_question;
  bool rephrased = false;
  std::array<std::string, 2> sub_questions;
  std::array<DataFact, 2> facts;
  std::vector<std::string> input;  // serialized question tokens
};

inline nlohmann::json to_json(const CorpusEntry& e) {
  return {{"table_id", e.table_id},
          {"method", to_string(e.method)},
          {"class", to_string(method_class(e.method))},
          {"template", e.template_index},
          {"template_question", e.template_question},
          {"complex_question", e.complex_question},
          {"rephrased", e.rephrased},
          {"sub_questions", {e.sub_questions[0], e.sub_questions[1]}},
          {"facts", {tabqa::to_json(e.facts[0]), tabqa::to_json(e.facts[1])}},
          {"input", e.input}};
}

inline CorpusEntry entry_from_json(const nlohmann::json& j) {
  CorpusEntry e;
  e.table_id = j.at("table_id").get<std::string>();
  e.method = method_from_string(j.at("method").get<std::string>());
  e.template_index = j.value("template", std::size_t{0});
  e.template_question = j.value("template_question", "");
  e.complex_question = j.at("complex_question").get<std::string>();
  e.rephrased = j.value("rephrased", false);
  const auto& subs = j.at("sub_questions");
  if (!subs.is_array() || subs.size() != 2) throw SchemaError("an entry needs exactly 2 sub-questions");
  e.sub_questions = {subs[0].get<std::string>(), subs[1].get<std::string>()};
  const auto& facts = j.at("facts");
  if (!facts.is_array() || facts.size() != 2) throw SchemaError("an entry needs exactly 2 facts");
  e.facts = {fact_from_json(facts[0]), fact_from_json(facts[1])};
  e.input = j.value("input", std::vector<std::string>{});
  return e;
}

// ---------------------------------------------------------------------------
// Metrics

/// Accept iff the rephrase has at least 3 words and S = semantic - text
/// similarity is positive.
struct PairVerdict {
  bool accepted = false;
  std::string reason;  // "", "too-short", "copy", "meaning-changed"
  double score = 0;
};

inline PairVerdict validate_pair(std::string_view q_m, std::string_view q_r, const SimilarityProvider& p) {
  PairVerdict v;
  if (text::tokenize(q_r).size() < 3) {
    v.reason = "too-short";
    return v;
  }
  v.score = combined_score(q_m, q_r, p);
  if (v.score > 0) {
    v.accepted = true;
  } else {
    v.reason = text::normalize(q_m) == text::normalize(q_r) ? "copy" : "meaning-changed";
  }
  return v;
}

namespace detail {

using Gram = std::vector<std::string>;

inline std::map<Gram, std::size_t> ngrams(const std::vector<std::string>& t, std::size_t n) {
  std::map<Gram, std::size_t> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Gram(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n))];
  return out;
}

/// Light suffix stripping for stem-level matching.
inline std::string stem(std::string w) {
  for (std::string_view suf : {"ing", "ed", "es", "s"})
    if (w.size() > suf.size() + 2 && text::ends_with(w, suf)) return w.substr(0, w.size() - suf.size());
  return w;
}

} // namespace detail

/// Sentence BLEU with up to 4-gram precision (capped by the candidate
/// length), clipped counts, uniform weights, and the brevity penalty
/// against the closest reference length.
inline double bleu(std::string_view candidate, const std::vector<std::string>& references) {
  auto c = text::tokenize(candidate);
  if (c.empty()) throw PreconditionError("empty candidate");
  if (references.empty()) throw PreconditionError("no references");
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(text::tokenize(r));
  std::size_t order = std::min<std::size_t>(4, c.size());
  double log_sum = 0;
  for (std::size_t n = 1; n <= order; ++n) {
    auto cand = detail::ngrams(c, n);
    std::map<detail::Gram, std::size_t> max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : detail::ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    std::size_t clipped = 0, total = 0;
    for (const auto& [g, k] : cand) {
      clipped += std::min(k, max_ref.count(g) ? max_ref[g] : 0);
      total += k;
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  std::size_t r = refs[0].size();
  for (const auto& ref : refs) {
    auto d = [&](std::size_t len) { return len > c.size() ? len - c.size() : c.size() - len; };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  double bp = c.size() > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c.size()));
  return bp * std::exp(log_sum / static_cast<double>(order));
}

/// Unigram F-mean (recall-weighted, 10PR/(R+9P)) with exact matches first,
/// then suffix-stripped stems. No synonym lexicon and no fragmentation
/// penalty.
inline double meteor_lite(std::string_view candidate, std::string_view reference) {
  auto c = text::tokenize(candidate);
  auto r = text::tokenize(reference);
  if (c.empty()) throw PreconditionError("empty candidate");
  if (r.empty()) return 0.0;
  std::vector<bool> cu(c.size()), ru(r.size());
  std::size_t m = 0;
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (cu[i]) continue;
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (ru[j]) continue;
        bool hit = pass == 0 ? c[i] == r[j] : detail::stem(c[i]) == detail::stem(r[j]);
        if (!hit) continue;
        cu[i] = ru[j] = true;
        ++m;
        break;
      }
    }
  if (m == 0) return 0.0;
  double P = static_cast<double>(m) / static_cast<double>(c.size());
  double R = static_cast<double>(m) / static_cast<double>(r.size());
  return 10 * P * R / (R + 9 * P);
}

// ---------------------------------------------------------------------------
// Combination enumeration

namespace detail {

inline std::vector<std::string> group_columns(const DataTable& x, std::size_t cap) {
  std::vector<std::string> out;
  for (const auto& c : x.columns()) {
    if (c.type == ColumnType::Numerical) continue;
    if (c.type == ColumnType::Categorical && x.cardinality(c.name) > cap) continue;
    out.push_back(c.name);
  }
  return out;
}

inline std::vector<std::string> breakdowns_for(FactType t, const DataTable& x, const std::vector<std::string>& groups,
                                               const std::string& exclude = "") {
  std::vector<std::string> out;
  for (const auto& g : groups)
    if (g != exclude && breakdown_admissible(t, x.column(g).type)) out.push_back(g);
  return out;
}

/// Fills the focus from the data; nullopt when the fact is not valid here.
inline std::optional<DataFact> complete(DataFact f, const DataTable& x, FocusRole role = FocusRole::Max) {
  try {
    DataFact probe = f;
    probe.focus.clear();
    auto r = evaluate_fact(probe, x);
    const auto& d = r.derived;
    f.focus.clear();
    switch (f.type) {
      case FactType::Extreme:
        if (role == FocusRole::Max && d.max) f.focus = {{d.max->key, role}};
        if (role == FocusRole::Min && d.min) f.focus = {{d.min->key, role}};
        if (is_threshold(role) && d.average)
          for (const auto& g : r.groups)
            if (role == FocusRole::AboveAverage ? g.value > *d.average : g.value < *d.average)
              f.focus.push_back({g.key, role});
        if (f.focus.empty()) return std::nullopt;
        break;
      case FactType::Outlier:
        for (const auto& k : d.highlighted) f.focus.push_back({k, FocusRole::Outlier});
        if (f.focus.empty()) return std::nullopt;
        break;
      case FactType::Proportion:
      case FactType::Difference: {
        auto groups = r.groups;
        std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.value > b.value; });
        std::size_t n = f.type == FactType::Proportion ? 1 : 2;
        if (groups.size() < n) return std::nullopt;
        for (std::size_t i = 0; i < n; ++i) f.focus.push_back({groups[i].key, FocusRole::Item});
        break;
      }
      default: break;
    }
    if (!validate_fact(f, x).empty()) return std::nullopt;
    evaluate_fact(f, x);
    return f;
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::optional<std::string> winner(const DataFact& f) {
  if (f.focus.empty()) return std::nullopt;
  return f.focus.front().key;
}

} // namespace detail

/// Sub-question text: focus keys dropped (extreme keeps its role).
inline std::string render_sub(DataFact f, bool keep_subspace = true) {
  if (f.type != FactType::Extreme) f.focus.clear();
  else if (!f.focus.empty()) f.focus = {{"", f.focus.front().role}};
  if (!keep_subspace) f.subspace = {};
  return fact_to_question(f, true);
}

inline std::vector<FactPair> enumerate_combos(const DataTable& x, Method method, std::size_t cap = kDefaultCardinalityCap) {
  std::vector<FactPair> out;
  auto numeric = x.columns_of(ColumnType::Numerical);
  auto groups = detail::group_columns(x, cap);
  auto m_of = [](const std::string& c) { return std::vector<Measure>{{c, Agg::Sum}}; };

  switch (method) {
    case Method::Comparison: {
      for (const auto& c : groups) {
        if (x.column(c).type != ColumnType::Categorical) continue;
        auto vals = x.distinct(c);
        std::sort(vals.begin(), vals.end());
        if (vals.size() < 2) continue;
        vals.resize(std::min<std::size_t>(vals.size(), 4));
        for (std::size_t i = 0; i < vals.size(); ++i)
          for (std::size_t j = i + 1; j < vals.size(); ++j)
            for (const auto& m : numeric)
              for (auto t : {FactType::Trend, FactType::Rank, FactType::Distribution, FactType::Value}) {
                std::vector<std::optional<std::string>> bds;
                if (t == FactType::Value) bds.push_back(std::nullopt);
                for (const auto& b : detail::breakdowns_for(t, x, groups, c)) bds.push_back(b);
                for (const auto& b : bds) {
                  DataFact a{t, {{Filter::equals(c, vals[i])}}, b, m_of(m), {}};
                  DataFact z{t, {{Filter::equals(c, vals[j])}}, b, m_of(m), {}};
                  auto ca = detail::complete(a, x), cz = detail::complete(z, x);
                  if (ca && cz) out.push_back({*ca, *cz, DataFact{t, {}, b, m_of(m), {}}, {vals[i], vals[j]}});
                }
              }
      }
      break;
    }
    case Method::Intersection: {
      const std::array<std::pair<FocusRole, FocusRole>, 6> roles = {{
          {FocusRole::Max, FocusRole::Max},
          {FocusRole::Max, FocusRole::Min},
          {FocusRole::Min, FocusRole::Max},
          {FocusRole::Min, FocusRole::Min},
          {FocusRole::AboveAverage, FocusRole::AboveAverage},
          {FocusRole::AboveAverage, FocusRole::BelowAverage},
      }};
      for (const auto& b : detail::breakdowns_for(FactType::Extreme, x, groups))
        for (const auto& m1 : numeric)
          for (const auto& m2 : numeric) {
            if (m1 == m2) continue;
            for (const auto& [r1, r2] : roles) {
              auto a = detail::complete({FactType::Extreme, {}, b, m_of(m1), {}}, x, r1);
              auto z = detail::complete({FactType::Extreme, {}, b, m_of(m2), {}}, x, r2);
              if (a && z) out.push_back({*a, *z, {}, {}});
            }
          }
      break;
    }
    case Method::Bridging: {
      for (const auto& B : detail::breakdowns_for(FactType::Extreme, x, groups))
        for (const auto& m1 : numeric)
          for (auto role : {FocusRole::Max, FocusRole::Min}) {
            auto ext = detail::complete({FactType::Extreme, {}, B, m_of(m1), {}}, x, role);
            if (!ext) continue;
            auto win = detail::winner(*ext);
            for (const auto& m2 : numeric)
              for (auto t : {FactType::Distribution, FactType::Rank, FactType::Trend, FactType::Value}) {
                std::vector<std::optional<std::string>> bds;
                if (t == FactType::Value) bds.push_back(std::nullopt);
                for (const auto& b : detail::breakdowns_for(t, x, groups, B)) bds.push_back(b);
                for (const auto& b : bds) {
                  auto f2 = detail::complete({t, {{Filter::equals(B, *win)}}, b, m_of(m2), {}}, x);
                  if (f2) out.push_back({*ext, *f2, {}, {}});
                }
              }
          }
      break;
    }
    case Method::NoFactType: {
      const std::vector<FactType> kinds = {FactType::Extreme,      FactType::Trend, FactType::Difference,
                                           FactType::Distribution, FactType::Rank,  FactType::Proportion,
                                           FactType::Outlier};
      for (const auto& b : groups)
        for (const auto& c : numeric)
          for (auto agg : {Agg::Sum, Agg::Mean})
            for (std::size_t i = 0; i < kinds.size(); ++i)
              for (std::size_t j = i + 1; j < kinds.size(); ++j) {
                if (!breakdown_admissible(kinds[i], x.column(b).type) ||
                    !breakdown_admissible(kinds[j], x.column(b).type))
                  continue;
                std::vector<Measure> m = {{c, agg}};
                auto a = detail::complete({kinds[i], {}, b, m, {}}, x);
                auto z = detail::complete({kinds[j], {}, b, m, {}}, x);
                if (a && z) out.push_back({*a, *z, DataFact{kinds[i], {}, b, m, {}}, {}});
              }
      break;
    }
    case Method::NoMeasure: {
      for (auto t : {FactType::Outlier, FactType::Extreme, FactType::Trend, FactType::Rank, FactType::Distribution,
                     FactType::Difference, FactType::Proportion})
        for (const auto& b : detail::breakdowns_for(t, x, groups))
          for (std::size_t i = 0; i < numeric.size(); ++i)
            for (std::size_t j = i + 1; j < numeric.size(); ++j) {
              auto a = detail::complete({t, {}, b, m_of(numeric[i]), {}}, x);
              auto z = detail::complete({t, {}, b, m_of(numeric[j]), {}}, x);
              DataFact shared{t, {}, b, {}, {}};
              if (t == FactType::Extreme) shared.focus = {{"", FocusRole::Max}};
              if (a && z) out.push_back({*a, *z, shared, {}});
            }
      break;
    }
    case Method::NoBreakdown: {
      for (auto t : {FactType::Outlier, FactType::Extreme, FactType::Rank, FactType::Distribution, FactType::Difference,
                     FactType::Proportion}) {
        auto bds = detail::breakdowns_for(t, x, groups);
        for (const auto& c : numeric)
          for (auto agg : {Agg::Sum, Agg::Mean})
            for (std::size_t i = 0; i < bds.size(); ++i)
              for (std::size_t j = i + 1; j < bds.size(); ++j) {
              std::vector<Measure> m = {{c, agg}};
              auto a = detail::complete({t, {}, bds[i], m, {}}, x);
              auto z = detail::complete({t, {}, bds[j], m, {}}, x);
              DataFact shared{t, {}, std::nullopt, m, {}};
              if (t == FactType::Extreme) shared.focus = {{"", FocusRole::Max}};
              if (a && z) out.push_back({*a, *z, shared, {}});
            }
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

inline constexpr std::size_t kTemplatesPerMethod = 3;

namespace detail {

inline std::string strip_q(std::string s) {
  while (!s.empty() && (s.back() == '?' || s.back() == ' ')) s.pop_back();
  return s;
}

inline std::string task_phrase(const DataFact& f) {
  std::string m = f.measures.empty() ? "value" : f.measures[0].column;
  switch (f.type) {
    case FactType::Trend: return "trend of " + m + (f.breakdown ? " over " + *f.breakdown : "");
    case FactType::Rank: return "order of " + m + (f.breakdown ? " for each " + *f.breakdown : "");
    case FactType::Distribution: return "distribution of " + m + (f.breakdown ? " over " + *f.breakdown : "");
    default: return "total " + m;
  }
}

inline std::string role_phrase(FocusRole r, const std::string& m, int style) {
  switch (r) {
    case FocusRole::Max: return style == 0 ? "the highest " + m : "the most " + m;
    case FocusRole::Min: return style == 0 ? "the lowest " + m : "the least " + m;
    case FocusRole::AboveAverage: return style == 0 ? "a " + m + " higher than average" : "above average " + m;
    case FocusRole::BelowAverage: return style == 0 ? "a " + m + " lower than average" : "below average " + m;
    default: return m;
  }
}

} // namespace detail

/// Complex question for a combination; `which` picks one of the method's
/// templates.
inline std::string render_complex(const FactPair& p, Method method, std::size_t which) {
  which %= kTemplatesPerMethod;
  switch (method) {
    case Method::Comparison: {
      auto task = detail::task_phrase(p.shared);
      const auto& a = p.values.at(0);
      const auto& b = p.values.at(1);
      if (which == 0) return "compare the " + task + " between " + a + " and " + b;
      if (which == 1) return "how do " + a + " and " + b + " differ in the " + task + "?";
      return "what is the " + task + " in " + a + " and in " + b + "?";
    }
    case Method::Intersection: {
      const auto& bd = *p.first.breakdown;
      auto r1 = p.first.focus.front().role, r2 = p.second.focus.front().role;
      const auto& m1 = p.first.measures[0].column;
      const auto& m2 = p.second.measures[0].column;
      if (which == 0) return "which " + bd + " has " + detail::role_phrase(r1, m1, 0) + " and " + detail::role_phrase(r2, m2, 0) + "?";
      if (which == 1) return "find the " + bd + " with " + detail::role_phrase(r1, m1, 1) + " and " + detail::role_phrase(r2, m2, 1);
      return "is there a " + bd + " that has " + detail::role_phrase(r1, m1, 0) + " and also " + detail::role_phrase(r2, m2, 0) + "?";
    }
    case Method::Bridging: {
      const auto& B = *p.first.breakdown;
      const auto& m1 = p.first.measures[0].column;
      bool hi = p.first.focus.front().role == FocusRole::Max;
      std::string sub = render_sub(p.second, false);
      std::string sel = which == 0 ? (hi ? "the most " : "the least ")
                        : which == 1 ? (hi ? "highest " : "lowest ")
                                     : (hi ? "the largest " : "the smallest ");
      return "in the " + B + " with " + sel + m1 + ", " + sub;
    }
    case Method::NoFactType: {
      auto m = tabqa::detail::measure_phrase(p.shared.measures[0], nullptr);
      const auto& bd = *p.shared.breakdown;
      if (which == 0) return "how is the " + m + " of each " + bd + "?";
      if (which == 1) return "tell me about " + m + " by " + bd;
      return "what about the " + m + " for every " + bd + "?";
    }
    case Method::NoMeasure:
    case Method::NoBreakdown: {
      auto base = fact_to_question(p.shared, true);
      if (which == 0) return base;
      if (which == 1) return "could you tell me " + base;
      return "i would like to know " + detail::strip_q(base);
    }
  }
  return {};
}

inline std::array<std::string, 2> render_subs(const FactPair& p, Method method) {
  bool keep = method != Method::Bridging;
  return {render_sub(p.first, true), render_sub(p.second, keep)};
}

// ---------------------------------------------------------------------------
// Rephrasing stand-in

namespace detail {

inline const std::vector<std::pair<std::string, std::string>>& swaps() {
  static const std::vector<std::pair<std::string, std::string>> s = {
      {"highest", "largest"}, {"lowest", "smallest"}, {"what is", "tell me"}, {"which", "what"},
      {"each", "every"},      {"compare", "contrast"}, {"find", "show me"},  {"the most", "the biggest"}};
  return s;
}

/// One seeded surface edit: a word swap, or a polite prefix.
inline std::string perturb(const std::string& q, std::mt19937_64& rng) {
  auto r = rng() % 4;
  if (r == 0) return q;
  bool wh = text::starts_with(q, "what") || text::starts_with(q, "which") || text::starts_with(q, "how");
  if (r == 1 && wh) {
    static const std::array<const char*, 3> prefixes = {"please tell me ", "i want to know ", "can you show "};
    auto first = prefixes[rng() % prefixes.size()];
    return first + q;
  }
  std::vector<std::size_t> hits;
  const auto& s = swaps();
  std::string padded = " " + q + " ";
  for (std::size_t i = 0; i < s.size(); ++i)
    if (padded.find(" " + s[i].first + " ") != std::string::npos) hits.push_back(i);
  if (q.find("tell me") != std::string::npos)
    hits.erase(std::remove_if(hits.begin(), hits.end(), [&](std::size_t i) { return s[i].second == "tell me"; }), hits.end());
  if (hits.empty()) return q;
  const auto& [from, to] = s[hits[rng() % hits.size()]];
  auto pos = padded.find(" " + from + " ");
  padded.replace(pos + 1, from.size(), to);
  return padded.substr(1, padded.size() - 2);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Generation

struct GenerateOptions {
  std::uint64_t seed = 42;
  std::size_t max_per_method = 80;  // per table
  std::size_t cardinality_cap = kDefaultCardinalityCap;
};

struct Corpus {
  nlohmann::json header;
  std::vector<CorpusEntry> entries;
};

/// Classification invariant: Type-I methods classify ComplexTypeI, Type-II
/// methods ComplexTypeII, sub-questions Simple. Returns the violations.
inline std::vector<std::string> entry_violations(const CorpusEntry& e, const DataTable& x) {
  std::vector<std::string> out;
  auto cls = classify_complexity(formulate(e.complex_question, x));
  if (cls != method_class(e.method))
    out.push_back("'" + e.complex_question + "' classifies " + to_string(cls) + ", expected " +
                  to_string(method_class(e.method)));
  for (const auto& s : e.sub_questions) {
    auto c = classify_complexity(formulate(s, x));
    if (c != QuestionClass::Simple) out.push_back("sub-question '" + s + "' classifies " + to_string(c));
  }
  if (text::normalize(e.sub_questions[0]) == text::normalize(e.sub_questions[1]))
    out.push_back("sub-questions are identical");
  return out;
}

/// Entries for one table, ordered by method then enumeration index. The
/// template and the rephrase are seeded per (seed, table, method).
inline std::vector<CorpusEntry> generate_table(const DataTable& x, const GenerateOptions& opt,
                                               std::map<std::string, std::size_t>* dropped = nullptr) {
  std::vector<CorpusEntry> out;
  auto provider = make_reference_provider(x, opt.cardinality_cap);
  for (auto method : kAllMethods) {
    auto combos = enumerate_combos(x, method, opt.cardinality_cap);
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                      static_cast<std::uint32_t>(text::fnv1a(x.name()) & 0xffffffffu),
                      static_cast<std::uint32_t>(method)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> idx(combos.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > opt.max_per_method) {
      for (std::size_t i = 0; i < opt.max_per_method; ++i) std::swap(idx[i], idx[i + rng() % (idx.size() - i)]);
      idx.resize(opt.max_per_method);
      std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) {
      const auto& p = combos[i];
      CorpusEntry e;
      e.table_id = x.name();
      e.method = method;
      e.template_index = rng() % kTemplatesPerMethod;
      e.template_question = render_complex(p, method, e.template_index);
      e.sub_questions = render_subs(p, method);
      e.facts = {p.first, p.second};
      e.complex_question = e.template_question;
      auto rephrase = detail::perturb(e.template_question, rng);
      if (rephrase != e.template_question && validate_pair(e.template_question, rephrase, *provider).accepted) {
        CorpusEntry trial = e;
        trial.complex_question = rephrase;
        trial.rephrased = true;
        if (entry_violations(trial, x).empty()) e = trial;
      }
      if (!entry_violations(e, x).empty()) {
        if (dropped) ++(*dropped)[x.name() + "/" + to_string(method)];
        continue;
      }
      e.input = formulate(e.complex_question, x, opt.cardinality_cap).serialized_tokens();
      out.push_back(std::move(e));
    }
  }
  return out;
}

inline Corpus generate(std::vector<const DataTable*> tables, const GenerateOptions& opt = {}) {
  std::sort(tables.begin(), tables.end(), [](const DataTable* a, const DataTable* b) { return a->name() < b->name(); });
  Corpus c;
  std::map<std::string, std::size_t> dropped;
  nlohmann::json names = nlohmann::json::array();
  for (const auto* t : tables) {
    names.push_back(t->name());
    auto es = generate_table(*t, opt, &dropped);
    c.entries.insert(c.entries.end(), std::make_move_iterator(es.begin()), std::make_move_iterator(es.end()));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& e : c.entries) {
    ++counts[to_string(e.method)];
    ++counts[to_string(method_class(e.method))];
  }
  c.header = {{"version", kCorpusVersion}, {"seed", opt.seed}, {"tables", names},
              {"counts", counts},          {"dropped", dropped}};
  return c;
}

inline std::string to_jsonl(const Corpus& c) {
  std::string out = nlohmann::json{{"header", c.header}}.dump() + "\n";
  for (const auto& e : c.entries) out += to_json(e).dump() + "\n";
  return out;
}

inline Corpus from_jsonl(std::istream& in) {
  Corpus c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(n, "line " + std::to_string(n) + ": " + e.what());
    }
    if (n == 1) {
      if (!j.contains("header")) throw ParseError(1, "first line must be the header record");
      c.header = j.at("header");
      if (c.header.value("version", "") != kCorpusVersion) throw ParseError(1, "unsupported corpus version");
      continue;
    }
    try {
      c.entries.push_back(entry_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(n, "line " + std::to_string(n) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw ParseError(n, "line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (n == 0) throw EmptyInput("corpus is empty");
  return c;
}

} // namespace tabqa::corpus
