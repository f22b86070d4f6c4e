#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tabqa/question.hpp"
#include "tabqa/reference.hpp"

namespace tabqa {

using SubQuestions = std::pair<std::string, std::string>;

struct TreeNode {
  std::string question;
  QuestionClass cls = QuestionClass::Simple;
  std::string backend;  // backend that split this node; empty for leaves
  bool forced = false;
  std::vector<TreeNode> children;
};
using DecompositionTree = TreeNode;

inline nlohmann::json to_json(const TreeNode& n) {
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : n.children) children.push_back(to_json(c));
  return {{"question", n.question}, {"class", to_string(n.cls)}, {"backend", n.backend},
          {"forced", n.forced}, {"children", children}};
}

inline TreeNode tree_from_json(const nlohmann::json& j) {
  TreeNode n;
  n.question = j.at("question").get<std::string>();
  n.cls = question_class_from_string(j.at("class").get<std::string>());
  n.backend = j.value("backend", "");
  n.forced = j.value("forced", false);
  for (const auto& c : j.value("children", nlohmann::json::array())) n.children.push_back(tree_from_json(c));
  return n;
}

/// Leaves in depth-first order, duplicates (by normalized text) removed.
inline std::vector<const TreeNode*> leaves(const TreeNode& root) {
  std::vector<const TreeNode*> out;
  std::set<std::string> seen;
  std::function<void(const TreeNode&)> walk = [&](const TreeNode& n) {
    if (n.children.empty()) {
      if (seen.insert(text::normalize(n.question)).second) out.push_back(&n);
      return;
    }
    for (const auto& c : n.children) walk(c);
  };
  walk(root);
  return out;
}

inline std::size_t depth(const TreeNode& n) {
  std::size_t d = 0;
  for (const auto& c : n.children) d = std::max(d, depth(c) + 1);
  return d;
}

// ---------------------------------------------------------------------------
// Rule frames

namespace detail {

/// Tokens [b, e) of a formulated question with the mentions inside them.
inline FormulatedQuestion slice(const FormulatedQuestion& fq, std::size_t b, std::size_t e) {
  FormulatedQuestion out;
  out.schema = fq.schema;
  out.wide_columns = fq.wide_columns;
  e = std::min(e, fq.tokens.size());
  b = std::min(b, e);
  out.tokens.assign(fq.tokens.begin() + static_cast<long>(b), fq.tokens.begin() + static_cast<long>(e));
  out.text = text::join(out.tokens, " ");
  for (auto m : fq.mentions) {
    if (m.begin < b || m.end > e) continue;
    m.begin -= b;
    m.end -= b;
    out.mentions.push_back(m);
  }
  return out;
}

/// Token count of the raw text up to byte offset `pos`.
inline std::size_t tokens_before(const std::string& raw, std::size_t pos) {
  return text::tokenize(std::string_view(raw).substr(0, pos)).size();
}

inline bool admissible(const FormulatedQuestion& fq, FactType t, const std::string& column) {
  auto c = fq.type_of(column);
  return c && breakdown_admissible(t, *c);
}

/// Fills slots a clause leaves open from the whole question.
inline void fill_from(DataFact& f, const FormulatedQuestion& whole) {
  auto mask = required_fields(f.type);
  if (static_cast<int>(f.measures.size()) < mask.measures) {
    Agg agg = agg_keyword(whole.tokens).value_or(Agg::Sum);
    for (const auto& m : whole.measures()) {
      if (static_cast<int>(f.measures.size()) >= mask.measures) break;
      bool dup = std::any_of(f.measures.begin(), f.measures.end(), [&](const Measure& x) { return x.column == m; });
      if (!dup) f.measures.push_back({m, agg});
    }
  }
  if (mask.breakdown == Need::Required && !f.breakdown) {
    for (const auto& b : whole.breakdowns())
      if (!f.breakdown && admissible(whole, f.type, b)) f.breakdown = b;
    for (const auto& [col, v] : whole.values())
      if (!f.breakdown && admissible(whole, f.type, col)) f.breakdown = col;
  }
}

inline std::string render(const DataFact& f, const FormulatedQuestion& fq) {
  auto aliases = fq.aliases();
  return sketch_question(f, &aliases);
}

/// "In the <entity> with most <measure>, <question>".
inline std::optional<SubQuestions> bridging(const FormulatedQuestion& fq) {
  if (!bridging_frame(fq)) return std::nullopt;
  std::size_t cut = tokens_before(fq.text, fq.text.find(','));
  auto clause = slice(fq, 0, cut);
  auto inner = slice(fq, cut, fq.tokens.size());
  if (inner.tokens.empty()) return std::nullopt;

  DataFact ext;
  ext.type = FactType::Extreme;
  for (const auto& b : clause.breakdowns())
    if (!ext.breakdown && admissible(fq, FactType::Extreme, b)) ext.breakdown = b;
  auto ms = clause.measures();
  if (!ext.breakdown || ms.empty()) return std::nullopt;
  ext.measures.push_back({ms.front(), agg_keyword(clause.tokens).value_or(Agg::Sum)});
  ext.focus.push_back({"", polarity_of(clause.tokens) < 0 ? FocusRole::Min : FocusRole::Max});

  FactType t = classify_fact_type(inner.text);
  DataFact rest = sketch(inner, t);
  return SubQuestions{render(ext, fq), render(rest, fq)};
}

/// "compare A and B ... <task>": the task once per compared value (or
/// measure).
inline std::optional<SubQuestions> comparison(const FormulatedQuestion& fq) {
  if (!compare_frame(fq)) return std::nullopt;
  auto types = task_types(fq.tokens);
  FactType task = FactType::Value;
  for (auto t : types)
    if (t != FactType::Difference) {
      task = t;
      break;
    }

  std::map<std::string, std::vector<std::string>> by_column;
  std::vector<std::string> order;
  for (const auto& [col, v] : fq.values()) {
    if (!by_column.count(col)) order.push_back(col);
    by_column[col].push_back(v);
  }
  for (const auto& col : order) {
    const auto& vals = by_column[col];
    if (vals.size() < 2) continue;
    FormulatedQuestion rest = fq;
    rest.mentions.erase(std::remove_if(rest.mentions.begin(), rest.mentions.end(),
                                       [&](const Mention& m) { return m.kind == MentionKind::Value && m.column == col; }),
                        rest.mentions.end());
    DataFact f = sketch(rest, task);
    if (f.breakdown && *f.breakdown == col) f.breakdown.reset();
    std::vector<std::string> qs;
    for (std::size_t i = 0; i < 2; ++i) {
      DataFact g = f;
      g.subspace.filters.insert(g.subspace.filters.begin(), Filter::equals(col, vals[i]));
      qs.push_back(render(g, fq));
    }
    return SubQuestions{qs[0], qs[1]};
  }

  auto ms = fq.measures();
  if (ms.size() >= 2 && required_fields(task).measures == 1) {
    std::vector<std::string> qs;
    for (std::size_t i = 0; i < 2; ++i) {
      DataFact f = sketch(fq, task);
      f.measures = {{ms[i], agg_keyword(fq.tokens).value_or(Agg::Sum)}};
      qs.push_back(render(f, fq));
    }
    return SubQuestions{qs[0], qs[1]};
  }
  return std::nullopt;
}

/// One predicate of an intersection/conjunction, rendered as a simple
/// question. Polarity-only predicates ("expensive") become above/below
/// average thresholds.
inline std::optional<std::string> predicate(const FormulatedQuestion& part, const FormulatedQuestion& whole) {
  auto types = task_types(part.tokens);
  DataFact f;
  if (!types.empty()) {
    f = sketch(part, types.front());
  } else {
    int polarity = 0;
    std::string measure;
    for (const auto& m : part.mentions)
      if (m.kind == MentionKind::Synonym && m.polarity) {
        polarity = m.polarity;
        measure = m.column;
        break;
      }
    if (!polarity) return std::nullopt;
    f.type = FactType::Extreme;
    f.measures.push_back({measure, agg_keyword(whole.tokens).value_or(Agg::Sum)});
    f.focus.push_back({"", polarity > 0 ? FocusRole::AboveAverage : FocusRole::BelowAverage});
  }
  fill_from(f, whole);
  auto mask = required_fields(f.type);
  if (mask.breakdown == Need::Required && !f.breakdown) {
    auto cands = admissible_breakdowns(whole, f.type);
    if (cands.size() == 1) f.breakdown = cands.front();
  }
  return render(f, whole);
}

inline std::optional<SubQuestions> conjunction(const FormulatedQuestion& fq) {
  auto ands = conjunctions(fq);
  if (ands.empty()) return std::nullopt;
  // A leading "compare ... and" is handled by the comparison frame.
  std::size_t cut = ands.front();
  auto a = slice(fq, 0, cut);
  auto b = slice(fq, cut + 1, fq.tokens.size());
  auto qa = predicate(a, fq);
  auto qb = predicate(b, fq);
  if (!qa || !qb) return std::nullopt;
  if (text::normalize(*qa) == text::normalize(*qb)) return std::nullopt;
  return SubQuestions{*qa, *qb};
}

/// Two task keywords without a connecting frame: one question per task.
inline std::optional<SubQuestions> multi_task(const FormulatedQuestion& fq) {
  auto types = task_types(fq.tokens);
  if (types.size() < 2) return std::nullopt;
  return SubQuestions{render(sketch(fq, types[0]), fq), render(sketch(fq, types[1]), fq)};
}

} // namespace detail

/// Separates a Type-I question into its two simple questions by surface
/// frames: bridging, comparison, intersection/conjunction, then two tasks.
inline SubQuestions decompose_type1(const FormulatedQuestion& fq) {
  if (auto r = detail::bridging(fq)) return *r;
  if (auto r = detail::comparison(fq)) return *r;
  if (auto r = detail::conjunction(fq)) return *r;
  if (auto r = detail::multi_task(fq)) return *r;
  throw FrameError("no comparison, intersection or bridging frame in '" + fq.text + "'");
}

// ---------------------------------------------------------------------------
// Type-II expansion

inline constexpr std::size_t kTypeIICandidateCap = 24;

struct Candidate {
  DataFact fact;
  std::string question;
  double score = 0;
};

namespace detail {

inline std::optional<std::string> widest_category(const FormulatedQuestion& fq, const DataTable& x) {
  std::optional<std::string> best;
  std::size_t card = 0;
  for (const auto& c : fq.columns_of(ColumnType::Categorical)) {
    if (fq.wide_columns.count(c)) continue;
    std::size_t n = x.cardinality(c);
    if (n > card) {
      card = n;
      best = c;
    }
  }
  return best;
}

inline bool starts_with_words(const FormulatedQuestion& fq, std::initializer_list<std::string_view> words) {
  std::size_t i = 0;
  for (auto w : words)
    if (i >= fq.tokens.size() || fq.tokens[i++] != w) return false;
  return true;
}

/// "How is the <measure>?" and similar open questions: a grouped view
/// plus the overall value.
inline std::optional<SubQuestions> overview(const FormulatedQuestion& fq, const DataTable& x) {
  if (!task_types(fq.tokens).empty() || !fq.breakdowns().empty() || !fq.values().empty()) return std::nullopt;
  auto ms = fq.measures();
  auto numeric = fq.columns_of(ColumnType::Numerical);
  if (ms.empty() && numeric.empty()) return std::nullopt;
  std::string m = ms.empty() ? numeric.front() : ms.front();
  auto cat = widest_category(fq, x);
  auto temporal = fq.columns_of(ColumnType::Temporal);
  DataFact value{FactType::Value, {}, std::nullopt, {{m, agg_keyword(fq.tokens).value_or(Agg::Sum)}}, {}};
  std::string q2 = fact_to_question(value);
  if (cat && !temporal.empty())
    return SubQuestions{"how is the " + m + " by " + *cat + " or " + temporal.front() + "?", q2};
  DataFact one;
  one.measures = value.measures;
  if (cat) {
    one.type = FactType::Extreme;
    one.breakdown = cat;
    one.focus = {{"", FocusRole::Max}};
  } else if (!temporal.empty()) {
    one.type = FactType::Trend;
    one.breakdown = temporal.front();
  } else {
    return std::nullopt;
  }
  return SubQuestions{fact_to_question(one, true), q2};
}

/// Second stage of the overview: "how is the <m> by <category> or <time>?".
inline std::optional<SubQuestions> grouped_view(const FormulatedQuestion& fq) {
  if (!starts_with_words(fq, {"how", "is", "the"}) || !task_types(fq.tokens).empty()) return std::nullopt;
  auto ms = fq.measures();
  std::optional<std::string> cat, temporal;
  for (const auto& b : fq.breakdowns()) {
    auto t = fq.type_of(b);
    if (t == ColumnType::Categorical && !cat) cat = b;
    if (t == ColumnType::Temporal && !temporal) temporal = b;
  }
  if (ms.empty() || !cat || !temporal) return std::nullopt;
  Agg agg = agg_keyword(fq.tokens).value_or(Agg::Sum);
  DataFact ext{FactType::Extreme, {}, cat, {{ms.front(), agg}}, {{"", FocusRole::Max}}};
  DataFact trend{FactType::Trend, {}, temporal, {{ms.front(), agg}}, {}};
  return SubQuestions{fact_to_question(ext, true), fact_to_question(trend, true)};
}

} // namespace detail

/// Candidate fills for the slots a Type-II question leaves open, in
/// enumeration order (type, measure, breakdown), capped.
inline std::vector<Candidate> type2_candidates(const FormulatedQuestion& fq, const DataTable& x,
                                               std::size_t cap = kTypeIICandidateCap) {
  auto types = task_types(fq.tokens);
  std::vector<FactType> fill_types;
  if (types.empty()) {
    for (auto t : {FactType::Extreme, FactType::Trend, FactType::Value, FactType::Difference, FactType::Distribution})
      fill_types.push_back(t);
  } else {
    fill_types.push_back(types.front());
  }
  auto mentioned_measures = fq.measures();
  auto measures = mentioned_measures.empty() ? fq.columns_of(ColumnType::Numerical) : mentioned_measures;
  Agg agg = agg_keyword(fq.tokens).value_or(Agg::Sum);
  auto aliases = fq.aliases();

  std::vector<Candidate> out;
  std::set<std::string> seen = {text::normalize(fq.text)};
  for (auto t : fill_types) {
    auto mask = required_fields(t);
    std::vector<std::vector<Measure>> measure_sets;
    if (mask.measures == 0) measure_sets.push_back({});
    if (mask.measures == 1)
      for (const auto& m : measures) measure_sets.push_back({{m, agg}});
    if (mask.measures == 2) {
      auto pool = mentioned_measures.size() >= 2 ? mentioned_measures : fq.columns_of(ColumnType::Numerical);
      if (mentioned_measures.size() == 1) {
        for (const auto& m : fq.columns_of(ColumnType::Numerical))
          if (m != mentioned_measures.front()) measure_sets.push_back({{mentioned_measures.front(), agg}, {m, agg}});
      } else {
        for (std::size_t i = 0; i < pool.size(); ++i)
          for (std::size_t j = i + 1; j < pool.size(); ++j) measure_sets.push_back({{pool[i], agg}, {pool[j], agg}});
      }
    }

    std::vector<std::optional<std::string>> bds;
    if (mask.breakdown == Need::None || mask.breakdown == Need::Optional) bds.push_back(std::nullopt);
    if (mask.breakdown != Need::None) {
      std::vector<std::string> mentioned;
      for (const auto& b : fq.breakdowns())
        if (detail::admissible(fq, t, b)) mentioned.push_back(b);
      for (const auto& [col, v] : fq.values())
        if (detail::admissible(fq, t, col) && std::find(mentioned.begin(), mentioned.end(), col) == mentioned.end())
          mentioned.push_back(col);
      if (!mentioned.empty()) {
        for (const auto& b : mentioned) bds.push_back(b);
      } else if (mask.breakdown == Need::Required) {
        for (const auto& c : detail::admissible_breakdowns(fq, t))
          if (!fq.wide_columns.count(c)) bds.push_back(c);
      }
    }

    for (const auto& ms : measure_sets) {
      for (const auto& bd : bds) {
        if (mask.breakdown == Need::Required && !bd) continue;
        DataFact f = sketch(fq, t);
        f.measures = ms;
        f.breakdown = bd;
        f.subspace = {};
        for (const auto& [col, v] : fq.values())
          if ((!bd || col != *bd) && !std::any_of(f.subspace.filters.begin(), f.subspace.filters.end(),
                                                   [&](const Filter& x) { return x.column == col; }))
            f.subspace.filters.push_back(Filter::equals(col, v));
        if (t == FactType::Difference || t == FactType::Proportion) f.focus.clear();
        auto q = fact_to_question(f, true, &aliases);
        if (!seen.insert(text::normalize(q)).second) continue;
        out.push_back({f, q, 0});
        if (out.size() >= cap) return out;
      }
    }
  }
  (void)x;
  return out;
}

/// Ranks candidates by semantic similarity to the question; ties by the
/// canonical fact form.
inline void rank_candidates(std::vector<Candidate>& cands, std::string_view q, const SimilarityProvider& p) {
  auto qv = checked_encode(p, q);
  for (auto& c : cands) c.score = std::clamp(dot(qv, checked_encode(p, c.question)), -1.0, 1.0);
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return canonical(a.fact) < canonical(b.fact);
  });
}

/// Top-down expansion of a Type-II question into its two most relevant
/// simple readings.
inline SubQuestions decompose_type2(const FormulatedQuestion& fq, const DataTable& x, const SimilarityProvider& p) {
  if (auto r = detail::grouped_view(fq)) return *r;
  if (auto r = detail::overview(fq, x)) return *r;
  auto cands = type2_candidates(fq, x);
  if (cands.empty()) throw DecomposeError("no candidate fills for '" + fq.text + "' on this table");
  // Prefer fills that are simple questions in their own right.
  std::vector<Candidate> simple;
  for (const auto& c : cands)
    if (classify_complexity(formulate(c.question, x)) == QuestionClass::Simple) simple.push_back(c);
  if (!simple.empty()) cands = std::move(simple);
  rank_candidates(cands, fq.text, p);
  if (cands.size() == 1) return {cands[0].question, cands[0].question};
  return {cands[0].question, cands[1].question};
}

inline SubQuestions decompose_type2(const FormulatedQuestion& fq, const DataTable& x) {
  return decompose_type2(fq, x, *make_reference_provider(x));
}

// ---------------------------------------------------------------------------
// Driver

/// A decomposition backend splits one complex question into two.
class Decomposer {
public:
  virtual ~Decomposer() = default;
  virtual std::string name() const = 0;
  virtual SubQuestions split(const FormulatedQuestion& fq, QuestionClass cls, const DataTable& x) const = 0;
};

class RuleDecomposer final : public Decomposer {
public:
  explicit RuleDecomposer(std::shared_ptr<const SimilarityProvider> provider = nullptr)
      : provider_(std::move(provider)) {}

  std::string name() const override { return "rule"; }

  SubQuestions split(const FormulatedQuestion& fq, QuestionClass cls, const DataTable& x) const override {
    auto provider = provider_ ? provider_ : make_reference_provider(x);
    if (cls == QuestionClass::ComplexTypeI) {
      try {
        return decompose_type1(fq);
      } catch (const FrameError&) {
        return decompose_type2(fq, x, *provider);
      }
    }
    return decompose_type2(fq, x, *provider);
  }

private:
  std::shared_ptr<const SimilarityProvider> provider_;
};

struct ResolveOptions {
  std::size_t max_depth = 3;
  const Decomposer* backend = nullptr;            // rule backend when null
  const QuestionClassifier* classifier = nullptr; // rule classifier when null
  std::shared_ptr<const SimilarityProvider> provider;
};

/// Iterative decomposition: classify, split complex nodes in two, recurse
/// until every leaf is simple or the depth bound forces it.
inline DecompositionTree resolve(std::string_view q, const DataTable& x, const ResolveOptions& opt = {}) {
  if (opt.max_depth < 1) throw PreconditionError("max_depth must be at least 1");
  if (text::trim(q).empty()) throw EmptyInput("empty question");
  RuleClassifier rule_classifier;
  const QuestionClassifier& classifier = opt.classifier ? *opt.classifier : rule_classifier;
  auto provider = opt.provider ? opt.provider : make_reference_provider(x);
  RuleDecomposer rule(provider);

  std::function<TreeNode(const std::string&, std::size_t)> build = [&](const std::string& text, std::size_t level) {
    TreeNode node;
    node.question = text;
    auto fq = formulate(text, x);
    node.cls = classifier.complexity(fq);
    if (node.cls == QuestionClass::Simple) return node;
    if (level >= opt.max_depth) {
      node.forced = true;
      return node;
    }
    SubQuestions parts;
    const Decomposer* used = opt.backend ? opt.backend : &rule;
    try {
      parts = used->split(fq, node.cls, x);
      if (text::trim(parts.first).empty() || text::trim(parts.second).empty())
        throw DecomposeError(used->name() + " backend produced an empty sub-question");
    } catch (const Error& first) {
      if (used == &rule) throw DecomposeError(std::string("cannot decompose: ") + first.what());
      used = &rule;
      try {
        parts = rule.split(fq, node.cls, x);
      } catch (const Error& second) {
        throw DecomposeError(std::string("cannot decompose: ") + first.what() + "; " + second.what());
      }
    }
    node.backend = used->name();
    node.children.push_back(build(parts.first, level + 1));
    node.children.push_back(build(parts.second, level + 1));
    return node;
  };
  return build(std::string(q), 0);
}

} // namespace tabqa
