#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tabqa/fact.hpp"
#include "tabqa/similarity.hpp"
#include "tabqa/table.hpp"
#include "tabqa/templates.hpp"
#include "tabqa/text.hpp"

namespace tabqa {

enum class QuestionClass { Simple, ComplexTypeI, ComplexTypeII };

inline std::string to_string(QuestionClass c) {
  switch (c) {
    case QuestionClass::Simple: return "simple";
    case QuestionClass::ComplexTypeI: return "type-1";
    case QuestionClass::ComplexTypeII: return "type-2";
  }
  return "simple";
}

inline QuestionClass question_class_from_string(std::string_view s) {
  for (auto c : {QuestionClass::Simple, QuestionClass::ComplexTypeI, QuestionClass::ComplexTypeII})
    if (to_string(c) == s) return c;
  throw SchemaError("unknown question class '" + std::string(s) + "'");
}

inline constexpr std::size_t kMaxQuestionTokens = 60;

// ---------------------------------------------------------------------------
// Lexicons

namespace lex {

enum class Match { Prefix, Word, Phrase };

struct Keyword {
  FactType type;
  std::string_view text;
  Match match;
};

// clang-format off
inline constexpr std::array kTaskKeywords = {
  Keyword{FactType::Trend, "trend", Match::Prefix},
  Keyword{FactType::Trend, "over time", Match::Phrase},
  Keyword{FactType::Trend, "chang", Match::Prefix},
  Keyword{FactType::Extreme, "highest", Match::Word},
  Keyword{FactType::Extreme, "lowest", Match::Word},
  Keyword{FactType::Extreme, "most", Match::Word},
  Keyword{FactType::Extreme, "least", Match::Word},
  Keyword{FactType::Extreme, "max", Match::Word},
  Keyword{FactType::Extreme, "min", Match::Word},
  Keyword{FactType::Extreme, "maximum", Match::Word},
  Keyword{FactType::Extreme, "minimum", Match::Word},
  Keyword{FactType::Extreme, "largest", Match::Word},
  Keyword{FactType::Extreme, "smallest", Match::Word},
  Keyword{FactType::Extreme, "biggest", Match::Word},
  Keyword{FactType::Extreme, "fewest", Match::Word},
  Keyword{FactType::Extreme, "a lot", Match::Phrase},
  Keyword{FactType::Extreme, "higher than average", Match::Phrase},
  Keyword{FactType::Extreme, "lower than average", Match::Phrase},
  Keyword{FactType::Extreme, "above average", Match::Phrase},
  Keyword{FactType::Extreme, "below average", Match::Phrase},
  Keyword{FactType::Distribution, "distribut", Match::Prefix},
  Keyword{FactType::Distribution, "spread", Match::Word},
  Keyword{FactType::Proportion, "proportion", Match::Prefix},
  Keyword{FactType::Proportion, "percent", Match::Prefix},
  Keyword{FactType::Proportion, "share", Match::Word},
  Keyword{FactType::Rank, "rank", Match::Prefix},
  Keyword{FactType::Rank, "order", Match::Word},
  Keyword{FactType::Rank, "top", Match::Word},
  Keyword{FactType::Association, "correlat", Match::Prefix},
  Keyword{FactType::Association, "relationship", Match::Prefix},
  Keyword{FactType::Association, "related", Match::Word},
  Keyword{FactType::Outlier, "outlier", Match::Prefix},
  Keyword{FactType::Outlier, "anomal", Match::Prefix},
  Keyword{FactType::Outlier, "unusual", Match::Prefix},
  Keyword{FactType::Difference, "differenc", Match::Prefix},
  Keyword{FactType::Difference, "compar", Match::Prefix},
  Keyword{FactType::Difference, "versus", Match::Word},
  Keyword{FactType::Difference, "vs", Match::Word},
  Keyword{FactType::Difference, "gap", Match::Word},
  Keyword{FactType::Categorization, "categories", Match::Word},
  Keyword{FactType::Categorization, "kinds", Match::Word},
  Keyword{FactType::Categorization, "types of", Match::Phrase},
  Keyword{FactType::Value, "total", Match::Word},
  Keyword{FactType::Value, "how many", Match::Phrase},
  Keyword{FactType::Value, "how much", Match::Phrase},
  Keyword{FactType::Value, "overall", Match::Word},
};

/// Tie-break order for fact-type scoring (earlier wins).
inline constexpr std::array kTypePriority = {
  FactType::Extreme, FactType::Trend, FactType::Outlier, FactType::Rank, FactType::Proportion,
  FactType::Distribution, FactType::Association, FactType::Difference, FactType::Categorization,
  FactType::Value,
};

struct Synonym {
  std::string_view word;
  std::array<std::string_view, 2> stems;
  int polarity;
};

inline constexpr std::array kMeasureSynonyms = {
  Synonym{"expensive", {"price", "cost"}, 1},
  Synonym{"costly", {"price", "cost"}, 1},
  Synonym{"pricey", {"price", "cost"}, 1},
  Synonym{"cheap", {"price", "cost"}, -1},
  Synonym{"cheaper", {"price", "cost"}, -1},
  Synonym{"cheapest", {"price", "cost"}, -1},
  Synonym{"affordable", {"price", "cost"}, -1},
  Synonym{"regarded", {"review", "rating"}, 1},
  Synonym{"popular", {"review", "sale"}, 1},
  Synonym{"rated", {"rating", "review"}, 1},
  Synonym{"sell", {"sale", "revenue"}, 0},
  Synonym{"sells", {"sale", "revenue"}, 0},
  Synonym{"selling", {"sale", "revenue"}, 0},
  Synonym{"sold", {"sale", "revenue"}, 0},
  Synonym{"bestselling", {"sale", "revenue"}, 1},
  Synonym{"profitable", {"profit", ""}, 1},
  Synonym{"lucrative", {"profit", "gross"}, 1},
};
// clang-format on

inline constexpr std::array<std::string_view, 10> kHighWords = {
    "highest", "most", "max", "maximum", "largest", "biggest", "best", "higher", "more", "top"};
inline constexpr std::array<std::string_view, 9> kLowWords = {
    "lowest", "least", "min", "minimum", "smallest", "fewest", "worst", "lower", "less"};

/// Words never matched fuzzily against column names or values.
inline bool is_reserved(std::string_view tok) {
  static const std::set<std::string, std::less<>> words = {
      "what", "which", "when", "where", "does", "have", "with", "that", "this", "from", "over", "each",
      "every", "than", "there", "their", "about", "some", "show", "please", "list", "average", "mean",
      "number", "count", "value", "values", "overall", "total", "order", "trend", "trends", "highest",
      "lowest", "most", "least", "higher", "lower", "largest", "smallest", "share", "spread", "rank",
      "ranking", "outlier", "outliers", "anomaly", "among", "between", "different", "difference",
      "differences", "compare", "categories", "category", "kinds", "types", "information", "other",
      "others", "much", "many", "increasing", "decreasing", "change", "changes", "related", "versus",
      "distribution", "proportion", "percentage", "correlation", "relationship", "unusual", "maximum",
      "minimum", "biggest", "fewest", "years", "time", "data"};
  return words.count(tok) > 0;
}

inline bool phrase_at(const std::vector<std::string>& toks, std::size_t i, std::string_view phrase) {
  auto words = text::tokenize(phrase);
  if (i + words.size() > toks.size()) return false;
  for (std::size_t k = 0; k < words.size(); ++k)
    if (toks[i + k] != words[k]) return false;
  return true;
}

} // namespace lex

/// A keyword occurrence at token position `pos`.
struct KeywordHit {
  FactType type;
  std::size_t pos;
  std::size_t len;
};

namespace detail {

/// "compare ... with other X" names a reference set, not a comparison task.
inline bool reference_frame(const std::vector<std::string>& toks, std::size_t i) {
  for (std::size_t k = i + 1; k < std::min(toks.size(), i + 4); ++k)
    if (toks[k] == "other" || toks[k] == "others" || toks[k] == "rest") return true;
  return false;
}

} // namespace detail

inline std::vector<KeywordHit> keyword_hits(const std::vector<std::string>& toks) {
  std::vector<KeywordHit> hits;
  std::vector<bool> used(toks.size(), false);
  // Phrases first so their words are not counted twice.
  for (const auto& kw : lex::kTaskKeywords) {
    if (kw.match != lex::Match::Phrase) continue;
    std::size_t n = text::tokenize(kw.text).size();
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      if (!lex::phrase_at(toks, i, kw.text)) continue;
      bool clash = false;
      for (std::size_t k = i; k < i + n; ++k) clash = clash || used[k];
      if (clash) continue;
      for (std::size_t k = i; k < i + n; ++k) used[k] = true;
      hits.push_back({kw.type, i, n});
    }
  }
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (used[i]) continue;
    for (const auto& kw : lex::kTaskKeywords) {
      bool ok = kw.match == lex::Match::Word     ? toks[i] == kw.text
                : kw.match == lex::Match::Prefix ? text::starts_with(toks[i], kw.text)
                                                 : false;
      if (!ok) continue;
      if (kw.type == FactType::Difference && kw.text == "compar" && detail::reference_frame(toks, i)) continue;
      hits.push_back({kw.type, i, 1});
      used[i] = true;
      break;
    }
  }
  std::sort(hits.begin(), hits.end(), [](const KeywordHit& a, const KeywordHit& b) { return a.pos < b.pos; });
  return hits;
}

/// Fact types whose keywords occur. `value` is only reported when nothing
/// else is, since "overall"/"total" also qualify other tasks.
inline std::vector<FactType> task_types(const std::vector<std::string>& toks) {
  std::vector<FactType> out;
  bool value = false;
  for (const auto& h : keyword_hits(toks)) {
    if (h.type == FactType::Value) {
      value = true;
      continue;
    }
    if (std::find(out.begin(), out.end(), h.type) == out.end()) out.push_back(h.type);
  }
  if (out.empty() && value) out.push_back(FactType::Value);
  return out;
}

/// Keyword-scoring fact-type classifier: most hits wins, ties by priority,
/// no hits means value.
inline FactType classify_fact_type(std::string_view q) {
  auto toks = text::tokenize(q);
  std::map<FactType, int> score;
  for (const auto& h : keyword_hits(toks)) ++score[h.type];
  FactType best = FactType::Value;
  int best_score = 0;
  for (auto t : lex::kTypePriority) {
    if (score[t] > best_score) {
      best = t;
      best_score = score[t];
    }
  }
  return best;
}

/// -1 for "lowest"-like wording, +1 for "highest"-like, 0 when absent.
inline int polarity_of(const std::vector<std::string>& toks) {
  for (const auto& t : toks) {
    if (std::find(lex::kLowWords.begin(), lex::kLowWords.end(), t) != lex::kLowWords.end()) return -1;
    if (std::find(lex::kHighWords.begin(), lex::kHighWords.end(), t) != lex::kHighWords.end()) return 1;
  }
  return 0;
}

/// Aggregation requested by wording, if any. "than average" and
/// "above/below average" describe thresholds, not a mean.
inline std::optional<Agg> agg_keyword(const std::vector<std::string>& toks) {
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t == "average" || t == "mean") {
      bool threshold = i > 0 && (toks[i - 1] == "than" || toks[i - 1] == "above" || toks[i - 1] == "below");
      if (!threshold) return Agg::Mean;
    }
    if (t == "count" || lex::phrase_at(toks, i, "number of")) return Agg::Count;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Formulation

enum class MentionKind { Column, Value, Entity, Synonym };

inline std::string to_string(MentionKind k) {
  switch (k) {
    case MentionKind::Column: return "column";
    case MentionKind::Value: return "value";
    case MentionKind::Entity: return "entity";
    case MentionKind::Synonym: return "synonym";
  }
  return "column";
}

/// Token span [begin, end) referring to a column or to a cell value of it.
struct Mention {
  std::size_t begin = 0, end = 0;
  MentionKind kind = MentionKind::Column;
  std::string column;
  std::string value;  // cell value for Value mentions
  int polarity = 0;   // synonym mentions: +1 high, -1 low
  bool fuzzy = false;
};

struct SchemaColumn {
  std::string name;
  ColumnType type;
};

struct FormulatedQuestion {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<SchemaColumn> schema;
  std::vector<Mention> mentions;
  /// Columns whose distinct-value count exceeds the search cap.
  std::set<std::string> wide_columns;

  std::optional<ColumnType> type_of(std::string_view column) const {
    for (const auto& c : schema)
      if (c.name == column) return c.type;
    return std::nullopt;
  }

  std::vector<std::string> columns_of(ColumnType t) const {
    std::vector<std::string> out;
    for (const auto& c : schema)
      if (c.type == t) out.push_back(c.name);
    return out;
  }

  /// Schema tokens grouped under "<N>", "<T>", "<C>" markers; column names
  /// lowercased with spaces joined by underscores.
  std::vector<std::string> schema_tokens() const {
    std::vector<std::string> out;
    for (auto t : {ColumnType::Numerical, ColumnType::Temporal, ColumnType::Categorical}) {
      out.push_back(type_marker(t));
      for (const auto& c : schema) {
        if (c.type != t) continue;
        out.push_back(text::join(text::tokenize(c.name), "_"));
      }
    }
    return out;
  }

  /// Question words then schema tokens, at most 60 tokens overall; question
  /// words are dropped from the end first.
  std::vector<std::string> serialized_tokens() const {
    auto schema_part = schema_tokens();
    std::size_t room = schema_part.size() >= kMaxQuestionTokens ? 0 : kMaxQuestionTokens - schema_part.size();
    std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<long>(std::min(room, tokens.size())));
    out.insert(out.end(), schema_part.begin(), schema_part.end());
    return out;
  }

  std::string serialize() const { return text::join(serialized_tokens(), " "); }

  /// Mentioned numerical columns in order of first appearance.
  std::vector<std::string> measures() const {
    std::vector<std::string> out;
    for (const auto& m : mentions) {
      if (m.kind == MentionKind::Value || m.kind == MentionKind::Entity) continue;
      if (type_of(m.column) != ColumnType::Numerical) continue;
      if (std::find(out.begin(), out.end(), m.column) == out.end()) out.push_back(m.column);
    }
    return out;
  }

  /// Mentioned temporal/categorical columns (by name or as the entity asked
  /// about), in order of first appearance.
  std::vector<std::string> breakdowns() const {
    std::vector<std::string> out;
    for (const auto& m : mentions) {
      if (m.kind != MentionKind::Column && m.kind != MentionKind::Entity) continue;
      if (type_of(m.column) == ColumnType::Numerical) continue;
      if (std::find(out.begin(), out.end(), m.column) == out.end()) out.push_back(m.column);
    }
    return out;
  }

  std::vector<std::pair<std::string, std::string>> values() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& m : mentions) {
      if (m.kind != MentionKind::Value) continue;
      std::pair<std::string, std::string> v{m.column, m.value};
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
  }

  /// Display words for columns the question referred to by entity name.
  Aliases aliases() const {
    Aliases a;
    for (const auto& m : mentions)
      if (m.kind == MentionKind::Entity) a[m.column] = text::join(std::vector<std::string>(tokens.begin() + static_cast<long>(m.begin), tokens.begin() + static_cast<long>(m.end)), " ");
    return a;
  }

  int synonym_polarity() const {
    for (const auto& m : mentions)
      if (m.kind == MentionKind::Synonym && m.polarity) return m.polarity;
    return 0;
  }
};

inline nlohmann::json to_json(const FormulatedQuestion& fq) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const auto& m : fq.mentions) {
    nlohmann::json j = {{"begin", m.begin}, {"end", m.end}, {"kind", to_string(m.kind)}, {"column", m.column}};
    if (m.kind == MentionKind::Value) j["value"] = m.value;
    if (m.polarity) j["polarity"] = m.polarity;
    if (m.fuzzy) j["fuzzy"] = true;
    mentions.push_back(j);
  }
  return {{"tokens", fq.tokens}, {"schema_tokens", fq.schema_tokens()}, {"mentions", mentions},
          {"serialized", fq.serialize()}};
}

namespace detail {

struct Candidate {
  std::vector<std::string> words;
  MentionKind kind;
  std::string column;
  std::string value;
};

inline bool words_at(const std::vector<std::string>& toks, std::size_t i, const std::vector<std::string>& words) {
  if (words.empty() || i + words.size() > toks.size()) return false;
  for (std::size_t k = 0; k < words.size(); ++k)
    if (toks[i + k] != words[k]) return false;
  return true;
}

/// Plural-insensitive single-token comparison.
inline bool same_word(const std::string& a, const std::string& b) {
  return a == b || text::normalize(a) == text::normalize(b);
}

inline bool is_query_word(const std::string& t) {
  return t == "which" || t == "what" || t == "each" || t == "every" || t == "per" || t == "by" || t == "any";
}

} // namespace detail

inline constexpr std::size_t kDefaultCardinalityCap = 20;

/// Tokenizes the question, attaches the schema and finds column, value,
/// entity and measure-synonym mentions. Longer exact matches win; fuzzy
/// matching (edit distance <= 2) is only tried for tokens of 4+ characters.
inline FormulatedQuestion formulate(std::string_view q, const DataTable& x,
                                    std::size_t cardinality_cap = kDefaultCardinalityCap) {
  FormulatedQuestion fq;
  fq.text = std::string(q);
  fq.tokens = text::tokenize(q);
  for (const auto& c : x.columns()) {
    fq.schema.push_back({c.name, c.type});
    if (c.type == ColumnType::Categorical && x.cardinality(c.name) > cardinality_cap) fq.wide_columns.insert(c.name);
  }
  const auto& toks = fq.tokens;

  std::vector<detail::Candidate> cands;
  for (const auto& c : x.columns()) cands.push_back({text::tokenize(c.name), MentionKind::Column, c.name, {}});
  for (const auto& c : x.columns()) {
    if (c.type != ColumnType::Categorical) continue;
    for (const auto& v : x.distinct(c.name)) cands.push_back({text::tokenize(v), MentionKind::Value, c.name, v});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    if (a.words.size() != b.words.size()) return a.words.size() > b.words.size();
    return a.kind == MentionKind::Column && b.kind != MentionKind::Column;
  });

  std::vector<bool> used(toks.size(), false);
  auto claim = [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      if (used[k]) return false;
    for (std::size_t k = b; k < e; ++k) used[k] = true;
    return true;
  };

  // Exact matches, multi-token first.
  for (const auto& c : cands) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      bool hit = c.words.size() == 1 ? (toks[i] == c.words[0] || (c.kind == MentionKind::Column && detail::same_word(toks[i], c.words[0])))
                                     : detail::words_at(toks, i, c.words);
      if (hit && claim(i, i + c.words.size())) fq.mentions.push_back({i, i + c.words.size(), c.kind, c.column, c.value});
    }
  }

  // Measure synonyms.
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (used[i]) continue;
    for (const auto& s : lex::kMeasureSynonyms) {
      if (toks[i] != s.word) continue;
      std::string column;
      for (auto stem : s.stems) {
        if (stem.empty()) continue;
        for (const auto& c : x.columns()) {
          if (c.type != ColumnType::Numerical) continue;
          for (const auto& w : text::tokenize(c.name))
            if (text::starts_with(w, stem)) column = c.name;
          if (!column.empty()) break;
        }
        if (!column.empty()) break;
      }
      if (column.empty()) continue;
      int polarity = s.polarity;
      if (polarity == 0) {
        for (std::size_t k = i + 1; k < std::min(toks.size(), i + 4); ++k) {
          if (lex::phrase_at(toks, k, "a lot") || toks[k] == "well" || toks[k] == "most") polarity = 1;
          if (toks[k] == "little" || toks[k] == "poorly" || toks[k] == "least") polarity = -1;
        }
      }
      std::size_t b = i;
      if (s.word == "regarded" && i > 0 && toks[i - 1] == "well" && !used[i - 1]) b = i - 1;
      if (s.word == "rated" && i > 0 && toks[i - 1] == "highly" && !used[i - 1]) b = i - 1;
      if (claim(b, i + 1)) fq.mentions.push_back({b, i + 1, MentionKind::Synonym, column, {}, polarity});
      break;
    }
  }

  // Table-name entity ("book" in a "books" table) stands for the widest
  // categorical column.
  {
    std::string entity;
    std::size_t best = 0;
    for (const auto& c : x.columns()) {
      if (c.type != ColumnType::Categorical) continue;
      std::size_t card = x.cardinality(c.name);
      if (card > best) {
        best = card;
        entity = c.name;
      }
    }
    auto names = text::tokenize(x.name());
    if (!entity.empty() && names.size() == 1) {
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (used[i] || !detail::same_word(toks[i], names[0])) continue;
        if (i == 0 || !detail::is_query_word(toks[i - 1])) continue;
        if (claim(i, i + 1)) fq.mentions.push_back({i, i + 1, MentionKind::Entity, entity, {}});
      }
    }
  }

  // Fuzzy single-token matches.
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (used[i] || toks[i].size() < 4 || lex::is_reserved(toks[i])) continue;
    const detail::Candidate* best = nullptr;
    std::size_t best_d = 3;
    for (const auto& c : cands) {
      if (c.words.size() != 1 || c.words[0].size() < 4) continue;
      std::size_t d = levenshtein(toks[i], c.words[0]);
      if (d < best_d) {
        best_d = d;
        best = &c;
      }
    }
    if (best && claim(i, i + 1)) {
      Mention m{i, i + 1, best->kind, best->column, best->value};
      m.fuzzy = true;
      fq.mentions.push_back(m);
    }
  }

  std::sort(fq.mentions.begin(), fq.mentions.end(),
            [](const Mention& a, const Mention& b) { return a.begin < b.begin; });
  return fq;
}

// ---------------------------------------------------------------------------
// Complexity

namespace detail {

/// Positions of "and" joining clauses: not inside a mention and not the
/// "and" closing a "between A and B" span.
inline std::vector<std::size_t> conjunctions(const FormulatedQuestion& fq) {
  std::vector<std::size_t> out;
  std::vector<bool> in_mention(fq.tokens.size(), false);
  for (const auto& m : fq.mentions)
    for (std::size_t k = m.begin; k < m.end; ++k) in_mention[k] = true;
  bool open_between = false;
  for (std::size_t i = 0; i < fq.tokens.size(); ++i) {
    if (fq.tokens[i] == "between") open_between = true;
    if (fq.tokens[i] != "and" || in_mention[i]) continue;
    if (open_between) {
      open_between = false;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

inline bool bridging_frame(const FormulatedQuestion& fq) {
  const auto& t = fq.tokens;
  if (t.size() < 4 || t[0] != "in" || t[1] != "the") return false;
  if (fq.text.find(',') == std::string::npos) return false;
  auto with = std::find(t.begin(), t.end(), "with");
  if (with == t.end() || with + 1 == t.end()) return false;
  std::vector<std::string> rest(with + 1, t.end());
  return polarity_of({rest.begin(), rest.begin() + std::min<long>(2, static_cast<long>(rest.size()))}) != 0;
}

inline bool compare_frame(const FormulatedQuestion& fq) {
  const auto& t = fq.tokens;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!text::starts_with(t[i], "compar") || reference_frame(t, i)) continue;
    for (std::size_t k = i + 1; k < t.size(); ++k)
      if (t[k] == "and") return true;
  }
  return false;
}

/// Columns usable as breakdown for `t`, ignoring the search cardinality cap.
inline std::vector<std::string> admissible_breakdowns(const FormulatedQuestion& fq, FactType t) {
  std::vector<std::string> out;
  for (const auto& c : fq.schema)
    if (breakdown_admissible(t, c.type)) out.push_back(c.name);
  return out;
}

} // namespace detail

/// Required slots of `t` the question leaves open. A slot is open only when
/// it is unmentioned and the table offers more than one way to fill it; a
/// slot the table cannot fill at all is left to search to report.
inline std::vector<std::string> missing_slots(const FormulatedQuestion& fq, FactType t) {
  std::vector<std::string> out;
  auto mask = required_fields(t);
  auto measures = fq.measures();
  auto numeric = fq.columns_of(ColumnType::Numerical);
  if (static_cast<int>(measures.size()) < mask.measures && static_cast<int>(numeric.size()) > mask.measures)
    out.push_back("measure");
  if (mask.breakdown == Need::Required) {
    auto admissible = detail::admissible_breakdowns(fq, t);
    bool mentioned = false;
    for (const auto& b : fq.breakdowns())
      mentioned = mentioned || std::find(admissible.begin(), admissible.end(), b) != admissible.end();
    for (const auto& [col, v] : fq.values())
      mentioned = mentioned || std::find(admissible.begin(), admissible.end(), col) != admissible.end();
    if (!mentioned && admissible.size() > 1) out.push_back("breakdown");
  }
  return out;
}

/// Rule-based three-way decision (the trainable classifier seam).
inline QuestionClass classify_complexity(const FormulatedQuestion& fq) {
  auto types = task_types(fq.tokens);
  if (types.size() >= 2 || detail::bridging_frame(fq) || detail::compare_frame(fq) ||
      !detail::conjunctions(fq).empty())
    return QuestionClass::ComplexTypeI;
  if (types.empty()) return QuestionClass::ComplexTypeII;
  if (!missing_slots(fq, types.front()).empty()) return QuestionClass::ComplexTypeII;
  return QuestionClass::Simple;
}

inline QuestionClass classify_complexity(std::string_view q, const DataTable& x) {
  return classify_complexity(formulate(q, x));
}

/// Pluggable classifier seam.
class QuestionClassifier {
public:
  virtual ~QuestionClassifier() = default;
  virtual QuestionClass complexity(const FormulatedQuestion& fq) const = 0;
  virtual FactType fact_type(std::string_view q) const = 0;
};

class RuleClassifier final : public QuestionClassifier {
public:
  QuestionClass complexity(const FormulatedQuestion& fq) const override { return classify_complexity(fq); }
  FactType fact_type(std::string_view q) const override { return classify_fact_type(q); }
};

// ---------------------------------------------------------------------------
// Slot filling

/// Partial fact read off the question's mentions for a given type. Slots the
/// table determines uniquely are filled even when unmentioned.
inline DataFact sketch(const FormulatedQuestion& fq, FactType t) {
  DataFact f;
  f.type = t;
  auto mask = required_fields(t);
  Agg agg = agg_keyword(fq.tokens).value_or(Agg::Sum);

  auto measures = fq.measures();
  auto numeric = fq.columns_of(ColumnType::Numerical);
  if (static_cast<int>(measures.size()) < mask.measures && static_cast<int>(numeric.size()) == mask.measures)
    measures = numeric;
  for (int i = 0; i < mask.measures && i < static_cast<int>(measures.size()); ++i)
    f.measures.push_back({measures[static_cast<std::size_t>(i)], agg});

  if (mask.breakdown != Need::None) {
    auto admissible = detail::admissible_breakdowns(fq, t);
    auto ok = [&](const std::string& c) { return std::find(admissible.begin(), admissible.end(), c) != admissible.end(); };
    for (const auto& b : fq.breakdowns())
      if (!f.breakdown && ok(b)) f.breakdown = b;
    if (!f.breakdown && mask.breakdown == Need::Required) {
      for (const auto& [col, v] : fq.values())
        if (!f.breakdown && ok(col)) f.breakdown = col;
    }
    if (!f.breakdown && mask.breakdown == Need::Required && admissible.size() == 1) f.breakdown = admissible.front();
  }

  std::vector<std::string> focus_values;
  std::set<std::string> filtered;
  for (const auto& [col, v] : fq.values()) {
    if (f.breakdown && col == *f.breakdown) {
      focus_values.push_back(v);
      continue;
    }
    if (filtered.insert(col).second) f.subspace.filters.push_back(Filter::equals(col, v));
  }

  switch (t) {
    case FactType::Extreme: {
      bool above = false, below = false;
      for (std::size_t i = 0; i < fq.tokens.size(); ++i) {
        above = above || lex::phrase_at(fq.tokens, i, "higher than average") || lex::phrase_at(fq.tokens, i, "above average");
        below = below || lex::phrase_at(fq.tokens, i, "lower than average") || lex::phrase_at(fq.tokens, i, "below average");
      }
      if (above || below) {
        f.focus.push_back({"", above ? FocusRole::AboveAverage : FocusRole::BelowAverage});
      } else {
        int p = polarity_of(fq.tokens);
        if (p == 0) p = fq.synonym_polarity();
        f.focus.push_back({"", p < 0 ? FocusRole::Min : FocusRole::Max});
      }
      break;
    }
    case FactType::Difference:
      if (focus_values.size() >= 2) f.focus = {{focus_values[0], FocusRole::Item}, {focus_values[1], FocusRole::Item}};
      break;
    case FactType::Proportion:
      if (!focus_values.empty()) f.focus = {{focus_values[0], FocusRole::Item}};
      break;
    default: break;
  }
  return f;
}

/// Renders a sketch: focus placeholders (empty keys) only steer wording.
inline std::string sketch_question(const DataFact& f, const Aliases* aliases = nullptr) {
  return fact_to_question(f, true, aliases);
}

} // namespace tabqa
