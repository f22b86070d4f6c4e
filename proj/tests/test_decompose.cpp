#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"
#include "tabqa/decompose.hpp"

using namespace tabqa;

namespace {

nlohmann::json load_golden() { return nlohmann::json::parse(fixture::slurp(fixture::golden("decomposition_pairs.json"))); }

/// Slot signature of a question: fact type, mentioned measures,
/// breakdowns, values and complexity. Two phrasings with the same
/// signature ask for the same fact.
std::string signature(const std::string& q, const DataTable& x) {
  auto fq = formulate(q, x);
  nlohmann::json j = {{"type", to_string(classify_fact_type(q))},
                      {"measures", fq.measures()},
                      {"breakdowns", fq.breakdowns()},
                      {"values", fq.values()},
                      {"class", to_string(classify_complexity(fq))}};
  return j.dump();
}

SubQuestions split(const std::string& q, const DataTable& x) {
  auto fq = formulate(q, x);
  return RuleDecomposer().split(fq, classify_complexity(fq), x);
}

class AlwaysComplex final : public QuestionClassifier {
public:
  QuestionClass complexity(const FormulatedQuestion&) const override { return QuestionClass::ComplexTypeII; }
  FactType fact_type(std::string_view q) const override { return classify_fact_type(q); }
};

class BrokenBackend final : public Decomposer {
public:
  explicit BrokenBackend(bool empty) : empty_(empty) {}
  std::string name() const override { return "broken"; }
  SubQuestions split(const FormulatedQuestion&, QuestionClass, const DataTable&) const override {
    if (empty_) return {"", "  "};
    throw DecomposeError("model unavailable");
  }

private:
  bool empty_;
};

/// Splits every question into two suffixed copies.
class EchoBackend final : public Decomposer {
public:
  std::string name() const override { return "echo"; }
  SubQuestions split(const FormulatedQuestion& fq, QuestionClass, const DataTable&) const override {
    return {fq.text + " a", fq.text + " b"};
  }
};

std::set<FactType> leaf_types(const TreeNode& tree) {
  std::set<FactType> out;
  for (const auto* l : leaves(tree)) out.insert(classify_fact_type(l->question));
  return out;
}

} // namespace

TEST(Golden, SixPairsReproduceExactly) {
  const auto& books = fixture::table("books");
  auto g = load_golden();
  ASSERT_EQ(g.size(), 6u);
  for (const auto& e : g) {
    auto [a, b] = split(e["question"], books);
    EXPECT_EQ(a, e["expected"][0].get<std::string>()) << e["method"];
    EXPECT_EQ(b, e["expected"][1].get<std::string>()) << e["method"];
  }
}

TEST(Golden, MatchesReferenceUpToNormalization) {
  const auto& books = fixture::table("books");
  for (const auto& e : load_golden()) {
    auto [a, b] = split(e["question"], books);
    std::vector<std::string> got = {signature(a, books), signature(b, books)};
    std::vector<std::string> want = {signature(e["reference"][0], books), signature(e["reference"][1], books)};
    // An intersection has no natural order between its two halves.
    if (e["method"] == "intersection") {
      std::sort(got.begin(), got.end());
      std::sort(want.begin(), want.end());
    }
    EXPECT_EQ(got, want) << e["method"];
  }
}

TEST(Golden, ComplexityOfEachQuestion) {
  const auto& books = fixture::table("books");
  for (const auto& e : load_golden()) {
    auto cls = classify_complexity(e["question"].get<std::string>(), books);
    bool type1 = e["method"] == "comparison" || e["method"] == "intersection" || e["method"] == "bridging";
    EXPECT_EQ(cls, type1 ? QuestionClass::ComplexTypeI : QuestionClass::ComplexTypeII) << e["method"];
    for (const auto& s : e["expected"])
      EXPECT_EQ(classify_complexity(s.get<std::string>(), books), QuestionClass::Simple) << s;
  }
}

TEST(Resolve, HowIsTheSales) {
  const auto& cars = fixture::table("cars");
  auto tree = resolve("How is the sales?", cars);
  EXPECT_EQ(tree.cls, QuestionClass::ComplexTypeII);
  auto types = leaf_types(tree);
  for (auto t : {FactType::Extreme, FactType::Trend, FactType::Value}) EXPECT_TRUE(types.count(t)) << to_string(t);
  for (const auto* l : leaves(tree)) {
    EXPECT_FALSE(l->forced);
    EXPECT_EQ(classify_complexity(l->question, cars), QuestionClass::Simple) << l->question;
  }
}

TEST(Resolve, BrandTrendTypeOne) {
  const auto& cars = fixture::table("cars");
  auto tree = resolve("does any brand sell a lot and have an increasing trend?", cars);
  EXPECT_EQ(tree.cls, QuestionClass::ComplexTypeI);
  EXPECT_EQ(tree.backend, "rule");
  auto types = leaf_types(tree);
  EXPECT_TRUE(types.count(FactType::Extreme));
  EXPECT_TRUE(types.count(FactType::Trend));
}

TEST(Resolve, SimpleQuestionIsOneLeaf) {
  auto tree = resolve("which brand has the highest sales?", fixture::table("cars"));
  EXPECT_TRUE(tree.children.empty());
  EXPECT_EQ(leaves(tree).size(), 1u);
  EXPECT_EQ(depth(tree), 0u);
}

TEST(Resolve, DepthBoundForcesLeaves) {
  AlwaysComplex c;
  EchoBackend echo;
  ResolveOptions opt;
  opt.classifier = &c;
  opt.backend = &echo;
  auto tree = resolve("which brand has the highest sales?", fixture::table("cars"), opt);
  EXPECT_EQ(depth(tree), 3u);
  EXPECT_EQ(tree.backend, "echo");
  auto ls = leaves(tree);
  EXPECT_EQ(ls.size(), 8u);
  for (const auto* l : ls) EXPECT_TRUE(l->forced);
}

TEST(Resolve, LeafAnswerability) {
  const auto& books = fixture::table("books");
  for (const auto& e : load_golden()) {
    auto tree = resolve(e["question"].get<std::string>(), books);
    for (const auto* l : leaves(tree)) {
      if (l->forced) continue;
      EXPECT_EQ(classify_complexity(l->question, books), QuestionClass::Simple);
      auto t = classify_fact_type(l->question);
      auto mask = required_fields(t);
      EXPECT_LE(static_cast<std::size_t>(mask.measures), books.columns_of(ColumnType::Numerical).size());
    }
  }
}

TEST(Resolve, BrokenBackendFallsBackToRules) {
  const auto& cars = fixture::table("cars");
  for (bool empty : {false, true}) {
    BrokenBackend b(empty);
    ResolveOptions opt;
    opt.backend = &b;
    auto tree = resolve("How is the sales?", cars, opt);
    EXPECT_EQ(tree.backend, "rule");
    EXPECT_EQ(tree.children.size(), 2u);
  }
}

TEST(Resolve, Errors) {
  const auto& cars = fixture::table("cars");
  EXPECT_THROW(resolve("  ", cars), EmptyInput);
  ResolveOptions opt;
  opt.max_depth = 0;
  EXPECT_THROW(resolve("How is the sales?", cars, opt), PreconditionError);
  auto words = load_table("a,b\nx,y\nz,w\n", "words");
  EXPECT_THROW(resolve("tell me something", words), DecomposeError);
}

TEST(Resolve, TreeJsonRoundTrip) {
  auto tree = resolve("How is the sales?", fixture::table("cars"));
  auto again = tree_from_json(to_json(tree));
  EXPECT_EQ(to_json(again), to_json(tree));
}

TEST(TypeOne, NoFrameThrowsFrameError) {
  auto fq = formulate("which genre is an outlier?", fixture::table("books"));
  EXPECT_THROW(decompose_type1(fq), FrameError);
  auto parts = RuleDecomposer().split(fq, QuestionClass::ComplexTypeI, fixture::table("books"));
  EXPECT_FALSE(parts.first.empty());
}

TEST(TypeOne, ConjunctionAndComparisonFrames) {
  const auto& books = fixture::table("books");
  auto [a, b] = decompose_type1(formulate("which genre has the highest price and what is the trend of reviews over year?", books));
  EXPECT_EQ(classify_fact_type(a), FactType::Extreme);
  EXPECT_EQ(classify_fact_type(b), FactType::Trend);
}

TEST(TypeTwo, TopTwoMatchExhaustiveScoring) {
  const auto& books = fixture::table("books");
  auto p = make_reference_provider(books);
  for (std::string q : {"Which genre of book is an outlier compare with other books?", "which year has anomaly?",
                        "what is the correlation with price?", "which genre ranks first?"}) {
    auto fq = formulate(q, books);
    auto cands = type2_candidates(fq, books, 1000);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& c : cands) {
      if (classify_complexity(c.question, books) != QuestionClass::Simple) continue;
      scored.push_back({semantic_sim(q, c.question, *p), canonical(c.fact) + "\n" + c.question});
    }
    ASSERT_GE(scored.size(), 1u) << q;
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (std::abs(a.first - b.first) > 1e-12) return a.first > b.first;
      return a.second < b.second;
    });
    auto text_of = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
    auto [first, second] = decompose_type2(fq, books, *p);
    EXPECT_EQ(first, text_of(scored[0].second)) << q;
    EXPECT_EQ(second, text_of(scored[std::min<std::size_t>(1, scored.size() - 1)].second)) << q;
  }
}

TEST(TypeTwo, CandidatesRespectCap) {
  auto fq = formulate("show me something", fixture::table("movies"));
  EXPECT_LE(type2_candidates(fq, fixture::table("movies")).size(), kTypeIICandidateCap);
}
