#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "tabqa/corpus.hpp"

using namespace tabqa;
using namespace tabqa::corpus;

namespace {

std::vector<const DataTable*> fixtures() {
  return {&fixture::table("books"), &fixture::table("cars"), &fixture::table("movies"), &fixture::table("shop")};
}

const Corpus& default_corpus() {
  static const Corpus c = generate(fixtures());
  return c;
}

} // namespace

TEST(Bleu, IdentityAndZeroOverlap) {
  EXPECT_DOUBLE_EQ(bleu("which genre has the highest price", {"which genre has the highest price"}), 1.0);
  EXPECT_DOUBLE_EQ(bleu("alpha beta", {"gamma delta"}), 0.0);
  EXPECT_THROW(bleu("", {"x"}), PreconditionError);
  EXPECT_THROW(bleu("x", {}), PreconditionError);
}

TEST(Bleu, BrevityPenalty) {
  // All n-gram precisions are 1; only the brevity penalty applies.
  EXPECT_NEAR(bleu("the cat sat", {"the cat sat down"}), std::exp(1.0 - 4.0 / 3.0), 1e-12);
  EXPECT_NEAR(bleu("the cat sat", {"the cat sat down", "the cat sat"}), 1.0, 1e-12);
}

TEST(Bleu, ClippedPrecision) {
  // unigram 2/4 after clipping "the", bigram 1/3, trigram 0
  EXPECT_DOUBLE_EQ(bleu("the the the cat", {"the cat"}), 0.0);
  // "a b c d" vs "a b c e": p4 = 0
  EXPECT_DOUBLE_EQ(bleu("a b c d", {"a b c e"}), 0.0);
  // three tokens cap the order at 3: p1 = 2/3, p2 = 1/2, p3 = 0
  EXPECT_DOUBLE_EQ(bleu("x y z", {"x y w"}), 0.0);
  // two tokens, order 2: p1 = 1/2, p2 = 0
  EXPECT_DOUBLE_EQ(bleu("x q", {"x y"}), 0.0);
  // p1 = 4/5, p2 = 3/4, p3 = 2/3, p4 = 1/2, equal lengths
  EXPECT_NEAR(bleu("a b c d e", {"a b c d f"}), std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25), 1e-12);
}

TEST(MeteorLite, BoundsAndStems) {
  EXPECT_DOUBLE_EQ(meteor_lite("the brand sales", "the brand sales"), 1.0);
  EXPECT_DOUBLE_EQ(meteor_lite("alpha", "beta"), 0.0);
  double partial = meteor_lite("which brand sells", "which brand sold most");
  EXPECT_GT(partial, 0.0);
  EXPECT_LT(partial, 1.0);
  // P = 1, R = 1/2: 10PR/(R+9P) = 5/9.5
  EXPECT_NEAR(meteor_lite("brand sales", "brand sales are high"), 5.0 / 9.5, 1e-12);
  EXPECT_DOUBLE_EQ(meteor_lite("brands", "brand"), 1.0);
  EXPECT_THROW(meteor_lite("", "x"), PreconditionError);
}

TEST(ValidatePair, CopyShortAndAccept) {
  auto p = make_reference_provider(fixture::table("books"));
  auto q = "which genre has the highest price and the lowest reviews?";
  auto copy = validate_pair(q, q, *p);
  EXPECT_FALSE(copy.accepted);
  EXPECT_EQ(copy.reason, "copy");
  EXPECT_NEAR(copy.score, 0.0, 1e-9);
  auto short_one = validate_pair(q, "genre price", *p);
  EXPECT_FALSE(short_one.accepted);
  EXPECT_EQ(short_one.reason, "too-short");
  auto other = validate_pair(q, "tell me about the weather today please", *p);
  EXPECT_FALSE(other.accepted);
  EXPECT_EQ(other.reason, "meaning-changed");
}

TEST(ValidatePair, RejectsCopiesOfEveryEntry) {
  std::map<std::string, std::shared_ptr<const SimilarityProvider>> providers;
  for (const auto* t : fixtures()) providers[t->name()] = make_reference_provider(*t);
  for (const auto& e : default_corpus().entries) {
    auto v = validate_pair(e.template_question, e.template_question, *providers.at(e.table_id));
    ASSERT_FALSE(v.accepted) << e.template_question;
  }
}

TEST(Combos, EveryMethodHasCombinations) {
  const auto& books = fixture::table("books");
  for (auto m : kAllMethods) {
    auto combos = enumerate_combos(books, m);
    EXPECT_FALSE(combos.empty()) << to_string(m);
    for (const auto& c : combos) {
      EXPECT_TRUE(validate_fact(c.first, books).empty()) << to_string(m) << " " << canonical(c.first);
      EXPECT_TRUE(validate_fact(c.second, books).empty()) << to_string(m) << " " << canonical(c.second);
    }
  }
}

TEST(Render, ComplexAndSubQuestions) {
  const auto& books = fixture::table("books");
  auto combos = enumerate_combos(books, Method::Comparison);
  ASSERT_FALSE(combos.empty());
  for (std::size_t i = 0; i < kTemplatesPerMethod; ++i) {
    auto q = render_complex(combos[0], Method::Comparison, i);
    EXPECT_EQ(classify_complexity(q, books), QuestionClass::ComplexTypeI) << q;
  }
  auto subs = render_subs(combos[0], Method::Comparison);
  for (const auto& s : subs) EXPECT_EQ(classify_complexity(s, books), QuestionClass::Simple) << s;
}

TEST(Generate, ScaleAndBalance) {
  const auto& c = default_corpus();
  std::size_t t1 = 0, t2 = 0;
  std::set<std::string> tables;
  for (const auto& e : c.entries) {
    (method_class(e.method) == QuestionClass::ComplexTypeI ? t1 : t2) += 1;
    tables.insert(e.table_id);
  }
  EXPECT_GE(t1, 500u);
  EXPECT_GE(t2, 500u);
  EXPECT_GE(tables.size(), 3u);
  EXPECT_EQ(c.header["seed"], 42);
  EXPECT_EQ(c.header.at("counts").at("type-1"), t1);
  EXPECT_EQ(c.header.at("counts").at("type-2"), t2);
}

TEST(Generate, EntriesSelfValidate) {
  const auto& c = default_corpus();
  std::size_t rephrased = 0;
  for (const auto& e : c.entries) {
    const auto& x = fixture::table(e.table_id);
    auto v = entry_violations(e, x);
    ASSERT_TRUE(v.empty()) << v[0];
    EXPECT_FALSE(e.input.empty());
    EXPECT_LE(e.input.size(), kMaxQuestionTokens);
    EXPECT_LT(e.template_index, kTemplatesPerMethod);
    rephrased += e.rephrased;
    if (e.rephrased) {
      EXPECT_NE(e.complex_question, e.template_question);
    }
  }
  EXPECT_GT(rephrased, 0u);
}

TEST(Generate, ByteDeterministic) {
  GenerateOptions opt;
  opt.max_per_method = 20;
  auto a = to_jsonl(generate(fixtures(), opt));
  auto b = to_jsonl(generate(fixtures(), opt));
  EXPECT_EQ(a, b);
  // table order does not matter
  auto shuffled = fixtures();
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(to_jsonl(generate(shuffled, opt)), a);
  opt.seed = 7;
  EXPECT_NE(to_jsonl(generate(fixtures(), opt)), a);
}

TEST(Jsonl, RoundTrip) {
  GenerateOptions opt;
  opt.max_per_method = 5;
  auto c = generate(fixtures(), opt);
  auto text = to_jsonl(c);
  std::istringstream in(text);
  auto back = from_jsonl(in);
  EXPECT_EQ(back.header, c.header);
  ASSERT_EQ(back.entries.size(), c.entries.size());
  EXPECT_EQ(to_jsonl(back), text);
}

TEST(Jsonl, Errors) {
  std::istringstream empty("");
  EXPECT_THROW(from_jsonl(empty), EmptyInput);
  std::istringstream no_header("{\"table_id\":\"x\"}\n");
  EXPECT_THROW(from_jsonl(no_header), ParseError);
  std::istringstream bad("{\"header\":{\"version\":\"1\"}}\n{not json\n");
  try {
    from_jsonl(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
  std::istringstream one_sub(R"({"header":{"version":"1"}}
{"table_id":"x","method":"bridging","complex_question":"q","sub_questions":["a"],"facts":[]}
)");
  EXPECT_THROW(from_jsonl(one_sub), ParseError);
}
