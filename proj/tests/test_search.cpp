#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>

#include "support.hpp"
#include "tabqa/search.hpp"

using namespace tabqa;

TEST(Search, ToyExtremeFindsB) {
  auto x = fixture::toy_brands();
  auto p = make_reference_provider(x);
  SearchConfig cfg;
  cfg.beam_width = 1;
  auto r = search("which brand has the highest sales?", FactType::Extreme, x, cfg, *p);
  ASSERT_EQ(r.size(), 1u);
  ASSERT_EQ(r[0].fact.focus.size(), 1u);
  EXPECT_EQ(r[0].fact.focus[0].key, "B");
  EXPECT_EQ(r[0].fact.focus[0].role, FocusRole::Max);
  EXPECT_EQ(r[0].fact.breakdown, "brand");
  EXPECT_TRUE(r[0].complete);
}

TEST(Search, ResultsAreCompleteValidAndSorted) {
  const auto& cars = fixture::table("cars");
  auto p = make_reference_provider(cars);
  for (auto t : kAllFactTypes) {
    if (t == FactType::Association) continue;  // one numeric column
    std::vector<ScoredFact> r;
    try {
      r = search(fact_to_question(DataFact{t, {}, {}, {}, {}}, true), t, cars, {}, *p);
    } catch (const SearchError&) {
      continue;
    }
    EXPECT_LE(r.size(), 5u);
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_TRUE(validate_fact(r[i].fact, cars).empty()) << canonical(r[i].fact);
      EXPECT_NO_THROW(evaluate_fact(r[i].fact, cars));
      EXPECT_EQ(r[i].fact.type, t);
      if (i) {
        EXPECT_GE(r[i - 1].score, r[i].score);
      }
    }
  }
}

TEST(Search, Unsatisfiable) {
  auto x = fixture::toy_brands();
  auto p = make_reference_provider(x);
  try {
    search("what is the trend of sales?", FactType::Trend, x, {}, *p);
    FAIL() << "expected SearchError";
  } catch (const SearchError& e) {
    EXPECT_NE(std::string(e.what()).find("no temporal column"), std::string::npos);
  }
  EXPECT_THROW(search("correlation", FactType::Association, x, {}, *p), SearchError);
  SearchConfig zero;
  zero.beam_width = 0;
  EXPECT_THROW(search("x", FactType::Value, x, zero, *p), PreconditionError);
}

TEST(Answer, ComplexQuestionRejected) {
  EXPECT_THROW(answer("How is the sales?", fixture::table("cars")), PreconditionError);
}

TEST(Answer, SimpleQuestion) {
  const auto& cars = fixture::table("cars");
  auto r = answer("what is the trend of sales over year?", cars);
  ASSERT_FALSE(r.empty());
  EXPECT_EQ(r[0].fact.type, FactType::Trend);
  EXPECT_EQ(r[0].fact.breakdown, "year");
  EXPECT_EQ(r[0].fact.measures.at(0).column, "sales");
}

TEST(Answer, MeanKeywordRestrictsAggregation) {
  auto r = answer("which genre has the highest average price?", fixture::table("books"));
  ASSERT_FALSE(r.empty());
  for (const auto& s : r) EXPECT_EQ(s.fact.measures.at(0).agg, Agg::Mean);
}

TEST(Expand, MeasureCount) {
  auto x = fixture::small_table(2);  // cost, weight, speed
  DataFact f;
  f.type = FactType::Trend;
  EXPECT_EQ(expand(f, Field::Measure, x, {}).size(), 6u);
  auto y = fixture::small_table(1);  // cost, weight
  EXPECT_EQ(expand(f, Field::Measure, y, {}).size(), 4u);
  f.type = FactType::Association;
  EXPECT_EQ(expand(f, Field::Measure, y, {}).size(), 2u);
  EXPECT_EQ(expand(f, Field::Measure, x, {}).size(), 6u);
}

TEST(Expand, SubspaceCount) {
  auto x = load_table("brand,region,sales\nA,n,1\nB,s,2\nC,n,3\nA,s,4\n", "t");
  DataFact f{FactType::Value, {}, std::nullopt, {{"sales", Agg::Sum}}, {}};
  f.breakdown = "region";
  // empty subspace plus one filter per brand value
  EXPECT_EQ(expand(f, Field::Subspace, x, {}).size(), 4u);
}

TEST(Expand, BreakdownRespectsKind) {
  const auto& cars = fixture::table("cars");
  DataFact f;
  f.type = FactType::Trend;
  auto kids = expand(f, Field::Breakdown, cars, {});
  ASSERT_EQ(kids.size(), 1u);
  EXPECT_EQ(kids[0].breakdown, "year");
  f.type = FactType::Association;
  EXPECT_EQ(expand(f, Field::Breakdown, cars, {}).size(), 4u);  // none, year, model, brand
}

TEST(Expand, ExtremeFocus) {
  auto x = fixture::toy_brands();
  DataFact f{FactType::Extreme, {}, std::string("brand"), {{"sales", Agg::Sum}}, {}};
  auto kids = expand(f, Field::Focus, x, {});
  ASSERT_EQ(kids.size(), 4u);
  EXPECT_EQ(kids[0].focus, (std::vector<FocusItem>{{"B", FocusRole::Max}}));
  EXPECT_EQ(kids[1].focus, (std::vector<FocusItem>{{"A", FocusRole::Min}}));
  EXPECT_EQ(kids[2].focus, (std::vector<FocusItem>{{"B", FocusRole::AboveAverage}}));
  EXPECT_EQ(kids[3].focus, (std::vector<FocusItem>{{"A", FocusRole::BelowAverage}}));
}

TEST(Rank, OrdersBySimilarityThenCanonical) {
  const auto& cars = fixture::table("cars");
  auto p = make_reference_provider(cars);
  DataFact a{FactType::Value, {}, std::nullopt, {{"sales", Agg::Sum}}, {}};
  DataFact b{FactType::Categorization, {}, std::string("brand"), {}, {}};
  auto r = rank({b, a}, "what is the total sales?", *p);
  EXPECT_EQ(r[0].fact.type, FactType::Value);
  auto same = rank({a, a}, "what is the total sales?", *p);
  EXPECT_EQ(same[0].score, same[1].score);
}

TEST(Search, Deterministic) {
  const auto& books = fixture::table("books");
  auto p = make_reference_provider(books);
  auto a = search("which genre has the highest price?", FactType::Extreme, books, {}, *p);
  auto b = search("which genre has the highest price?", FactType::Extreme, books, {}, *p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(canonical(a[i].fact), canonical(b[i].fact));
    EXPECT_EQ(a[i].score, b[i].score);
  }
}

TEST(Search, BeamBoundsResultCount) {
  auto x = fixture::small_table(4);
  auto p = make_reference_provider(x);
  for (std::size_t k : {1u, 2u, 3u, 7u}) {
    SearchConfig cfg;
    cfg.beam_width = k;
    auto r = search("which color has the highest cost?", FactType::Extreme, x, cfg, *p);
    EXPECT_LE(r.size(), k);
    EXPECT_GE(r.size(), 1u);
  }
}

TEST(Search, WideBeamMatchesExhaustiveOracle) {
  auto start = std::chrono::steady_clock::now();
  std::size_t compared = 0;
  std::map<FactType, int> types_seen;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    auto x = fixture::small_table(seed);
    auto p = make_reference_provider(x);
    for (auto t : kAllFactTypes) {
      auto facts = fixture::enumerate_facts(x, t);
      if (facts.empty()) {
        EXPECT_EQ(t, FactType::Outlier) << x.name();
        EXPECT_THROW(search("which color is an outlier?", t, x, {}, *make_reference_provider(x)), SearchError);
        continue;
      }
      ++types_seen[t];
      std::string q = fact_to_question(facts[(seed * 7) % facts.size()]);
      auto want = fixture::oracle_top(x, t, q, *p);
      SearchConfig cfg;
      cfg.beam_width = 1000000;
      auto got = search(q, t, x, cfg, *p);
      ASSERT_EQ(got.size(), want.size()) << x.name() << " " << to_string(t);
      for (std::size_t i = 0; i < got.size(); ++i) {
        ASSERT_EQ(canonical(got[i].fact), want[i].canonical) << x.name() << " " << to_string(t) << " #" << i;
        ASSERT_NEAR(got[i].score, want[i].score, 1e-12);
      }
      compared += got.size();
    }
  }
  EXPECT_GT(compared, 500u);
  EXPECT_EQ(types_seen.size(), kAllFactTypes.size());
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
}
