#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "tabqa/fact.hpp"
#include "tabqa/templates.hpp"

using namespace tabqa;

namespace {

DataFact fact(FactType t, std::vector<Measure> m = {}, std::optional<std::string> bd = std::nullopt,
              std::vector<FocusItem> focus = {}, Subspace s = {}) {
  DataFact f;
  f.type = t;
  f.measures = std::move(m);
  f.breakdown = std::move(bd);
  f.focus = std::move(focus);
  f.subspace = std::move(s);
  return f;
}

const Measure kSales{"sales", Agg::Sum};

} // namespace

TEST(RequiredFields, Matrix) {
  EXPECT_EQ(required_fields(FactType::Trend), (FieldMask{Need::Required, BreakdownKind::Temporal, 1, FocusRule::None}));
  EXPECT_EQ(required_fields(FactType::Association), (FieldMask{Need::Optional, BreakdownKind::Any, 2, FocusRule::None}));
  EXPECT_EQ(required_fields(FactType::Categorization),
            (FieldMask{Need::Required, BreakdownKind::Categorical, 0, FocusRule::None}));
  EXPECT_EQ(required_fields(FactType::Value).breakdown, Need::None);
  EXPECT_EQ(required_fields(FactType::Difference).focus, FocusRule::Two);
  EXPECT_EQ(required_fields(FactType::Proportion).kind, BreakdownKind::Categorical);
  EXPECT_EQ(required_fields(FactType::Extreme).focus, FocusRule::One);
  EXPECT_EQ(required_fields(FactType::Outlier).focus, FocusRule::AtLeastOne);
  EXPECT_EQ(kAllFactTypes.size(), 10u);
}

TEST(FactType, NamesRoundTrip) {
  std::set<std::string> names;
  for (auto t : kAllFactTypes) {
    names.insert(to_string(t));
    EXPECT_EQ(fact_type_from_string(to_string(t)), t);
  }
  EXPECT_EQ(names.size(), 10u);
  EXPECT_THROW(fact_type_from_string("insight"), SchemaError);
}

TEST(ValidateFact, Cases) {
  const auto& cars = fixture::table("cars");
  auto v = validate_fact(fact(FactType::Trend, {kSales}, "brand"), cars);
  EXPECT_NE(std::find(v.begin(), v.end(), "breakdown must be temporal"), v.end());

  auto x = fixture::toy_brands();
  EXPECT_TRUE(validate_fact(fact(FactType::Extreme, {kSales}, "brand", {{"B", FocusRole::Max}}), x).empty());

  v = validate_fact(fact(FactType::Value, {{"profit", Agg::Sum}}), cars);
  ASSERT_FALSE(v.empty());
  EXPECT_NE(v[0].find("unknown column"), std::string::npos);

  EXPECT_FALSE(validate_fact(fact(FactType::Extreme, {kSales}, "brand", {{"Z", FocusRole::Max}}), x).empty());
  EXPECT_FALSE(validate_fact(fact(FactType::Value, {kSales}, "brand"), x).empty());
  EXPECT_FALSE(validate_fact(fact(FactType::Difference, {kSales}, "brand", {{"A", FocusRole::Item}}), x).empty());
  EXPECT_FALSE(validate_fact(fact(FactType::Value, {{"brand", Agg::Sum}}), x).empty());
}

TEST(EvaluateFact, ExtremeOnToyTable) {
  auto x = fixture::toy_brands();
  auto r = evaluate_fact(fact(FactType::Extreme, {kSales}, "brand", {{"B", FocusRole::Max}}), x);
  ASSERT_TRUE(r.derived.max && r.derived.min);
  EXPECT_EQ(r.derived.max->key, "B");
  EXPECT_EQ(r.derived.max->value, 30);
  EXPECT_EQ(r.derived.min->key, "A");
  double best = 0;
  for (const auto& g : r.groups) best = std::max(best, g.value);
  EXPECT_EQ(r.derived.max->value, best);
}

TEST(EvaluateFact, TrendDirection) {
  auto t = load_table("year,v\n2000,1\n2001,2\n2002,3\n");
  auto r = evaluate_fact(fact(FactType::Trend, {{"v", Agg::Sum}}, "year"), t);
  EXPECT_EQ(r.derived.direction, TrendDirection::Increasing);
  auto d = load_table("year,v\n2000,3\n2001,2\n2002,1\n");
  EXPECT_EQ(evaluate_fact(fact(FactType::Trend, {{"v", Agg::Sum}}, "year"), d).derived.direction, TrendDirection::Decreasing);
  auto one = load_table("year,v\n2000,3\n");
  EXPECT_THROW(evaluate_fact(fact(FactType::Trend, {{"v", Agg::Sum}}, "year"), one), InsufficientData);
}

TEST(EvaluateFact, AssociationWithItself) {
  const auto& cars = fixture::table("cars");
  auto r = evaluate_fact(fact(FactType::Association, {kSales, kSales}), cars);
  EXPECT_NEAR(*r.derived.correlation, 1.0, 1e-12);
  EXPECT_NEAR(*r.derived.regression_slope, 1.0, 1e-12);
  auto tiny = load_table("a,b\n1,2\n");
  EXPECT_THROW(evaluate_fact(fact(FactType::Association, {{"a", Agg::Sum}, {"b", Agg::Sum}}), tiny), InsufficientData);
}

TEST(EvaluateFact, OutlierZScore) {
  std::string csv = "k,v\n";
  for (int i = 0; i < 19; ++i) csv += "g" + std::to_string(i) + "," + std::to_string(10 + i % 3) + "\n";
  csv += "big,500\n";
  auto t = load_table(csv);
  auto r = evaluate_fact(fact(FactType::Outlier, {{"v", Agg::Sum}}, "k", {{"big", FocusRole::Outlier}}), t);
  EXPECT_EQ(r.derived.highlighted, std::vector<std::string>{"big"});
}

TEST(EvaluateFact, OutlierIqrForSmallN) {
  auto t = load_table("k,v\na,10\nb,11\nc,12\nd,10\ne,90\n");
  auto r = evaluate_fact(fact(FactType::Outlier, {{"v", Agg::Sum}}, "k", {{"e", FocusRole::Outlier}}), t);
  EXPECT_EQ(r.derived.highlighted, std::vector<std::string>{"e"});
}

TEST(EvaluateFact, RankIsPermutation) {
  const auto& cars = fixture::table("cars");
  auto r = evaluate_fact(fact(FactType::Rank, {kSales}, "brand"), cars);
  ASSERT_EQ(r.derived.ranked.size(), r.groups.size());
  EXPECT_TRUE(std::is_permutation(r.derived.ranked.begin(), r.derived.ranked.end(), r.groups.begin()));
  EXPECT_TRUE(std::is_sorted(r.derived.ranked.begin(), r.derived.ranked.end(),
                             [](const Group& a, const Group& b) { return a.value > b.value; }));
}

TEST(EvaluateFact, ProportionAndDifference) {
  auto x = fixture::toy_brands();
  auto p = evaluate_fact(fact(FactType::Proportion, {kSales}, "brand", {{"B", FocusRole::Item}}), x);
  EXPECT_DOUBLE_EQ(*p.derived.share, 0.5);
  auto d = evaluate_fact(fact(FactType::Difference, {kSales}, "brand", {{"B", FocusRole::Item}, {"A", FocusRole::Item}}), x);
  EXPECT_DOUBLE_EQ(*d.derived.gap, 20);
  auto v = evaluate_fact(fact(FactType::Value, {kSales}), x);
  EXPECT_DOUBLE_EQ(*v.derived.value, 60);
  auto c = evaluate_fact(fact(FactType::Categorization, {}, "brand"), x);
  EXPECT_EQ(c.groups.size(), 3u);
}

TEST(EvaluateFact, Deterministic) {
  const auto& books = fixture::table("books");
  auto f = fact(FactType::Distribution, {{"price", Agg::Mean}}, "genre");
  auto a = evaluate_fact(f, books), b = evaluate_fact(f, books);
  EXPECT_EQ(a.groups, b.groups);
  EXPECT_EQ(fact_to_caption(a), fact_to_caption(b));
}

TEST(FactJson, RoundTrip) {
  auto f = fact(FactType::Difference, {kSales}, "brand", {{"B", FocusRole::Item}, {"A", FocusRole::Item}},
                {{Filter::range("year", FilterOp::TemporalRange, "2005", "2010")}});
  auto j = to_json(f);
  EXPECT_EQ(j["type"], "difference");
  EXPECT_EQ(fact_from_json(j), f);
  EXPECT_EQ(canonical(fact_from_json(nlohmann::json::parse(canonical(f)))), canonical(f));
}

TEST(Templates, PinnedQuestions) {
  EXPECT_EQ(fact_to_question(fact(FactType::Trend, {kSales}, "year")), "what is the trend of sales over year?");
  EXPECT_EQ(fact_to_question(fact(FactType::Extreme, {{"reviews", Agg::Sum}}, "year", {{"2012", FocusRole::Max}})),
            "which year has the highest reviews?");
  EXPECT_EQ(fact_to_question(fact(FactType::Distribution, {{"price", Agg::Sum}}, "genre")),
            "what is the overall distribution of price over genre?");
  EXPECT_EQ(fact_to_question(fact(FactType::Distribution, {{"price", Agg::Mean}}, "genre")),
            "what is the overall distribution of average price over genre?");
  EXPECT_THROW(fact_to_question(fact(FactType::Trend, {kSales})), TemplateError);
  EXPECT_EQ(fact_to_question(fact(FactType::Trend, {kSales}), true), "what is the trend of sales?");
}

TEST(Templates, PinnedCaptions) {
  auto x = fixture::toy_brands();
  auto total = load_table("sales\n1000\n234\n");
  EXPECT_EQ(fact_to_caption(evaluate_fact(fact(FactType::Value, {kSales}), total)), "The total sales is 1,234.");
  EXPECT_EQ(fact_to_caption(evaluate_fact(fact(FactType::Extreme, {kSales}, "brand", {{"B", FocusRole::Max}}), x)),
            "B has the highest sales (30) among all brands.");
  auto years = load_table("year,sales\n2000,1\n2001,2\n2002,3\n");
  EXPECT_EQ(fact_to_caption(evaluate_fact(fact(FactType::Trend, {kSales}, "year"), years)),
            "The sales shows an increasing trend over year.");
}

TEST(Templates, NumbersFormatted) {
  EXPECT_EQ(text::format_number(1234567.891), "1,234,567.89");
  EXPECT_EQ(text::format_number(-0.5), "-0.5");
  EXPECT_EQ(text::format_number(30), "30");
}

TEST(Templates, TotalityOverPartialFields) {
  const std::vector<Measure> one = {kSales}, two = {kSales, {"price", Agg::Mean}};
  for (auto t : kAllFactTypes)
    for (int mask = 0; mask < 16; ++mask) {
      DataFact f;
      f.type = t;
      if (mask & 1) f.measures = required_fields(t).measures == 2 ? two : one;
      if (mask & 2) f.breakdown = "brand";
      if (mask & 4) f.subspace = {{Filter::equals("model", "Focus")}};
      if (mask & 8) {
        auto rule = required_fields(t).focus;
        if (rule == FocusRule::None) continue;
        f.focus = {{"A", t == FactType::Outlier ? FocusRole::Outlier : t == FactType::Extreme ? FocusRole::Max : FocusRole::Item}};
        if (rule == FocusRule::Two) f.focus.push_back({"B", FocusRole::Item});
      }
      EXPECT_FALSE(fact_to_question(f, true).empty()) << to_string(t) << " mask " << mask;
    }
}

TEST(Templates, TotalityOverCompleteFixtureFacts) {
  std::size_t n = 0;
  for (auto stem : {"cars", "shop", "movies"}) {
    const auto& x = fixture::table(stem);
    for (auto t : kAllFactTypes)
      for (const auto& f : fixture::enumerate_facts(x, t)) {
        ASSERT_FALSE(fact_to_question(f).empty());
        auto caption = fact_to_caption(evaluate_fact(f, x));
        ASSERT_FALSE(caption.empty()) << canonical(f);
        ASSERT_EQ(fact_to_caption(evaluate_fact(f, x)), caption);
        ++n;
      }
  }
  EXPECT_GT(n, 1000u);
}
