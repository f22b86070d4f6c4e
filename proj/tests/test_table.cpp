#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "support.hpp"
#include "tabqa/table.hpp"

using namespace tabqa;

TEST(LoadTable, CarFixtureTypes) {
  const auto& cars = fixture::table("cars");
  ASSERT_EQ(cars.row_count(), 275u);
  ASSERT_EQ(cars.column_count(), 4u);
  EXPECT_EQ(cars.column("year").type, ColumnType::Temporal);
  EXPECT_EQ(cars.column("sales").type, ColumnType::Numerical);
  EXPECT_EQ(cars.column("model").type, ColumnType::Categorical);
  EXPECT_EQ(cars.column("brand").type, ColumnType::Categorical);
}

TEST(LoadTable, EveryFixtureIsRectangular) {
  for (auto stem : {"cars", "books", "movies", "shop", "toy_brands"}) {
    const auto& t = fixture::table(stem);
    for (const auto& c : t.columns()) {
      EXPECT_EQ(c.text.size(), t.row_count()) << stem << "." << c.name;
      EXPECT_EQ(c.number.size(), t.row_count()) << stem << "." << c.name;
    }
  }
}

TEST(LoadTable, HeaderOnly) {
  auto t = load_table("a,b,c\n");
  EXPECT_EQ(t.row_count(), 0u);
  EXPECT_EQ(t.column_count(), 3u);
}

TEST(LoadTable, RaggedRowReportsRow) {
  try {
    load_table("year,sales,model,brand\n2005,1,Fiesta,Ford\n2006,2,Focus\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(LoadTable, EmptyInput) {
  EXPECT_THROW(load_table(""), EmptyInput);
  EXPECT_THROW(load_table("  \n"), EmptyInput);
}

TEST(LoadTable, QuotedCellsAndDuplicates) {
  auto t = load_table("name,notes\n\"Smith, J\",\"said \"\"hi\"\"\"\n");
  EXPECT_EQ(t.column("name").text[0], "Smith, J");
  EXPECT_EQ(t.column("notes").text[0], "said \"hi\"");
  EXPECT_THROW(load_table("a, A \n1,2\n"), ParseError);
}

TEST(LoadTable, CsvRoundTrip) {
  const auto& books = fixture::table("books");
  auto again = load_table(books.to_csv(), books.name());
  ASSERT_EQ(again.row_count(), books.row_count());
  for (std::size_t i = 0; i < books.column_count(); ++i) {
    EXPECT_EQ(again.column(i).type, books.column(i).type);
    EXPECT_EQ(again.column(i).text, books.column(i).text);
  }
}

TEST(LoadTable, SchemaJson) {
  auto j = fixture::table("cars").schema_json();
  EXPECT_EQ(j["row_count"], 275);
  EXPECT_EQ(j["columns"][0]["name"], "year");
  EXPECT_EQ(j["columns"][0]["type"], "temporal");
}

TEST(InferType, Rules) {
  EXPECT_EQ(infer_column_type({"2013", "2014", "2015"}), ColumnType::Temporal);
  EXPECT_EQ(infer_column_type({"2013-01-04", "2014-12-31"}), ColumnType::Temporal);
  EXPECT_EQ(infer_column_type({"10.5", "7", "13.1"}), ColumnType::Numerical);
  EXPECT_EQ(infer_column_type({"1,234", "5,678.5"}), ColumnType::Numerical);
  EXPECT_EQ(infer_column_type({"Fiction", "Non Fiction"}), ColumnType::Categorical);
  EXPECT_EQ(infer_column_type({"999", "3000"}), ColumnType::Numerical);
  EXPECT_THROW(infer_column_type({"", " "}), InferError);
}

TEST(InferType, NinetyFivePercentThreshold) {
  std::vector<std::string> v(19, "12.5");
  v.push_back("n/a");
  EXPECT_EQ(infer_column_type(v), ColumnType::Numerical);
  v.push_back("n/a");
  EXPECT_EQ(infer_column_type(v), ColumnType::Categorical);
}

TEST(InferType, Deterministic) {
  std::vector<std::string> v = {"1", "x", "2", "3"};
  EXPECT_EQ(infer_column_type(v), infer_column_type(v));
}

namespace {

std::vector<std::size_t> scan(const DataTable& t, const std::function<bool(std::size_t)>& keep) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < t.row_count(); ++r)
    if (keep(r)) out.push_back(r);
  return out;
}

} // namespace

TEST(Subspace, EmptyIsEverything) {
  const auto& cars = fixture::table("cars");
  auto rows = apply_subspace(cars, {});
  ASSERT_EQ(rows.size(), 275u);
  EXPECT_EQ(rows.front(), 0u);
  EXPECT_EQ(rows.back(), 274u);
}

TEST(Subspace, EqualsFilter) {
  const auto& books = fixture::table("books");
  auto rows = apply_subspace(books, {{Filter::equals("genre", "Fiction")}});
  const auto& g = books.column("genre").text;
  EXPECT_FALSE(rows.empty());
  EXPECT_EQ(rows, scan(books, [&](std::size_t r) { return g[r] == "Fiction"; }));
}

TEST(Subspace, ConjunctionIsIntersection) {
  const auto& cars = fixture::table("cars");
  Subspace years{{Filter::range("year", FilterOp::TemporalRange, "2010", "2012")}};
  Subspace ford{{Filter::equals("brand", "Ford")}};
  Subspace both{{years.filters[0], ford.filters[0]}};
  auto a = apply_subspace(cars, years), b = apply_subspace(cars, ford), ab = apply_subspace(cars, both);
  std::vector<std::size_t> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  EXPECT_EQ(ab, inter);
  EXPECT_LE(ab.size(), std::min(a.size(), b.size()));
  const auto& year = cars.column("year");
  const auto& brand = cars.column("brand").text;
  EXPECT_EQ(ab, scan(cars, [&](std::size_t r) {
              double y = std::stod(year.text[r]);
              return y >= 2010 && y <= 2012 && brand[r] == "Ford";
            }));
}

TEST(Subspace, InSetAndNumericRange) {
  const auto& cars = fixture::table("cars");
  Subspace s{{Filter{"brand", FilterOp::InSet, {"Ford", "Toyota"}},
              Filter::range("sales", FilterOp::NumericRange, "100000", "200000")}};
  const auto& brand = cars.column("brand").text;
  const auto& sales = cars.column("sales").number;
  EXPECT_EQ(apply_subspace(cars, s), scan(cars, [&](std::size_t r) {
              return (brand[r] == "Ford" || brand[r] == "Toyota") && *sales[r] >= 100000 && *sales[r] <= 200000;
            }));
}

TEST(Subspace, Errors) {
  const auto& cars = fixture::table("cars");
  EXPECT_THROW(apply_subspace(cars, {{Filter::equals("colour", "red")}}), SchemaError);
  EXPECT_THROW(apply_subspace(cars, {{Filter::equals("brand", "Ford"), Filter::equals("brand", "Kia")}}), SchemaError);
  EXPECT_THROW(apply_subspace(cars, {{Filter::range("brand", FilterOp::NumericRange, "1", "2")}}), SchemaError);
}

TEST(Aggregate, PerBrandSumsMatchRowScan) {
  const auto& cars = fixture::table("cars");
  auto groups = group_and_aggregate(cars, {}, "brand", Measure{"sales", Agg::Sum});
  const auto& brand = cars.column("brand").text;
  const auto& sales = cars.column("sales").number;
  std::map<std::string, double> oracle;
  for (std::size_t r = 0; r < cars.row_count(); ++r) oracle[brand[r]] += *sales[r];
  ASSERT_EQ(groups.size(), oracle.size());
  for (const auto& g : groups) EXPECT_DOUBLE_EQ(g.value, oracle.at(g.key)) << g.key;
}

TEST(Aggregate, NoBreakdownIsTotal) {
  const auto& cars = fixture::table("cars");
  auto groups = group_and_aggregate(cars, {}, std::nullopt, Measure{"sales", Agg::Sum});
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].key, "all");
  double total = 0;
  for (const auto& v : cars.column("sales").number) total += *v;
  EXPECT_DOUBLE_EQ(groups[0].value, total);
}

TEST(Aggregate, EmptySubspace) {
  const auto& cars = fixture::table("cars");
  auto groups = group_and_aggregate(cars, {{Filter::equals("brand", "Nobody")}}, "brand", Measure{"sales", Agg::Sum});
  EXPECT_TRUE(groups.empty());
}

TEST(Aggregate, CountWithoutMeasure) {
  const auto& books = fixture::table("books");
  auto groups = group_and_aggregate(books, {}, "genre", std::nullopt);
  double n = 0;
  for (const auto& g : groups) n += g.value;
  EXPECT_EQ(n, static_cast<double>(books.row_count()));
}

TEST(Aggregate, AllAggregations) {
  auto t = load_table("k,v\na,1\na,5\nb,2\nb,\nb,4\n");
  auto get = [&](Agg a) {
    std::map<std::string, double> m;
    for (const auto& g : group_and_aggregate(t, {}, "k", Measure{"v", a})) m[g.key] = g.value;
    return m;
  };
  EXPECT_EQ(get(Agg::Sum), (std::map<std::string, double>{{"a", 6}, {"b", 6}}));
  EXPECT_EQ(get(Agg::Mean), (std::map<std::string, double>{{"a", 3}, {"b", 3}}));
  EXPECT_EQ(get(Agg::Count), (std::map<std::string, double>{{"a", 2}, {"b", 2}}));
  EXPECT_EQ(get(Agg::Min), (std::map<std::string, double>{{"a", 1}, {"b", 2}}));
  EXPECT_EQ(get(Agg::Max), (std::map<std::string, double>{{"a", 5}, {"b", 4}}));
}

TEST(Aggregate, TemporalGroupsAreTimeOrdered) {
  auto t = load_table("year,v\n2003,1\n2001,2\n2002,3\n2001,4\n");
  auto groups = group_and_aggregate(t, {}, "year", Measure{"v", Agg::Sum});
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0].key, "2001");
  EXPECT_EQ(groups[0].value, 6);
  EXPECT_EQ(groups[2].key, "2003");
}

TEST(Aggregate, Conservation) {
  for (auto stem : {"cars", "books", "movies", "shop"}) {
    const auto& t = fixture::table(stem);
    for (const auto& m : t.columns_of(ColumnType::Numerical)) {
      auto total = group_and_aggregate(t, {}, std::nullopt, Measure{m, Agg::Sum});
      for (const auto& b : t.columns_of(ColumnType::Categorical)) {
        double sum = 0;
        for (const auto& g : group_and_aggregate(t, {}, b, Measure{m, Agg::Sum})) sum += g.value;
        EXPECT_NEAR(sum, total[0].value, 1e-9 * std::max(1.0, std::abs(total[0].value))) << stem << " " << m << " by " << b;
      }
    }
  }
}

TEST(Aggregate, Errors) {
  const auto& cars = fixture::table("cars");
  EXPECT_THROW(group_and_aggregate(cars, {}, "brand", Measure{"model", Agg::Sum}), SchemaError);
  EXPECT_THROW(group_and_aggregate(cars, {}, "sales", Measure{"sales", Agg::Sum}), SchemaError);
}
