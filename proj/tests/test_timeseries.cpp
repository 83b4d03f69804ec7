#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "bch/timeseries.hpp"

using namespace bch;

namespace {

TimeSeriesSet parse(const std::string& text, CsvOptions opt = {})
{
    std::istringstream in(text);
    return read_csv(in, opt);
}

TimeSeriesSet ramp(std::size_t t, std::vector<std::size_t> gaps = {})
{
    std::vector<double> v(t);
    for (std::size_t i = 0; i < t; ++i) {
        v[i] = static_cast<double>(i);
    }
    for (auto g : gaps) {
        v[g] = TimeSeriesSet::missing();
    }
    return TimeSeriesSet({"A"}, t, v);
}

} // namespace

TEST(LoadCsv, ReadsShapeAndValues)
{
    const auto ts = parse("a,b,c\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n13,14,15\n");
    EXPECT_EQ(ts.length(), 5u);
    EXPECT_EQ(ts.width(), 3u);
    EXPECT_EQ(ts.variable_names(), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_DOUBLE_EQ(ts.at(4, 2), 15.0);
    EXPECT_EQ(ts.missing_count(), 0u);
}

TEST(LoadCsv, EmptyCellAndTokenAreMissing)
{
    CsvOptions opt;
    opt.missing_token = "NA";
    const auto ts = parse("a,b\n1,\nNA,4\n5,6\n", opt);
    EXPECT_TRUE(ts.is_missing(0, 1));
    EXPECT_TRUE(ts.is_missing(1, 0));
    EXPECT_EQ(ts.missing_count(), 2u);
    EXPECT_DOUBLE_EQ(ts.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(ts.at(2, 1), 6.0);
}

TEST(LoadCsv, DuplicateHeaderIsSchemaError)
{
    EXPECT_THROW(parse("pH,Na,pH\n1,2,3\n"), SchemaError);
}

TEST(LoadCsv, RaggedRowNamesTheRow)
{
    try {
        parse("a,b\n1,2\n3\n");
        FAIL() << "expected ParseError";
    }
    catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }
}

TEST(LoadCsv, TimestampColumnIsMetadata)
{
    const auto ts = parse("time,a\n2007-03-01 00:00,1\n2007-03-01 07:00,2\n");
    EXPECT_EQ(ts.width(), 1u);
    ASSERT_EQ(ts.timestamps().size(), 2u);
    EXPECT_EQ(ts.timestamps()[1], "2007-03-01 07:00");
}

TEST(LoadCsv, NonNumericCellIsParseError)
{
    EXPECT_THROW(parse("a\nabc\n"), ParseError);
    EXPECT_THROW(parse("a\nnan\n"), ParseError);
}

TEST(Standardize, UnitMomentsAndGapsKept)
{
    const TimeSeriesSet ts({"a", "b"}, 4, {1, 10, 2, TimeSeriesSet::missing(), 3, 30, 4, 50});
    const auto s = standardize(ts);
    EXPECT_TRUE(s.is_missing(1, 1));
    double mean = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        mean += s.at(t, 0);
    }
    EXPECT_NEAR(mean, 0.0, 1e-12);
    // [1,2,3] column check from the examples: mean 0 and sd 1
    const auto three = standardize(TimeSeriesSet({"x"}, 3, {1, 2, 3}));
    EXPECT_NEAR(three.at(0, 0), -1.0, 1e-12);
    EXPECT_NEAR(three.at(1, 0), 0.0, 1e-12);
    EXPECT_NEAR(three.at(2, 0), 1.0, 1e-12);
}

TEST(Standardize, Idempotent)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(5.0, 3.0);
    std::vector<double> v(200);
    for (auto& x : v) {
        x = normal(rng);
    }
    const auto once = standardize(TimeSeriesSet({"a", "b"}, 100, v));
    const auto twice = standardize(once);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_NEAR(once.values()[i], twice.values()[i], 1e-12);
    }
}

TEST(Standardize, ConstantColumnNamesVariable)
{
    try {
        standardize(TimeSeriesSet({"flat"}, 3, {5, 5, 5}));
        FAIL() << "expected DegenerateVariableError";
    }
    catch (const DegenerateVariableError& e) {
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(ExtractLagged, ShiftConstruction)
{
    const auto ts = ramp(10);
    const std::vector<LaggedNode> nodes{{"A", 0}, {"A", 1}};
    const auto s = extract_lagged_matrix(ts, nodes);
    ASSERT_EQ(s.rows(), 9u);
    EXPECT_EQ(s.dropped, 0u);
    for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_DOUBLE_EQ(s.samples(i, 0), static_cast<double>(i + 1));
        EXPECT_DOUBLE_EQ(s.samples(i, 1), static_cast<double>(i));
    }
}

TEST(ExtractLagged, CompleteCaseDropsTouchedAnchors)
{
    const auto ts = ramp(10, {4});
    const std::vector<LaggedNode> nodes{{"A", 0}, {"A", 1}};
    const auto s = extract_lagged_matrix(ts, nodes);
    EXPECT_EQ(s.rows(), 7u);
    EXPECT_EQ(s.dropped, 2u);
    for (auto t : s.anchors) {
        EXPECT_NE(t, 4u);
        EXPECT_NE(t, 5u);
    }
}

TEST(ExtractLagged, RowCountNonIncreasingWithLagOnGappyData)
{
    std::mt19937_64 rng(11);
    std::vector<std::size_t> gaps;
    for (std::size_t i = 0; i < 400; ++i) {
        if (rng() % 61 == 0) {
            gaps.push_back(i);
        }
    }
    const auto ts = ramp(400, gaps);
    // Node sets grow with the window, as in a tau sweep.
    std::size_t prev = ts.length();
    std::vector<LaggedNode> nodes{{"A", 0}};
    for (int lag = 1; lag < 25; ++lag) {
        nodes.push_back({"A", lag});
        const auto m = extract_lagged_matrix(ts, nodes).rows();
        EXPECT_LE(m, prev);
        prev = m;
    }
}

TEST(ExtractLagged, GapFreeRowCountAndOrderIndependence)
{
    std::mt19937_64 rng(5);
    std::vector<double> v(300);
    for (auto& x : v) {
        x = static_cast<double>(rng() % 1000);
    }
    const TimeSeriesSet ts({"A", "B", "C"}, 100, v);
    const std::vector<LaggedNode> a{{"A", 0}, {"B", 3}, {"C", 1}};
    const std::vector<LaggedNode> b{{"C", 1}, {"A", 0}, {"B", 3}};
    const auto sa = extract_lagged_matrix(ts, a);
    const auto sb = extract_lagged_matrix(ts, b);
    EXPECT_EQ(sa.rows(), 97u);
    for (std::size_t r = 0; r < sa.rows(); ++r) {
        EXPECT_EQ(sa.samples(r, 0), sb.samples(r, 1));
        EXPECT_EQ(sa.samples(r, 1), sb.samples(r, 2));
        EXPECT_EQ(sa.samples(r, 2), sb.samples(r, 0));
    }
}

TEST(ExtractLagged, StandardizeCommutesWithExtractionOnGapFreeData)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal(2.0, 4.0);
    std::vector<double> v(500);
    for (auto& x : v) {
        x = normal(rng);
    }
    const TimeSeriesSet ts({"A"}, 500, v);
    const std::vector<LaggedNode> nodes{{"A", 0}};
    const auto first = extract_lagged_matrix(standardize(ts), nodes);
    const auto raw = extract_lagged_matrix(ts, nodes);
    const auto col = standardize(TimeSeriesSet({"A"}, raw.rows(), raw.samples.column(0)));
    for (std::size_t r = 0; r < first.rows(); ++r) {
        EXPECT_NEAR(first.samples(r, 0), col.at(r, 0), 1e-12);
    }
}

TEST(ExtractLagged, ErrorsCarryContext)
{
    const auto ts = ramp(5, {0, 1, 2, 3, 4});
    const std::vector<LaggedNode> nodes{{"A", 0}, {"A", 1}};
    try {
        extract_lagged_matrix(ts, nodes);
        FAIL() << "expected InsufficientDataError";
    }
    catch (const InsufficientDataError& e) {
        EXPECT_NE(std::string(e.what()).find("A@1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("max lag 1"), std::string::npos);
    }
    const std::vector<LaggedNode> none;
    EXPECT_THROW(extract_lagged_matrix(ts, none), PreconditionError);
    const std::vector<LaggedNode> too_long{{"A", 5}};
    EXPECT_THROW(extract_lagged_matrix(ramp(5), too_long), InsufficientDataError);
}
