#include "etas/catalog.hpp"

#include <gtest/gtest.h>

#include <random>

namespace etas {
namespace {

TEST(Catalog, ParsesDaysMode) {
    const auto c = parse_catalog("time,magnitude\n0.5,3.1\n2.0,2.7");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_DOUBLE_EQ(c.window_start, 0.5);
    EXPECT_DOUBLE_EQ(c.window_end, 2.0);
    EXPECT_DOUBLE_EQ(c.in_window()[0].magnitude, 3.1);
    EXPECT_DOUBLE_EQ(c.threshold, 2.7);
}

TEST(Catalog, SortsUnorderedInput) {
    const auto a = parse_catalog("time,magnitude\n0.5,3.1\n2.0,2.7");
    const auto b = parse_catalog("time,magnitude\n2.0,2.7\n0.5,3.1");
    EXPECT_EQ(a, b);
}

TEST(Catalog, TiesBrokenByMagnitudeThenInputOrder) {
    const auto c = parse_catalog("time,magnitude\n1.0,2.0\n1.0,3.0\n1.0,2.0\n0.0,1.0\n");
    ASSERT_EQ(c.size(), 4u);
    EXPECT_DOUBLE_EQ(c.in_window()[1].magnitude, 3.0);
    EXPECT_DOUBLE_EQ(c.in_window()[2].magnitude, 2.0);
    EXPECT_DOUBLE_EQ(c.in_window()[3].magnitude, 2.0);
}

TEST(Catalog, CommentsAndExtraColumns) {
    std::vector<std::string> warnings;
    const auto c = parse_catalog("# a comment\nmagnitude,depth,time\n3.0,10,1.5\n# mid\n2.5,5,0.5\n",
                                 &warnings);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_DOUBLE_EQ(c.in_window()[0].time, 0.5);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("depth"), std::string::npos);
}

TEST(Catalog, DatetimeModeConvertsToDays) {
    const auto c = parse_catalog(
        "datetime,magnitude\n2011-03-19T12:00:00,3.0\n2011-03-18T00:00:00Z,2.6\n2011-03-20,2.9\n");
    ASSERT_EQ(c.size(), 3u);
    EXPECT_DOUBLE_EQ(c.in_window()[0].time, 0.0);
    EXPECT_DOUBLE_EQ(c.in_window()[1].time, 1.5);
    EXPECT_DOUBLE_EQ(c.in_window()[2].time, 2.0);
    EXPECT_EQ(c.origin_epoch, "2011-03-18T00:00:00Z");
}

TEST(Catalog, DatetimeUsesDeclaredOrigin) {
    const auto c =
        parse_catalog("# origin_epoch=2011-03-17\ndatetime,magnitude\n2011-03-18T06:00,3.0\n");
    EXPECT_DOUBLE_EQ(c.in_window()[0].time, 1.25);
}

TEST(Catalog, RejectsMalformedRowsWithLineNumber) {
    try {
        (void)parse_catalog("time,magnitude\n1.0,2.0\n1.5,abc\n");
        FAIL() << "expected parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    EXPECT_THROW((void)parse_catalog("time,magnitude\nnan,2.0\n"), Error);
    EXPECT_THROW((void)parse_catalog("time,magnitude\ninf,2.0\n"), Error);
    EXPECT_THROW((void)parse_catalog("time,magnitude\n1.0\n"), Error);
    EXPECT_THROW((void)parse_catalog("when,magnitude\n1.0,2.0\n"), Error);
    EXPECT_THROW((void)parse_catalog(""), Error);
    EXPECT_THROW((void)parse_catalog("datetime,magnitude\n2011-13-01,2.0\n"), Error);
}

TEST(Catalog, FilterThresholdIsInclusive) {
    const auto c = make_catalog({{1, 2.5}, {2, 3.0}, {3, 4.1}}, 0, 10, 2.0);
    const auto f = filter_catalog(c, 3.0, 0, 10);
    EXPECT_EQ(f.size(), 2u);
    EXPECT_DOUBLE_EQ(f.threshold, 3.0);
}

TEST(Catalog, FilterWindowSemantics) {
    const auto c = make_catalog({{5, 3}, {12, 3}, {25, 3}}, 0, 30, 2.0);
    const auto f = filter_catalog(c, 2.0, 10, 20, 0);
    ASSERT_EQ(f.history().size(), 1u);
    EXPECT_DOUBLE_EQ(f.history()[0].time, 5.0);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_DOUBLE_EQ(f.in_window()[0].time, 12.0);
    EXPECT_THROW((void)filter_catalog(c, 2.0, 10, 5, 0), Error);
    EXPECT_THROW((void)filter_catalog(c, 2.0, 10, 20, 11), Error);
}

TEST(Catalog, EmptyFilterResultAllowed) {
    const auto c = make_catalog({{5, 3}}, 0, 30, 2.0);
    EXPECT_TRUE(filter_catalog(c, 9.0, 0, 30).empty());
}

TEST(Catalog, FilterIsIdempotent) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 100), m(2, 5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Event> ev;
        for (int i = 0; i < 50; ++i) ev.push_back({u(rng), m(rng)});
        const auto c = make_catalog(ev, 0, 100, 2.0);
        const auto f1 = filter_catalog(c, 3.0, 20, 80, 10);
        const auto f2 = filter_catalog(f1, 3.0, 20, 80, 10);
        EXPECT_EQ(f1, f2);
    }
}

TEST(Catalog, SerializeParseRoundTripProperty) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1000), m(2.5, 7);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<Event> ev;
        const int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) ev.push_back({u(rng) * std::exp(-3.0 * trial / 25), m(rng)});
        auto c = filter_catalog(make_catalog(ev, 0, 1000, 2.5), 2.5, 100 * (trial % 3), 1000, 0);
        c.origin_epoch = trial % 2 ? "2011-03-11T05:46:18Z" : "";
        const auto once = parse_catalog(serialize_catalog(c));
        EXPECT_EQ(once, c);
        EXPECT_EQ(parse_catalog(serialize_catalog(once)), once);
    }
}

}  // namespace
}  // namespace etas
