#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "storagessm/errors.hpp"
#include "storagessm/io.hpp"

using namespace storagessm;
namespace fs = std::filesystem;

namespace {

class PriceCsv : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("storagessm_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& body) {
    const auto p = dir_ / "prices.csv";
    std::ofstream(p) << body;
    return p;
  }

  std::size_t error_line(const std::string& body) {
    try {
      load_price_csv(write(body));
    } catch (const DataError& e) {
      return e.line();
    }
    ADD_FAILURE() << "no DataError";
    return 0;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(PriceCsv, ThreeRows) {
  const auto d = load_price_csv(write("date,price\n1989-01,100\n1989-02,105.5\n1989-03,98\n"));
  ASSERT_EQ(d.series.size(), 3u);
  EXPECT_DOUBLE_EQ(d.series.log_prices[0], std::log(100.0));
  EXPECT_DOUBLE_EQ(d.series.log_prices[1], std::log(105.5));
  EXPECT_DOUBLE_EQ(d.series.log_prices[2], std::log(98.0));
  EXPECT_EQ(d.series.dates[2], (YearMonth{1989, 3}));
  EXPECT_TRUE(d.gaps.empty());
  EXPECT_EQ(d.series.label, "prices");
}

TEST_F(PriceCsv, ZeroPriceNamesItsLine) {
  const std::string body = "date,price\n2001-01,5\n2001-02,6\n2001-03,7\n2001-04,0\n2001-05,8\n";
  EXPECT_EQ(error_line(body), 5u);
  try {
    load_price_csv(write(body));
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":5:"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-02,-3\n"), 3u);
}

TEST_F(PriceCsv, GapIsReportedNotRejected) {
  const auto d = load_price_csv(write("date,price\n1988-12,1\n1989-01,2\n1989-03,3\n"));
  ASSERT_EQ(d.gaps.size(), 1u);
  EXPECT_EQ(d.gaps[0].last_before, (YearMonth{1989, 1}));
  EXPECT_EQ(d.gaps[0].first_after, (YearMonth{1989, 3}));
  EXPECT_EQ(d.gaps[0].missing_months, 1);
  EXPECT_EQ(d.gaps[0].line, 4u);
  EXPECT_EQ(d.series.size(), 3u);
}

TEST_F(PriceCsv, DuplicateAndOutOfOrderMonths) {
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-02,6\n2001-02,7\n"), 4u);
  EXPECT_EQ(error_line("date,price\n2001-03,5\n2001-02,6\n"), 3u);
}

TEST_F(PriceCsv, MalformedRows) {
  EXPECT_EQ(error_line("when,price\n2001-01,5\n"), 1u);
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-1,6\n"), 3u);
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-13,6\n"), 3u);
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-02,abc\n"), 3u);
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-02,6,7\n"), 3u);
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-02\n"), 3u);
  EXPECT_EQ(error_line("date,price\n2001-01,5\n2001-02,nan\n"), 3u);
}

TEST_F(PriceCsv, ToleratesCrLfAndBlankLines) {
  const auto d = load_price_csv(write("date,price\r\n2001-01,5\r\n\r\n2001-02, 6 \r\n"));
  ASSERT_EQ(d.series.size(), 2u);
  EXPECT_DOUBLE_EQ(d.series.log_prices[1], std::log(6.0));
}

TEST_F(PriceCsv, NeedsTwoObservations) {
  EXPECT_THROW(load_price_csv(write("date,price\n2001-01,5\n")), DataError);
  EXPECT_THROW(load_price_csv(dir_ / "missing.csv"), DataError);
}

TEST_F(PriceCsv, WriteThenReadRoundTrips) {
  const auto s = PriceSeries::from_log_prices({0.1, -0.25, 1.7, 0.0});
  const auto p = dir_ / "out.csv";
  write_price_csv(p, s);
  const auto d = load_price_csv(p);
  ASSERT_EQ(d.series.size(), s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    EXPECT_EQ(d.series.dates[t], s.dates[t]);
    EXPECT_NEAR(d.series.log_prices[t], s.log_prices[t], 1e-15);
  }
}

TEST(YearMonthParse, Cases) {
  YearMonth ym;
  EXPECT_TRUE(parse_year_month("1999-12", ym));
  EXPECT_EQ(ym, (YearMonth{1999, 12}));
  EXPECT_FALSE(parse_year_month("1999-00", ym));
  EXPECT_FALSE(parse_year_month("1999/12", ym));
  EXPECT_FALSE(parse_year_month("99-12", ym));
  EXPECT_FALSE(parse_year_month("1999-1a", ym));
  EXPECT_EQ((YearMonth{1999, 12}).next(), (YearMonth{2000, 1}));
}
