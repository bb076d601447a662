#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "storagessm/ssm.hpp"

namespace storagessm {

struct MonthGap {
  YearMonth last_before;
  YearMonth first_after;
  int missing_months;
  std::size_t line;  // line of first_after
};

struct PriceData {
  PriceSeries series;  // log prices
  std::vector<MonthGap> gaps;
};

// Reads a `date,price` CSV with YYYY-MM dates and positive prices in
// increasing month order. Throws DataError naming the 1-based line for a
// malformed row, a nonpositive price, a duplicate or an out-of-order month.
// Missing months are reported in `gaps`, not rejected.
PriceData load_price_csv(const std::filesystem::path& path);

// Parses "YYYY-MM"; returns false on malformed input.
bool parse_year_month(const std::string& text, YearMonth& out);

// Writes `date,price` with price = exp(log price).
void write_price_csv(const std::filesystem::path& path, const PriceSeries& series);

}  // namespace storagessm
