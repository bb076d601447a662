#include "storagessm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "storagessm/errors.hpp"

namespace storagessm {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

bool parse_year_month(const std::string& text, YearMonth& out) {
  if (text.size() != 7 || text[4] != '-') return false;
  int year = 0, month = 0;
  const char* b = text.data();
  if (std::from_chars(b, b + 4, year).ptr != b + 4) return false;
  if (std::from_chars(b + 5, b + 7, month).ptr != b + 7) return false;
  if (month < 1 || month > 12 || year < 0) return false;
  out = {year, month};
  return true;
}

PriceData load_price_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string(), 0);
  PriceData data;
  data.series.label = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file", 1);
  ++line_no;
  if (trim(line) != "date,price")
    throw DataError(path.string() + ":1: expected header 'date,price'", 1);

  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto comma = row.find(',');
    if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos)
      throw DataError(where + "expected two fields", line_no);
    YearMonth date;
    if (!parse_year_month(trim(row.substr(0, comma)), date))
      throw DataError(where + "date must be YYYY-MM", line_no);
    const std::string price_text = trim(row.substr(comma + 1));
    double price = 0.0;
    const char* pb = price_text.data();
    const char* pe = pb + price_text.size();
    const auto res = std::from_chars(pb, pe, price);
    if (price_text.empty() || res.ec != std::errc() || res.ptr != pe || !std::isfinite(price))
      throw DataError(where + "price is not a number", line_no);
    if (!(price > 0.0)) throw DataError(where + "price must be positive", line_no);

    if (!data.series.dates.empty()) {
      const YearMonth prev = data.series.dates.back();
      if (date.index() == prev.index())
        throw DataError(where + "duplicate month " + date.str(), line_no);
      if (date.index() < prev.index())
        throw DataError(where + "month " + date.str() + " is out of order", line_no);
      if (date.index() > prev.index() + 1)
        data.gaps.push_back({prev, date, date.index() - prev.index() - 1, line_no});
    }
    data.series.dates.push_back(date);
    data.series.log_prices.push_back(std::log(price));
  }
  if (data.series.size() < 2)
    throw DataError(path.string() + ": need at least two observations", line_no);
  return data;
}

void write_price_csv(const std::filesystem::path& path, const PriceSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "date,price\n";
  char buf[64];
  for (std::size_t t = 0; t < series.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%s,%.17g\n", series.dates[t].str().c_str(),
                  std::exp(series.log_prices[t]));
    out << buf;
  }
}

}  // namespace storagessm
