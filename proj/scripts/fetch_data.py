#!/usr/bin/env python3
"""Where to get the commodity price series, and a converter to date,price CSV.

The series are not redistributed with this repository. Download the monthly
tables yourself from the publishers below, then convert the column you need:

    scripts/fetch_data.py sources
    scripts/fetch_data.py convert CMO-Historical-Data-Monthly.csv \
        --column "Coffee, Other Mild Arabicas" --start 1989-01 --end 2018-12 \
        -o data/coffee.csv
"""

import argparse
import csv
import re
import sys

SOURCES = {
    "coffee": (
        "Coffee, Other Mild Arabicas, New York cash price, ex-dock New York, US cents per pound",
        "IMF Primary Commodity Prices (monthly); World Bank Commodity Price Data (Pink Sheet)",
    ),
    "cotton": (
        "Cotton, average spot price for Upland cotton, color 41, leaf 4, staple 34, US cents per pound",
        "IMF Primary Commodity Prices (monthly)",
    ),
    "aluminum": (
        "Aluminum, LME, unalloyed primary ingots, high grade, min. 99.7% purity, USD per metric ton",
        "IMF Primary Commodity Prices (monthly); World Bank Pink Sheet",
    ),
    "natgas": (
        "Natural gas, US, spot price at Henry Hub, Louisiana, USD per MMBtu",
        "IMF Primary Commodity Prices (monthly); World Bank Pink Sheet; US EIA",
    ),
}

# 1989M01, 1989-01, 1989-01-15, 1989/01
DATE_PATTERNS = [
    re.compile(r"^(\d{4})M(\d{1,2})$"),
    re.compile(r"^(\d{4})[-/](\d{1,2})(?:[-/]\d{1,2})?$"),
]


def parse_month(text):
    text = text.strip()
    for pat in DATE_PATTERNS:
        m = pat.match(text)
        if m:
            year, month = int(m.group(1)), int(m.group(2))
            if 1 <= month <= 12:
                return f"{year:04d}-{month:02d}"
    return None


def convert(args):
    with open(args.input, newline="", encoding="utf-8-sig") as f:
        rows = list(csv.reader(f))
    header_row = next(
        (i for i, r in enumerate(rows) if any(c.strip() == args.column for c in r)), None
    )
    if header_row is None:
        sys.exit(f"column {args.column!r} not found in {args.input}")
    col = [c.strip() for c in rows[header_row]].index(args.column)

    out, skipped = [], 0
    for r in rows[header_row + 1 :]:
        if not r or col >= len(r):
            continue
        month = parse_month(r[0])
        if month is None:
            continue
        if (args.start and month < args.start) or (args.end and month > args.end):
            continue
        try:
            price = float(r[col].replace(",", ""))
        except ValueError:
            skipped += 1
            continue
        if price > 0:
            out.append((month, price))
        else:
            skipped += 1
    out.sort()
    if len(out) < 2:
        sys.exit("fewer than two usable observations")

    dest = open(args.output, "w", newline="") if args.output else sys.stdout
    with dest:
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(["date", "price"])
        w.writerows((m, repr(p)) for m, p in out)
    print(f"{len(out)} months, {skipped} unusable cells skipped", file=sys.stderr)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("sources", help="list the series and where they are published")
    c = sub.add_parser("convert", help="extract one column of a monthly table as date,price")
    c.add_argument("input")
    c.add_argument("--column", required=True, help="header text of the price column")
    c.add_argument("--start", help="first month kept, YYYY-MM")
    c.add_argument("--end", help="last month kept, YYYY-MM")
    c.add_argument("-o", "--output", help="output file (default stdout)")
    args = ap.parse_args()

    if args.cmd == "sources":
        for name, (series, where) in SOURCES.items():
            print(f"{name}\n  series: {series}\n  source: {where}")
    else:
        convert(args)


if __name__ == "__main__":
    main()
