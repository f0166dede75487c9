#!/usr/bin/env python3
"""Stub describing how to assemble the historical dataset.

The crypto close prices are licensed and cannot be bundled or fetched
automatically; this script only prints the recipe. See data/README.md for
the full schema.
"""

import sys

RECIPE = """\
Assemble the six-asset dataset by hand:

1. Industry series (daily, value weighted):
   https://mba.tuck.dartmouth.edu/pages/faculty/ken.french/data_library.html
   -> "5 Industry Portfolios [Daily]". Keep Cnsmr, Manuf, HiTec, Hlth
   (drop "Other"), convert percent returns r to a price index via
   P_t = P_{t-1} * (1 + r_t / 100), P_0 = 100.

2. BTC and ETH daily closes from your market-data provider, one price per
   calendar day, 2017-09-08 .. 2024-09-22.

3. Merge into prices.csv (header: date,BTC,ETH,Cnsmr,Manuf,HiTec,Hlth;
   empty cells where a series has no price) and write assets.csv as
   documented in data/README.md.

4. Validate and run:
   RISKALLOC_HISTORICAL_DATA=/path/to/dir pytest tests/test_acceptance.py -v -s
"""


def main() -> int:
    sys.stderr.write(RECIPE)
    sys.stderr.write("\nNothing was downloaded (licensed data).\n")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
