#!/usr/bin/env python3
"""Write a synthetic stand-in for the Tokyo monthly mean daily-maximum table.

The real table (JMA, station 47662) could not be retrieved when the repository
was assembled. This script produces a plausible-looking placeholder with the
same schema so that every code path can run. Numbers derived from it are NOT
the real climate record. Replace data/tokyo_tmax_monthly.csv with a genuine
export to get real values; the loader accepts the same format.
"""

import argparse

import numpy as np

# rough late-19th-century monthly climatology for Tokyo, degrees C
BASE = [8.6, 9.2, 12.3, 17.6, 21.7, 24.3, 28.0, 29.7, 26.1, 20.6, 15.6, 11.0]
MONTHS = ["jan", "feb", "mar", "apr", "may", "jun",
          "jul", "aug", "sep", "oct", "nov", "dec"]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/tokyo_tmax_monthly.csv")
    parser.add_argument("--seed", type=int, default=47662)
    parser.add_argument("--first", type=int, default=1876)
    parser.add_argument("--last", type=int, default=2021)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    span = args.last - args.first
    lines = [
        "# SYNTHETIC PLACEHOLDER - not observed data.",
        f"# generated by tools/make_placeholder_climate.py --seed {args.seed}",
        "# replace with the JMA monthly mean daily maximum table for Tokyo (block 47662)",
        "year," + ",".join(MONTHS),
    ]
    for year in range(args.first, args.last + 1):
        frac = (year - args.first) / span
        trend = 1.1 * frac + 1.3 * frac ** 3
        common = rng.normal(0.0, 0.45)
        values = []
        for base in BASE:
            v = base + trend + common + rng.normal(0.0, 1.1)
            values.append(f"{v:.1f}")
        lines.append(f"{year}," + ",".join(values))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
