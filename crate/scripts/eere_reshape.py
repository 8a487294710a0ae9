#!/usr/bin/env python3
"""Reshape the OpenEI commercial hourly load profiles into smooth-ntf input CSVs.

Download the per-location building files from
https://openei.org/doe-opendata/dataset/commercial-and-residential-hourly-load-profiles-for-all-tmy3-locations-in-the-united-states
into one directory, then fetch daily mean outdoor temperatures for the matching
TMY3 stations (the `eeweather` package does this) into a CSV with columns
`site,date,temp`. `site` is the building file name without `.csv`; `date` is
`MM-DD` or `YYYY-MM-DD`.

    python3 scripts/eere_reshape.py --profiles profiles/ --temps daily_temps.csv --out eere/

writes `loads.csv`, `temps.csv` and `truth_labels.csv` (building type per site,
taken from the `RefBldg<Type><Vintage>` file name prefix). Then:

    smooth-ntf fit --loads eere/loads.csv --temps eere/temps.csv --rank 6 --alpha 3000 --beta 3000 --out eere/fit
    smooth-ntf cluster --factors eere/fit/C.csv --k 5 --truth eere/truth_labels.csv --out eere/cluster
"""

import argparse
import csv
import re
import sys
from collections import defaultdict
from pathlib import Path

LOAD_COLUMN = "Electricity:Facility [kW](Hourly)"
STAMP = re.compile(r"\s*(\d{2})/(\d{2})\s+(\d{2}):\d{2}:\d{2}")
BUILDING = re.compile(r"RefBldg(.+?)(New2004|Pre1980|Post1980)")


def read_profile(path, column):
    """Hourly loads keyed by (MM-DD, hour); the files stamp the end of each hour."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if column not in reader.fieldnames:
            sys.exit(f"{path}: no column {column!r}")
        out = {}
        for row in reader:
            m = STAMP.match(row["Date/Time"])
            if not m:
                sys.exit(f"{path}, line {reader.line_num}: unreadable time {row['Date/Time']!r}")
            month, day, hour = m.groups()
            out[(f"{month}-{day}", int(hour) - 1)] = float(row[column])
        return out


def read_temps(path):
    temps = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            temps[(row["site"], row["date"][-5:])] = float(row["temp"])
    return temps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profiles", type=Path, required=True, help="directory of building CSV files")
    ap.add_argument("--temps", type=Path, required=True, help="daily temperatures (site,date,temp)")
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--column", default=LOAD_COLUMN, help="load column to extract")
    args = ap.parse_args()

    files = sorted(args.profiles.glob("*.csv"))
    if not files:
        sys.exit(f"{args.profiles}: no CSV files")
    temps = read_temps(args.temps)
    args.out.mkdir(parents=True, exist_ok=True)

    with open(args.out / "loads.csv", "w", newline="") as lf, \
            open(args.out / "temps.csv", "w", newline="") as tf, \
            open(args.out / "truth_labels.csv", "w", newline="") as gf:
        loads, tout, truth = csv.writer(lf), csv.writer(tf), csv.writer(gf)
        loads.writerow(["site", "day", "time", "load"])
        tout.writerow(["site", "day", "temp"])
        truth.writerow(["site", "label"])
        for path in files:
            site = path.stem
            kind = BUILDING.search(site)
            truth.writerow([site, kind.group(1) if kind else "unknown"])
            by_day = defaultdict(dict)
            for (day, hour), value in read_profile(path, args.column).items():
                by_day[day][hour] = value
            for day in sorted(by_day):
                if (site, day) not in temps:
                    continue
                for hour, value in sorted(by_day[day].items()):
                    loads.writerow([site, day, f"{hour:02d}:00", repr(value)])
                tout.writerow([site, day, temps[(site, day)]])


if __name__ == "__main__":
    main()
