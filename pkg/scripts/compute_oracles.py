"""Spreadsheet-style recomputation of disparity values from the fixture files.

Deliberately independent of the demobench package: plain csv parsing and
per-row arithmetic. Output is pasted into tests/golden_values.py.
"""

import csv
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "demobench" / "data"


def rows(name):
    with open(DATA / name, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def column(name, field):
    return [float(r[field]) for r in rows(name)]


def shares(values):
    total = 0.0
    for v in values:
        total += v
    return [v / total for v in values]


def main():
    usa = shares(column("usa_workforce.csv", "percent"))
    print("USA =", repr(usa))
    for cohort in ("adp", "ripplematch", "sheppardmullin"):
        actual = shares(column(f"{cohort}.csv", "total"))
        positive = shares(column(f"{cohort}.csv", "positive"))
        dd = [p - r for p, r in zip(usa, actual)]
        ddp = [p - s for p, s in zip(usa, positive)]
        tdd = 0.0
        tddp = 0.0
        ndd_terms = []
        nddp_terms = []
        for i in range(len(usa)):
            tdd += abs(dd[i])
            tddp += abs(ddp[i])
            if usa[i] > 0:
                ndd_terms.append(abs(dd[i]) / usa[i])
                nddp_terms.append(abs(ddp[i]) / usa[i])
        ndd = 0.0
        for t in ndd_terms:
            ndd += t
        nddp = 0.0
        for t in nddp_terms:
            nddp += t
        print(f"{cohort.upper()}_DD =", repr(dd))
        print(f"{cohort.upper()}_DDP =", repr(ddp))
        print(f"{cohort.upper()}_TDD =", repr(tdd))
        print(f"{cohort.upper()}_NDD =", repr(ndd / len(ndd_terms)))
        print(f"{cohort.upper()}_TDDP =", repr(tddp))
        print(f"{cohort.upper()}_NDDP =", repr(nddp / len(nddp_terms)))

    nyc = column("nyc_population.csv", "count")
    total = sum(nyc)
    print("NYC_PERCENT =", repr([100 * c / total for c in nyc]))


if __name__ == "__main__":
    main()
