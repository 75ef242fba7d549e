"""Regenerate the bundled race x sex fixtures from published figures.

The audit reports only publish percentages, so cohorts are rebuilt at a fixed scale:
total = round(percent * 1000) (about 100000 applicants) and
positive = round(positive_percent * 100) (about 10000 selections).
"""

import json
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "demobench" / "data"

RACES = [
    "American Indian and Alaska Native alone",
    "Asian alone",
    "Black or African American alone",
    "Hispanic or Latino",
    "Native Hawaiian and Other Pacific Islander alone",
    "Some Other Race alone",
    "Two or More Races",
    "White alone",
]
SEXES = ["Female", "Male"]

# code order: race-major, Female before Male
NYC_COUNTS = [7942, 7292, 613474, 542064, 816201, 647805, 1051246, 924348,
              1596, 1182, 47297, 43784, 127611, 103630, 1198658, 1126478]
USA_PERCENT = ["0.31", "0.30", "3.77", "3.32", "6.97", "5.97", "10.45", "10.03",
               "0.11", "0.11", "0.25", "0.25", "1.85", "1.64", "28.11", "26.56"]
AUDIT_COLUMNS = {
    "adp": (
        [0.2, 0.13, 5.6, 7.16, 15.84, 9.10, 9.08, 8.30, 0.12, 0.10, 0.0, 0.0, 2.24, 1.44, 20.99, 19.71],
        [0.2, 0.13, 5.34, 6.34, 15.64, 8.80, 9.09, 8.23, 0.11, 0.10, 0.0, 0.0, 2.28, 1.43, 22.13, 20.18],
    ),
    "ripplematch": (
        [0.21, 0.44, 24.82, 36.16, 3.22, 6.19, 1.82, 4.73, 0.03, 0.09, 0.0, 0.0, 5.19, 2.31, 5.23, 9.55],
        [0.16, 0.33, 24.7, 34.84, 3.31, 6.38, 1.81, 5.05, 0.04, 0.08, 0.0, 0.0, 5.83, 2.49, 5.51, 9.48],
    ),
    "sheppardmullin": (
        [0.07, 0.07, 11.23, 6.75, 5.70, 2.89, 6.31, 5.20, 0.02, 0.04, 0.0, 0.0, 2.79, 2.05, 28.18, 28.69],
        [0.06, 0.09, 10.70, 6.99, 5.90, 3.06, 7.06, 5.38, 0.03, 0.05, 0.0, 0.0, 2.78, 2.00, 29.77, 26.14],
    ),
}
TITLES = {"adp": "ADP", "ripplematch": "RippleMatch", "sheppardmullin": "SheppardMullin"}


def groups():
    return [(race, sex) for race in RACES for sex in SEXES]


def main():
    schema = {"attributes": [{"name": "race", "values": RACES}, {"name": "sex", "values": SEXES}]}
    (DATA / "race_sex_schema.json").write_text(json.dumps(schema, indent=2) + "\n", encoding="utf-8")

    lines = [
        "# New York City population aged 16+ by race x sex, U.S. Census Bureau 2020.",
        "# Race categories exclude Hispanic or Latino.",
        "# Correction: the published count for Black or African American alone, Male",
        "# reads 657805; 647805 is used because it is the only value consistent with",
        "# the published 8.92% and with every other row's percentage.",
        "race,sex,count",
    ]
    lines += [f"{r},{s},{c}" for (r, s), c in zip(groups(), NYC_COUNTS)]
    (DATA / "nyc_population.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = [
        "# USA active workforce (aged 16+) by race x sex, percent of total,",
        "# U.S. Census Bureau 2020. Race categories exclude Hispanic or Latino.",
        "race,sex,percent",
    ]
    lines += [f"{r},{s},{p}" for (r, s), p in zip(groups(), USA_PERCENT)]
    (DATA / "usa_workforce.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    for key, (total_pct, pos_pct) in AUDIT_COLUMNS.items():
        lines = [
            f"# {TITLES[key]} NYC Local Law 144 bias audit, applicants and selections by",
            "# race x sex (public audit report, ACLU tracking-ll144-bias-audits).",
            "# Counts rebuilt from the published percentages:",
            "# total = round(percent * 1000), positive = round(positive percent * 100).",
            "race,sex,total,positive",
        ]
        for (r, s), t, p in zip(groups(), total_pct, pos_pct):
            total = round(t * 1000)
            positive = round(p * 100)
            assert positive <= total
            lines.append(f"{r},{s},{total},{positive}")
        (DATA / f"{key}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
