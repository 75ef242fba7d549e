import sys

import pytest

from demobench import data
from demobench.ingest import load_benchmark, load_cohort, load_schema
from demobench.model import AttributeSchema, GroupCounts, ObservedCohort, Phase

COHORT_FILES = {"adp": "adp.csv", "ripplematch": "ripplematch.csv", "sheppardmullin": "sheppardmullin.csv"}


@pytest.fixture(scope="session")
def race_sex():
    return load_schema(data.read("race_sex_schema.json"))


@pytest.fixture(scope="session")
def usa(race_sex):
    return load_benchmark(data.read("usa_workforce.csv"), schema=race_sex, name="usa", source="usa_workforce.csv")


@pytest.fixture(scope="session")
def nyc(race_sex):
    return load_benchmark(data.read("nyc_population.csv"), schema=race_sex, name="nyc", source="nyc_population.csv")


@pytest.fixture(scope="session")
def cohorts(race_sex):
    return {
        key: load_cohort(data.read(name), race_sex, phase=Phase.PRODUCTION, source=name)
        for key, name in COHORT_FILES.items()
    }


@pytest.fixture
def ab():
    return AttributeSchema((("g", ("A", "B")),))


@pytest.fixture
def abc():
    return AttributeSchema((("g", ("A", "B", "C")),))


def make_cohort(schema, counts, phase=Phase.PRODUCTION, label="c", window=None):
    """counts: {value-or-tuple: (total, positive[, tp, fp, fn, tn])}"""
    built = {}
    for values, c in counts.items():
        values = values if isinstance(values, tuple) else (values,)
        built[schema.key(values)] = GroupCounts(*c)
    return ObservedCohort(label, phase, schema, built, window=window)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
