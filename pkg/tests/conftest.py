import pathlib

import pytest

from pvcdb import cli
from pvcdb.prob import Distribution

DATA = pathlib.Path(__file__).parent / "data"
SHOPS = DATA / "shops"

TOL = 1e-9


def dist_close(a, b, tol=TOL):
    values = {v for v, _ in a} | {v for v, _ in b}
    return all(abs(a[v] - b[v]) <= tol for v in values)


def boolean_dist(p_true):
    entries = []
    if 1.0 - p_true > 0:
        entries.append((0, 1.0 - p_true))
    if p_true > 0:
        entries.append((1, p_true))
    return Distribution(entries)


@pytest.fixture(scope="session")
def shops_db():
    tables = [SHOPS / name for name in ("S.tsv", "PS.tsv", "P1.tsv", "P2.tsv")]
    return cli.load_database(tables, SHOPS / "probs.tsv", "bool")


@pytest.fixture(scope="session")
def q1_plan():
    return cli.parse_query((SHOPS / "q1.txt").read_text().strip())


@pytest.fixture(scope="session")
def q2_plan():
    return cli.parse_query((SHOPS / "q2.txt").read_text().strip())
