import itertools

import pytest

from qsemis.graph import Graph, load_fixture


def reference_mis(g: Graph) -> tuple[int, list[str]]:
    """Largest independent vertex subsets by direct subset search, as kets."""
    adj = set(g.edges)
    for size in range(g.n, -1, -1):
        found = []
        for combo in itertools.combinations(range(g.n), size):
            if all((a, b) not in adj for a, b in itertools.combinations(combo, 2)):
                found.append("".join("1" if v in combo else "0" for v in range(g.n)))
        if found:
            return size, sorted(found)
    raise AssertionError("unreachable")


@pytest.fixture(scope="session")
def cube():
    return load_fixture("g3")


@pytest.fixture(scope="session")
def k33p():
    return load_fixture("k33p")


@pytest.fixture(scope="session")
def single_edge():
    return Graph(2, ((0, 1),))
