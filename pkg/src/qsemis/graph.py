"""Graphs, seeded Erdos-Renyi generation, edge-list I/O and the exact MIS oracle.

Bit convention used throughout the package: basis index ``x`` encodes vertex
``i`` in bit ``i`` (LSB = vertex 0). Ket labels are written with vertex 0 on
the left, so the ket ``"0111000"`` is the index ``0b0001110``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

#: Identifier of the generator behind :func:`generate_er`; recorded in outputs.
RNG_ALGORITHM = "numpy.random.PCG64/default_rng"

#: Default exhaustive-enumeration bound for :func:`brute_force_mis`.
MAX_ORACLE_VERTICES = 24

FIXTURES = {"g3": "g3.edges", "k33p": "k33p.edges"}


class GraphError(ValueError):
    """Invalid graph data or an edge-list document that cannot be parsed."""


class InfeasibleSizeError(ValueError):
    """The instance exceeds a configured exhaustive/statevector bound."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"vertex count must be >= 1, got {self.n}")
        canon = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"endpoint out of range: ({i}, {j}) with n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def density(self) -> float:
        pairs = self.n * (self.n - 1) / 2
        return self.num_edges / pairs if pairs else 0.0

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency_masks(self) -> list[int]:
        """Neighbourhood of every vertex as an integer bitmask."""
        masks = [0] * self.n
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def to_text(self) -> str:
        lines = [str(self.n)] + [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Short content hash of the canonical edge list."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MisOracle:
    """All maximum independent sets of a graph, found exhaustively."""

    n: int
    size: int
    indices: tuple[int, ...] = field(default=())

    @property
    def count(self) -> int:
        return len(self.indices)

    @property
    def solutions(self) -> list[str]:
        return [index_to_ket(x, self.n) for x in self.indices]


def index_to_ket(x: int, n: int) -> str:
    return "".join("1" if (x >> i) & 1 else "0" for i in range(n))


def ket_to_index(ket: str) -> int:
    if set(ket) - {"0", "1"}:
        raise GraphError(f"not a bitstring: {ket!r}")
    return sum(1 << i for i, c in enumerate(ket) if c == "1")


def parse_graph(text: str) -> Graph:
    """Parse an edge-list document.

    ``#`` lines and blank lines are skipped. The first data line holds the
    vertex count; every following line holds one ``i j`` pair. Duplicate
    edges collapse; errors name the offending line.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise GraphError(f"line {lineno}: malformed line {raw!r}") from None
        if n is None:
            if len(values) != 1 or values[0] < 1:
                raise GraphError(f"line {lineno}: expected a positive vertex count, got {raw!r}")
            n = values[0]
            continue
        if len(values) != 2:
            raise GraphError(f"line {lineno}: expected 'i j', got {raw!r}")
        i, j = values
        if i == j:
            raise GraphError(f"line {lineno}: self-loop on vertex {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"line {lineno}: endpoint out of range ({i}, {j}) for n={n}")
        edges.append((i, j))
    if n is None:
        raise GraphError("empty document: missing vertex count")
    return Graph(n, tuple(edges))


def read_graph(path: str | Path) -> Graph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def load_fixture(name: str) -> Graph:
    """Load a named fixture shipped with the package (``g3`` or ``k33p``)."""
    try:
        fname = FIXTURES[name.lower()]
    except KeyError:
        raise GraphError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return parse_graph(resources.files("qsemis.data").joinpath(fname).read_text(encoding="utf-8"))


def generate_er(n: int, rho: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, rho): each pair (i < j), in lexicographic order, kept
    independently with probability ``rho`` using ``default_rng(seed)``."""
    if n < 1:
        raise GraphError(f"n must be >= 1, got {n}")
    if not 0.0 <= rho <= 1.0:
        raise GraphError(f"rho must lie in [0, 1], got {rho}")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < rho
    return Graph(n, tuple(p for p, k in zip(pairs, keep) if k))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def is_independent(g: Graph, x: int | str) -> bool:
    """True iff no edge has both endpoints selected in ``x`` (index or ket)."""
    if isinstance(x, str):
        if len(x) != g.n:
            raise GraphError(f"bitstring length {len(x)} does not match n={g.n}")
        x = ket_to_index(x)
    elif not 0 <= x < (1 << g.n):
        raise GraphError(f"index {x} out of range for n={g.n}")
    return not any((x >> i) & 1 and (x >> j) & 1 for i, j in g.edges)


def independent_mask(g: Graph) -> np.ndarray:
    """Boolean array over all 2^n indices flagging independent sets."""
    x = np.arange(1 << g.n, dtype=np.int64)
    ok = np.ones(x.shape, dtype=bool)
    for i, nb in enumerate(g.adjacency_masks()):
        if nb:
            ok &= ~((((x >> i) & 1) == 1) & ((x & nb) != 0))
    return ok


def brute_force_mis(g: Graph, max_n: int = MAX_ORACLE_VERTICES) -> MisOracle:
    """Enumerate every bitstring and keep the largest independent ones."""
    if g.n > max_n:
        raise InfeasibleSizeError(
            f"exhaustive MIS enumeration refused: n={g.n} exceeds bound {max_n}"
        )
    x = np.arange(1 << g.n, dtype=np.int64)
    ok = independent_mask(g)
    weight = np.zeros(x.shape, dtype=np.int64)
    for i in range(g.n):
        weight += (x >> i) & 1
    weight = np.where(ok, weight, -1)
    size = int(weight.max())
    return MisOracle(g.n, size, tuple(int(v) for v in np.flatnonzero(weight == size)))


def popcounts(n: int) -> np.ndarray:
    x = np.arange(1 << n, dtype=np.int64)
    out = np.zeros(x.shape, dtype=np.int64)
    for i in range(n):
        out += (x >> i) & 1
    return out

