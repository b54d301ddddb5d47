"""MIS cost Hamiltonian as an exact diagonal and as Pauli-Z terms."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import Graph, InfeasibleSizeError, popcounts

#: Default statevector bound on the qubit count.
MAX_QUBITS = 24


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Integer-valued diagonal; ``values[x]`` is the energy of basis index ``x``."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} values, got shape {vals.shape}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def emin(self) -> float:
        return float(self.values.min())

    def spectral_norm(self) -> float:
        return float(np.abs(self.values).max())

    def shifted(self, shift: float) -> "DiagonalOperator":
        return DiagonalOperator(self.n, self.values - shift)


@dataclass(frozen=True)
class PauliDecomposition:
    """H = constant + sum_i z_i Z_i + sum_(i,j) zz_ij Z_i Z_j, exact in quarters."""

    n: int
    constant: Fraction
    z_coeffs: tuple[Fraction, ...]
    zz_coeffs: dict

    @property
    def num_terms(self) -> int:
        return sum(1 for c in self.z_coeffs if c != 0) + len(self.zz_coeffs)

    def one_norm(self, include_constant: bool = True) -> Fraction:
        total = sum((abs(c) for c in self.z_coeffs), Fraction(0))
        total += sum((abs(c) for c in self.zz_coeffs.values()), Fraction(0))
        return total + (abs(self.constant) if include_constant else 0)

    def diagonal(self) -> np.ndarray:
        """Evaluate every basis energy in integer arithmetic (scaled by 4)."""
        x = np.arange(1 << self.n, dtype=np.int64)
        z = [1 - 2 * ((x >> i) & 1) for i in range(self.n)]
        acc = np.full(x.shape, int(4 * self.constant), dtype=np.int64)
        for i, c in enumerate(self.z_coeffs):
            if c:
                acc += int(4 * c) * z[i]
        for (i, j), c in self.zz_coeffs.items():
            acc += int(4 * c) * z[i] * z[j]
        if np.any(acc % 4):
            raise ArithmeticError("Pauli reconstruction is not integer valued")
        return acc // 4


def cost_diagonal(g: Graph, max_qubits: int = MAX_QUBITS) -> DiagonalOperator:
    """values[x] = -popcount(x) + number of edges with both ends in x."""
    if g.n > max_qubits:
        raise InfeasibleSizeError(f"n={g.n} exceeds the statevector bound {max_qubits}")
    x = np.arange(1 << g.n, dtype=np.int64)
    values = -popcounts(g.n)
    for i, j in g.edges:
        values += ((x >> i) & 1) & ((x >> j) & 1)
    return DiagonalOperator(g.n, values)


def pauli_terms(g: Graph) -> PauliDecomposition:
    # n_i = (1 - Z_i)/2 substituted into -sum n_i + sum_E n_i n_j
    deg = g.degrees()
    constant = Fraction(-g.n, 2) + Fraction(g.num_edges, 4)
    z = tuple(Fraction(1, 2) - Fraction(d, 4) for d in deg)
    zz = {e: Fraction(1, 4) for e in g.edges}
    return PauliDecomposition(g.n, constant, z, zz)


def ground_manifold(d: DiagonalOperator) -> tuple[float, list[int]]:
    emin = d.values.min()
    return float(emin), [int(x) for x in np.flatnonzero(d.values == emin)]


def walsh_coefficients(d: DiagonalOperator) -> np.ndarray:
    """Pauli-Z string coefficients of a diagonal via a fast Walsh-Hadamard transform.

    Entry ``s`` is the coefficient of prod_{i in s} Z_i.
    """
    a = np.asarray(d.values, dtype=float).copy()
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    return a / d.dim


def pauli_one_norm(d: DiagonalOperator) -> float:
    """Sum of absolute Pauli coefficients, i.e. the LCU normalisation of ``d``."""
    return float(np.abs(walsh_coefficients(d)).sum())
