"""Fault-tolerant gate accounting, the cost-to-fidelity rule and crossover extrapolation.

Gate counts are leading-order formulas and are returned as floats without
rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import stencil_coefficients

GATES = ("RZZ", "CRZZ", "CnZZ")
METHODS = ("Pauli", "RTE", "LCU")


@dataclass(frozen=True)
class ResourceCount:
    cnot: float = 0.0
    t_gates: float = 0.0
    toffoli: float = 0.0
    ancillas: float = 0.0

    def __add__(self, other: "ResourceCount") -> "ResourceCount":
        return ResourceCount(self.cnot + other.cnot, self.t_gates + other.t_gates,
                             self.toffoli + other.toffoli, self.ancillas + other.ancillas)

    def scaled(self, factor: float) -> "ResourceCount":
        return ResourceCount(self.cnot * factor, self.t_gates * factor,
                             self.toffoli * factor, self.ancillas * factor)


def _check_epsilon(epsilon: float):
    if not 0 < epsilon < 1:
        raise ValueError(f"rotation synthesis error must lie in (0, 1), got {epsilon}")


def basic_gate_cost(gate: str, epsilon: float = 1e-10, n: int | None = None) -> ResourceCount:
    """Clifford+T cost of RZZ, CRZZ and the n-controlled CnZZ.

    Rotations use ~4 log2(1/eps) T gates each (two per RZZ/CRZZ); CnZZ is two
    n-controlled NOTs built from (n - 1) Toffolis around a CZZ.
    """
    if gate == "RZZ":
        _check_epsilon(epsilon)
        return ResourceCount(2, 8 * math.log2(1 / epsilon), 0, 0)
    if gate == "CRZZ":
        _check_epsilon(epsilon)
        return ResourceCount(4, 8 * math.log2(1 / epsilon), 0, 0)
    if gate == "CnZZ":
        if n is None or n < 2:
            raise ValueError("CnZZ needs a control count n >= 2")
        return ResourceCount(12 * (n - 1) + 4, 14 * (n - 1), 2 * (n - 1), n - 1)
    raise ValueError(f"unknown gate {gate!r}; choose from {GATES}")


def lcu_control_count(N: int) -> int:
    """Integer control count ceil(2 log2 N) used for CnZZ in the LCU select."""
    return math.ceil(2 * math.log2(N))


def c_of_p(p: int) -> float:
    return float(stencil_coefficients(p).c_of_p)


def method_cost(method: str, N: int, rho: float, l_prime: int, epsilon: float = 1e-10,
                p: int = 2, h2: float | None = None) -> ResourceCount:
    """Leading-order cost of evaluating one kernel element with a given method.

    ``h2`` is an estimate of <H_C^2>, needed by LCU only. A lower bound on it
    such as <H_C>^2 from the QAOA state gives an upper bound on the cost.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    _check_epsilon(epsilon)
    log_eps = math.log2(1 / epsilon)
    if method == "Pauli":
        x = math.sqrt(rho) * N
        return ResourceCount(x**5 * (l_prime + 2), 4 * x**5 * (l_prime + 1) * log_eps, 0, 1)
    if method == "RTE":
        pc = p * c_of_p(p)
        return ResourceCount(rho * N**2 * (l_prime + 2) * pc,
                             4 * rho * N**2 * (l_prime + 1) * log_eps * pc, 0, 1)
    if method == "LCU":
        if h2 is None or h2 <= 0:
            raise ValueError("LCU cost needs a positive <H_C^2> estimate")
        scale = rho**3 * N**6
        return ResourceCount(scale * (l_prime + 4) / (4 * h2), scale * l_prime * log_eps / h2,
                             4 * math.log2(N), 4 * math.log2(N))
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def favourable_threshold(K: int, l_prime: int, f_scale: float) -> float:
    return 4 * (K - 1) * (l_prime + 1) * f_scale / l_prime


def qse_favourable(f_gcm: float, f_qaoa: float, K: int, l_prime: int, f_scale: float) -> bool:
    """True when the fidelity gain pays for the extra circuits (ratio >= threshold)."""
    if f_qaoa <= 0:
        raise ValueError("QAOA fidelity must be positive")
    if K < 2:
        raise ValueError("need K >= 2")
    return f_gcm / f_qaoa >= favourable_threshold(K, l_prime, f_scale)


@dataclass(frozen=True)
class FermiDiracFit:
    """Fidelity model beta / (1 + exp(N alpha))."""

    alpha: float
    beta: float
    residual: float = 0.0
    low_confidence: bool = False

    def __call__(self, N):
        return self.beta / (1 + np.exp(np.asarray(N, dtype=float) * self.alpha))

    def log_value(self, N: float) -> float:
        return math.log(self.beta) - np.logaddexp(0.0, N * self.alpha)


def _best_beta(alpha: float, N: np.ndarray, F: np.ndarray) -> float:
    g = 1 / (1 + np.exp(N * alpha))
    beta = float(np.dot(g, F) / np.dot(g, g))
    # keep the curve inside [0, 1] on the fitted range
    return float(min(max(beta, 1e-12), 1 / g.max()))


def _sse(alpha: float, N: np.ndarray, F: np.ndarray) -> float:
    beta = _best_beta(alpha, N, F)
    return float(np.sum((beta / (1 + np.exp(N * alpha)) - F) ** 2))


def fit_fermi_dirac(points: Iterable[Sequence[float]], alpha_range: tuple[float, float] = (-2.0, 3.0),
                    grid_size: int = 2001) -> FermiDiracFit:
    """Least-squares fit of beta / (1 + exp(N alpha)) to (N, fidelity) points.

    beta is eliminated in closed form for each alpha; alpha is located on a
    coarse grid, then refined by a bounded scalar search around the best node.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (N, fidelity) points")
    N, F = pts[:, 0], pts[:, 1]
    if np.ptp(N) == 0:
        raise ValueError("degenerate data: all points share the same N")
    if np.any(F <= 0) or np.any(F > 1):
        raise ValueError("fidelities must lie in (0, 1]")

    alphas = np.linspace(*alpha_range, grid_size)
    sse = np.array([_sse(a, N, F) for a in alphas])
    i = int(np.argmin(sse))
    lo, hi = alphas[max(i - 1, 0)], alphas[min(i + 1, grid_size - 1)]
    res = minimize_scalar(_sse, bounds=(lo, hi), args=(N, F), method="bounded",
                          options={"xatol": 1e-12})
    alpha = float(res.x) if res.fun <= sse[i] else float(alphas[i])
    beta = _best_beta(alpha, N, F)
    residual = float(np.sqrt(_sse(alpha, N, F) / len(N)))
    # nearly flat data: alpha barely constrained, the fit says little about decay
    low = abs(alpha) * np.ptp(N) < 1e-3 or i in (0, grid_size - 1)
    return FermiDiracFit(alpha, beta, residual, bool(low))


def crossover_size(fit_qaoa: FermiDiracFit, fit_qse: FermiDiracFit, K: int, rho: float,
                   max_n: int = 10_000) -> int | None:
    """Smallest N >= 2 with F_QSE(N) / F_QAOA(N) > 2 K (sqrt(rho) N)^3, else None.

    The right-hand side is the Pauli-method cost ratio of K-state QSE to QAOA.
    Evaluated in log space to survive large N.
    """
    if K < 2:
        raise ValueError("need K >= 2")
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    for N in range(2, max_n + 1):
        lhs = fit_qse.log_value(N) - fit_qaoa.log_value(N)
        rhs = math.log(2 * K) + 3 * math.log(math.sqrt(rho) * N)
        if lhs > rhs:
            return N
    return None
