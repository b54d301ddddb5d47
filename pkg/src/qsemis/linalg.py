"""Cyclic-Jacobi Hermitian eigensolver and central finite-difference stencils."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy

SUPPORTED_ORDERS = (2, 4, 6, 8)


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class HermitianEig:
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def eig_hermitian(m, tol: float = 1e-14, max_sweeps: int = 100) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.

    The input is symmetrised first. Eigenvalues come back ascending and each
    eigenvector is phase-fixed so that its first non-negligible entry is real
    and positive.
    """
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    k = a.shape[0]
    a = (a + a.conj().T) / 2
    v = np.eye(k, dtype=complex)
    scale = max(np.abs(a).max(), np.finfo(float).tiny)

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300 or r < 1e-18 * scale:
                    continue
                phase = apq / r
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2 * r)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1))
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                # columns p, q <- A U with U = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                u_pp, u_pq = c, s
                u_qp, u_qq = -s * np.conj(phase), c * np.conj(phase)
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cp * u_pp + cq * u_qp
                a[:, q] = cp * u_pq + cq * u_qq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = np.conj(u_pp) * rp + np.conj(u_qp) * rq
                a[q, :] = np.conj(u_pq) * rp + np.conj(u_qq) * rq
                a[p, q] = a[q, p] = 0.0
                a[p, p], a[q, q] = a[p, p].real, a[q, q].real
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * u_pp + vq * u_qp
                v[:, q] = vp * u_pq + vq * u_qq
    else:
        raise NumericalError(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")

    values = np.diag(a).real.copy()
    order = np.argsort(values, kind="stable")
    values, v = values[order], v[:, order]
    for j in range(k):
        col = v[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-10)
        if lead.size:
            z = col[lead[0]]
            v[:, j] = col * (abs(z) / z)
    return HermitianEig(values, v)


@dataclass(frozen=True)
class Stencil:
    """Central first-derivative stencil: f'(0) ~ sum_j c_j f(o_j h) / h."""

    p: int
    offsets: tuple[int, ...]
    coefficients: tuple[Fraction, ...]
    interpolation: tuple[Fraction, ...]

    @property
    def c_of_p(self) -> Fraction:
        return sum((c * c for c in self.coefficients), Fraction(0))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.array(self.offsets, dtype=float),
            np.array([float(c) for c in self.coefficients]),
            np.array([float(c) for c in self.interpolation]),
        )


def _moment_solve(offsets: tuple[int, ...], derivative: int) -> tuple[Fraction, ...]:
    # sum_j c_j o_j^m = m! * delta(m, derivative) for m = 0 .. len(offsets)-1
    size = len(offsets)
    vander = sympy.Matrix(size, size, lambda m, j: sympy.Integer(offsets[j]) ** m)
    rhs = sympy.Matrix(size, 1, lambda m, _: sympy.factorial(derivative) if m == derivative else 0)
    sol = vander.LUsolve(rhs)
    return tuple(Fraction(int(sympy.fraction(c)[0]), int(sympy.fraction(c)[1])) for c in sol)


@lru_cache(maxsize=None)
def stencil_coefficients(p: int) -> Stencil:
    """Order-``p`` symmetric stencil on offsets +-1 .. +-p/2 (no centre point).

    Also carries the matching interpolation weights for f(0), used when the
    t = 0 sample is not part of the grid.
    """
    if p not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported stencil order {p}; choose from {SUPPORTED_ORDERS}")
    half = p // 2
    offsets = tuple(list(range(-half, 0)) + list(range(1, half + 1)))
    return Stencil(p, offsets, _moment_solve(offsets, 1), _moment_solve(offsets, 0))
