"""Dense statevector engine and the Hadamard-test shot model."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

import numpy as np

from .graph import popcounts
from .hamiltonian import DiagonalOperator


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (1 << self.n,):
            raise DimensionError(f"expected {1 << self.n} amplitudes, got {amps.shape}")
        object.__setattr__(self, "amps", amps)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities.sum()))


def _check(s: StateVector, d: DiagonalOperator | StateVector):
    if s.n != d.n:
        raise DimensionError(f"qubit counts differ: {s.n} vs {d.n}")


@lru_cache(maxsize=32)
def _popcount_cache(n: int) -> np.ndarray:
    pc = popcounts(n)
    pc.flags.writeable = False
    return pc


def plus_state(n: int) -> StateVector:
    return StateVector(n, np.full(1 << n, 2.0 ** (-n / 2), dtype=complex))


def basis_state(n: int, index: int) -> StateVector:
    amps = np.zeros(1 << n, dtype=complex)
    amps[index] = 1.0
    return StateVector(n, amps)


def apply_cost_phase(s: StateVector, d: DiagonalOperator, gamma: float) -> StateVector:
    """amps[x] <- exp(-i gamma E_x) amps[x]."""
    _check(s, d)
    return StateVector(s.n, np.exp(-1j * gamma * d.values) * s.amps)


def time_evolve(s: StateVector, d: DiagonalOperator, t: float) -> StateVector:
    return apply_cost_phase(s, d, t)


def mixer_amps(amps: np.ndarray, n: int, beta: float) -> np.ndarray:
    """exp(+i beta X) on every qubit of a raw amplitude array."""
    c, js = np.cos(beta), 1j * np.sin(beta)
    out = amps
    for i in range(n):
        v = out.reshape(-1, 2, 1 << i)
        a0, a1 = v[:, 0], v[:, 1]
        out = np.stack((c * a0 + js * a1, js * a0 + c * a1), axis=1).reshape(-1)
    return out


def apply_mixer(s: StateVector, beta: float) -> StateVector:
    """Apply exp(-i beta H_M) with H_M = -sum_i X_i."""
    return StateVector(s.n, mixer_amps(s.amps, s.n, beta))


def inner(a: StateVector, b: StateVector) -> complex:
    _check(a, b)
    return complex(np.vdot(a.amps, b.amps))


def expect_diagonal(s: StateVector, d: DiagonalOperator) -> float:
    _check(s, d)
    return float(np.dot(d.values, s.probabilities))


def projector_fidelity(s: StateVector, indices: Iterable[int]) -> float:
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= (1 << s.n)):
        raise IndexError("basis index out of range")
    return float(s.probabilities[idx].sum())


def symmetry_expectations(s: StateVector) -> tuple[float, float]:
    """Expected Hamming weight and expected parity (-1)^popcount."""
    pc = _popcount_cache(s.n)
    p = s.probabilities
    return float(np.dot(pc, p)), float(np.dot(1 - 2 * (pc & 1), p))


@dataclass(frozen=True)
class ShotModel:
    """Shot budget per matrix element; ``exact`` bypasses sampling entirely."""

    shots: int = 0
    seed: int = 0
    mode: Literal["exact", "sampled"] = "exact"

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown shot mode {self.mode!r}")
        if self.mode == "sampled" and self.shots < 2:
            raise ValueError("sampled mode needs at least 2 shots")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def hadamard_estimate(true_value: complex, m: ShotModel, rng: np.random.Generator | None = None) -> complex:
    """Estimate a matrix element of modulus <= 1 with two Hadamard tests.

    Half the shots go to the real-part circuit, half to the phase-shifted one.
    Each quadrature is recovered as P(0) - P(1) of the ancilla.
    """
    if m.mode == "exact":
        return complex(true_value)
    if m.shots < 2:
        raise ValueError("sampled mode needs at least 2 shots")
    if abs(true_value) > 1 + 1e-12:
        raise ValueError(f"|value| = {abs(true_value)} exceeds 1; rescale before sampling")
    rng = rng if rng is not None else m.rng()
    half_re = m.shots // 2
    half_im = m.shots - half_re
    p_re = np.clip((1 + true_value.real) / 2, 0.0, 1.0)
    p_im = np.clip((1 + true_value.imag) / 2, 0.0, 1.0)
    re = 2 * rng.binomial(half_re, p_re) / half_re - 1
    im = 2 * rng.binomial(half_im, p_im) / half_im - 1
    return complex(re, im)
