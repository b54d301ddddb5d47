"""Real-time quantum subspace expansion on top of a reference state.

Trial states are chi_k = exp(-i H t_k) |phi0>. The Hamiltonian and overlap
kernels are assembled from them (exactly or with Hadamard-test shot noise),
and the generalised eigenproblem H f = E S f is solved by truncating the
overlap spectrum. Filter weights that need no kernels (Gaussian energy filter,
imaginary-time step) live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .graph import MisOracle
from .hamiltonian import DiagonalOperator, ground_manifold, pauli_one_norm
from .linalg import NumericalError, Stencil, eig_hermitian
from .simulator import (
    ShotModel,
    StateVector,
    expect_diagonal,
    hadamard_estimate,
    projector_fidelity,
    symmetry_expectations,
)

DEFAULT_EPSILON_CUT = 1e-3


class EmptySubspaceError(NumericalError):
    pass


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray

    @property
    def K(self) -> int:
        return len(self.times)

    def is_equally_spaced(self, tol: float = 1e-12) -> bool:
        if self.K < 3:
            return True
        steps = np.diff(self.times)
        return bool(np.all(np.abs(steps - steps[0]) <= tol * max(1.0, abs(steps[0]))))


def generator_times(K: int) -> TimeGrid:
    """K equally spaced times on [-pi(1 - 1/K), pi(1 - 1/K)]."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K == 1:
        return TimeGrid(np.zeros(1))
    edge = np.pi * (1 - 1 / K)
    return TimeGrid(np.linspace(-edge, edge, K))


@dataclass(frozen=True, eq=False)
class Kernels:
    H: np.ndarray
    S: np.ndarray
    times: np.ndarray
    h_lags: np.ndarray | None = None
    s_lags: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.H.shape[0]


def _toeplitz(lags: np.ndarray, K: int) -> np.ndarray:
    # lags[K - 1 + m] holds the value at lag index m = k' - k
    idx = np.arange(K)
    return lags[K - 1 + idx[None, :] - idx[:, None]]


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def build_kernels(phi0: StateVector, d: DiagonalOperator, grid: TimeGrid,
                  shots: ShotModel | None = None, use_toeplitz: bool | None = None) -> Kernels:
    """Hamiltonian and overlap kernels H_kk' = <chi_k|H|chi_k'>, S_kk' = <chi_k|chi_k'>.

    On an equally spaced grid only the 2K - 1 distinct lags are evaluated.
    With a sampled ``shots`` model every independent element goes through the
    Hadamard-test estimator; H elements are first divided by the Pauli 1-norm
    of ``d`` so that they fit in the unit disk.
    """
    if phi0.n != d.n:
        raise ValueError(f"qubit counts differ: {phi0.n} vs {d.n}")
    shots = shots or ShotModel()
    times = np.asarray(grid.times, dtype=float)
    K = len(times)
    toeplitz = grid.is_equally_spaced() if use_toeplitz is None else use_toeplitz
    if toeplitz and not grid.is_equally_spaced():
        raise ValueError("lag-based kernels need an equally spaced grid")
    p = phi0.probabilities
    e = d.values.astype(float)

    if toeplitz:
        step = times[1] - times[0] if K > 1 else 0.0
        tau = step * np.arange(-(K - 1), K)
        phases = np.exp(-1j * np.outer(tau, e))
        s_lags = phases @ p
        h_lags = phases @ (p * e)
        if shots.mode == "sampled":
            s_lags, h_lags = _sample_lags(s_lags, h_lags, K, pauli_one_norm(d), shots)
        S = _toeplitz(s_lags, K)
        H = _toeplitz(h_lags, K)
        return Kernels(_hermitize(H), _hermitize(S), times, h_lags, s_lags)

    chi = np.exp(-1j * np.outer(times, e)) * phi0.amps
    S = chi.conj() @ chi.T
    H = chi.conj() @ (chi * e).T
    if shots.mode == "sampled":
        S, H = _sample_full(S, H, pauli_one_norm(d), shots)
    return Kernels(_hermitize(H), _hermitize(S), times)


def _sample_lags(s_lags, h_lags, K, scale, shots):
    rng = shots.rng()
    s_out = s_lags.copy()
    h_out = h_lags.copy()
    s_out[K - 1] = 1.0
    for m in range(K):
        if m:
            s_out[K - 1 + m] = hadamard_estimate(s_lags[K - 1 + m], shots, rng)
            s_out[K - 1 - m] = np.conj(s_out[K - 1 + m])
        h_out[K - 1 + m] = scale * hadamard_estimate(h_lags[K - 1 + m] / scale, shots, rng)
        h_out[K - 1 - m] = np.conj(h_out[K - 1 + m])
    h_out[K - 1] = h_out[K - 1].real
    return s_out, h_out


def _sample_full(S, H, scale, shots):
    rng = shots.rng()
    K = S.shape[0]
    S_out = np.eye(K, dtype=complex)
    H_out = np.zeros_like(H)
    for k in range(K):
        for kp in range(k, K):
            if kp > k:
                S_out[k, kp] = hadamard_estimate(S[k, kp], shots, rng)
                S_out[kp, k] = np.conj(S_out[k, kp])
            H_out[k, kp] = scale * hadamard_estimate(H[k, kp] / scale, shots, rng)
            H_out[kp, k] = np.conj(H_out[k, kp])
    return S_out, H_out


@dataclass(frozen=True, eq=False)
class SubspaceSolution:
    energies: np.ndarray
    weights: np.ndarray  # column j is f_j in the trial-state basis
    retained: int
    epsilon_cut: float
    overlap_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_weights(self) -> np.ndarray:
        return self.weights[:, 0]


def solve_truncated(k: Kernels, epsilon_cut: float = DEFAULT_EPSILON_CUT) -> SubspaceSolution:
    """Truncated-overlap solution of H f = E S f.

    Diagonalise S = P Sigma P^dag, drop eigenvalues below ``epsilon_cut``,
    whiten the retained columns, diagonalise the projected Hamiltonian and map
    the eigenvectors back to weights on the original trial states.
    """
    if epsilon_cut <= 0:
        raise ValueError("epsilon_cut must be positive")
    s_eig = eig_hermitian(k.S)
    keep = s_eig.values >= epsilon_cut
    if not keep.any():
        raise EmptySubspaceError(
            f"empty subspace: all overlap eigenvalues below epsilon_cut={epsilon_cut}"
        )
    X = s_eig.vectors[:, keep] / np.sqrt(s_eig.values[keep])
    h_eig = eig_hermitian(X.conj().T @ k.H @ X)
    weights = X @ h_eig.vectors
    return SubspaceSolution(h_eig.values, weights, int(keep.sum()), epsilon_cut, s_eig.values)


def projected_residuals(k: Kernels, sol: SubspaceSolution) -> np.ndarray:
    """||P_r^dag (H f_j - E_j S f_j)|| for every eigenpair, in the retained basis."""
    s_eig = eig_hermitian(k.S)
    P = s_eig.vectors[:, s_eig.values >= sol.epsilon_cut]
    r = k.H @ sol.weights - (k.S @ sol.weights) * sol.energies
    return np.linalg.norm(P.conj().T @ r, axis=0)


def default_mu0(k: Kernels) -> float:
    vals = eig_hermitian(k.H).values
    return 10.0 * max(vals[-1] - vals[0], np.abs(vals).max(), 1.0)


def solve_deflation(k: Kernels, n_states: int = 1, mu0: float | None = None,
                    lambdas: Sequence[float] | None = None, starts: int = 4, seed: int = 0,
                    tol: float = 1e-12, maxiter: int = 2000) -> SubspaceSolution:
    """Sequential penalised minimisation (state deflation).

    State j minimises f^dag H f + mu0 (1 - f^dag S f)^2
    + sum_{j' < j} lambda_j' |f_j'^dag S f|^2 over complex f, from several
    deterministic starts. Energies are Rayleigh quotients f^dag H f / f^dag S f.
    Weights are rescaled so that f^dag S f = 1.
    """
    K = k.K
    mu0 = default_mu0(k) if mu0 is None else float(mu0)
    lambdas = [mu0] * (n_states - 1) if lambdas is None else list(lambdas)
    if mu0 <= 0 or any(lam <= 0 for lam in lambdas):
        raise ValueError("penalty multipliers must be positive")
    if len(lambdas) < n_states - 1:
        raise ValueError(f"need {n_states - 1} orthogonality multipliers, got {len(lambdas)}")
    H, S = k.H, k.S
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    energies = []
    converged = True

    for j in range(n_states):
        prev = [S @ f for f in found]

        def fun(x, prev=prev, j=j):
            f = x[:K] + 1j * x[K:]
            Hf, Sf = H @ f, S @ f
            norm = np.vdot(f, Sf).real
            val = np.vdot(f, Hf).real + mu0 * (1 - norm) ** 2
            grad = 2 * Hf - 4 * mu0 * (1 - norm) * Sf
            for lam, g in zip(lambdas[:j], prev):
                ov = np.vdot(g, f)
                val += lam * abs(ov) ** 2
                grad += 2 * lam * ov * g
            # d/d(re), d/d(im) of a real function of f and conj(f)
            return val, np.concatenate((grad.real, grad.imag))

        best = None
        for _ in range(starts):
            x0 = rng.normal(size=2 * K) / np.sqrt(2 * K)
            res = minimize(fun, x0, jac=True, method="BFGS", options={"gtol": tol, "maxiter": maxiter})
            if best is None or res.fun < best.fun:
                best = res
        converged &= bool(best.success) or np.linalg.norm(best.jac) < 1e-6
        f = best.x[:K] + 1j * best.x[K:]
        norm = np.vdot(f, S @ f).real
        if norm <= 0:
            raise NumericalError("deflation collapsed to the zero vector")
        energies.append(np.vdot(f, H @ f).real / norm)
        found.append(f / np.sqrt(norm))

    return SubspaceSolution(np.array(energies), np.column_stack(found), K, 0.0, converged=converged)


def weighted_evolution(phi0: StateVector, d: DiagonalOperator, times, weights) -> np.ndarray:
    """Unnormalised sum_k w_k exp(-i H t_k) |phi0>."""
    times = np.asarray(times, dtype=float)
    weights = np.asarray(weights, dtype=complex)
    if times.shape != weights.shape:
        raise ValueError(f"{len(weights)} weights for {len(times)} times")
    factor = np.exp(-1j * np.outer(d.values.astype(float), times)) @ weights
    return factor * phi0.amps


def assemble_state(phi0: StateVector, d: DiagonalOperator, grid: TimeGrid | Sequence[float],
                   f) -> tuple[StateVector, float]:
    """Normalised sum_k f_k chi_k and its norm^2 before normalisation (= f^dag S f)."""
    times = grid.times if isinstance(grid, TimeGrid) else grid
    vec = weighted_evolution(phi0, d, times, f)
    norm2 = float(np.vdot(vec, vec).real)
    if norm2 <= 0:
        raise ValueError("weights produce the zero vector")
    return StateVector(phi0.n, vec / np.sqrt(norm2)), norm2


@dataclass(frozen=True)
class Metrics:
    """Quality of a prepared state.

    ``fidelity`` is the weight on every minimiser of the cost diagonal. With
    unit edge penalty some non-independent sets tie with the MIS energy, so
    ``mis_fidelity``, the weight on the oracle's maximum independent sets
    only, can be smaller.
    """

    approx_ratio: float
    fidelity: float
    hamming_error: float
    parity_error: float
    energy: float
    mis_fidelity: float


def evaluate_metrics(s: StateVector, d: DiagonalOperator, oracle: MisOracle) -> Metrics:
    energy = expect_diagonal(s, d)
    emin = -oracle.size
    ratio = max(energy / emin, 0.0) if emin else 1.0
    _, manifold = ground_manifold(d)
    hamming, parity = symmetry_expectations(s)
    return Metrics(
        approx_ratio=ratio,
        fidelity=min(max(projector_fidelity(s, manifold), 0.0), 1.0),
        hamming_error=abs(hamming - oracle.size),
        parity_error=abs(parity - (-1) ** oracle.size),
        energy=energy,
        mis_fidelity=min(max(projector_fidelity(s, oracle.indices), 0.0), 1.0),
    )


def reencode_probability(f, S) -> float:
    """Success probability of writing sum_k f_k chi_k onto the register via LCU."""
    f = np.asarray(f, dtype=complex)
    S = np.asarray(S, dtype=complex)
    if S.shape != (f.size, f.size):
        raise ValueError(f"overlap of shape {S.shape} does not match {f.size} weights")
    denom = np.abs(f).sum() ** 2
    if denom == 0:
        raise ValueError("zero weight vector")
    return float(np.vdot(f, S @ f).real / denom)


def _shift_phases(times: np.ndarray, shift: float) -> np.ndarray:
    # exp(-i (H - shift) t) = exp(+i shift t) exp(-i H t)
    return np.exp(1j * shift * times)


def gaussian_filter_weights(K: int, t: float, shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """K-fold product of (U(t) + U(-t))/2 with U(t) = exp(-i (H - shift) t).

    Returns K + 1 times (K - 2k) t with weights C(K, k)/2^K, the shift folded
    into complex phases so the weights act on unshifted evolutions.
    """
    if K < 1 or t <= 0:
        raise ValueError("need K >= 1 and t > 0")
    k = np.arange(K + 1)
    times = (K - 2 * k) * t
    w = np.array([comb(K, int(j)) for j in k], dtype=float) / 2.0**K
    return times, w * _shift_phases(times, shift)


def ite_weights(K: int, t: float, shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """K-fold product of ((1+i) U(-t) + (1-i) U(t))/2, approximating exp(-K t (H - shift))."""
    if K < 1 or t <= 0:
        raise ValueError("need K >= 1 and t > 0")
    k = np.arange(K + 1)
    # k factors of U(-t), K - k factors of U(t)
    times = (K - 2 * k) * t
    w = np.array([comb(K, int(j)) * ((1 + 1j) / 2) ** j * ((1 - 1j) / 2) ** (K - j) for j in k])
    return times, w * _shift_phases(times, shift)


def gaussian_reference(phi0: StateVector, d: DiagonalOperator, width: float, shift: float) -> np.ndarray:
    """exp(-width (H - shift)^2) |phi0>, unnormalised."""
    e = d.values.astype(float) - shift
    return np.exp(-width * e * e) * phi0.amps


def filter_success_probability(phi0: StateVector, d: DiagonalOperator, K: int, t: float,
                               shift: float) -> tuple[float, float]:
    """(exact, Gaussian estimate) of the LCU success probability of the filter.

    The exact value is ||sum_k w_k U(t_k) phi0||^2 / (sum_k |w_k|)^2. The
    estimate is <phi0| exp(-K t^2 (H - shift)^2) |phi0>, which is what the
    binomial product tends to for small t.
    """
    times, w = gaussian_filter_weights(K, t, shift)
    vec = weighted_evolution(phi0, d, times, w)
    exact = float(np.vdot(vec, vec).real / np.abs(w).sum() ** 2)
    e = d.values.astype(float) - shift
    approx = float(np.dot(phi0.probabilities, np.exp(-K * t * t * e * e)))
    return exact, approx


def rte_extract_kernels(lag_values, stencil: Stencil, t: float) -> tuple[complex, complex]:
    """(S, H) estimates from samples of <chi_k| exp(-i H o_j t) |chi_k'> at stencil offsets.

    H = i d/dtau <exp(-i H tau)> at tau = 0 via the first-derivative stencil;
    S is the stencil's interpolation of the tau = 0 value.
    """
    offsets, coeff, interp = stencil.as_arrays()
    vals = np.asarray(lag_values, dtype=complex)
    if vals.shape != offsets.shape:
        raise ValueError(f"expected {len(offsets)} samples, got {vals.size}")
    return complex(np.dot(interp, vals)), complex(1j * np.dot(coeff, vals) / t)


def rte_samples(phi0: StateVector, d: DiagonalOperator, t_left: float, t_right: float,
                stencil: Stencil, t: float) -> np.ndarray:
    """Exact <chi(t_left)| exp(-i H o_j t) |chi(t_right)> for every stencil offset."""
    offsets = np.array(stencil.offsets, dtype=float)
    tau = t_right - t_left + offsets * t
    return np.exp(-1j * np.outer(tau, d.values.astype(float))) @ phi0.probabilities
