"""Layer-wise optimisation of the alternating cost/mixer ansatz."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .hamiltonian import DiagonalOperator
from .linalg import NumericalError
from .simulator import StateVector, mixer_amps, plus_state

logger = logging.getLogger(__name__)

ANGLE_BOUNDS = ((0.0, np.pi), (0.0, np.pi))


@dataclass(frozen=True)
class OptimizerConfig:
    """Per-layer local search settings.

    Each layer runs ``starts`` bounded L-BFGS-B descents from deterministic
    random points in [0, pi)^2 and keeps the lowest cost (lowest start index on
    ties). ``max_evals`` bounds the cost evaluations of a single descent,
    finite-difference gradient evaluations included.
    """

    layers: int = 20
    starts: int = 8
    tol: float = 1e-8
    max_evals: int = 200
    fd_step: float = 1e-6
    seed: int = 0


@dataclass(frozen=True, eq=False)
class QaoaResult:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]
    cost_by_depth: tuple[float, ...]
    l_prime: int
    state: StateVector
    evaluations: int = 0
    config: OptimizerConfig = field(default_factory=OptimizerConfig)

    @property
    def energy(self) -> float:
        return self.cost_by_depth[self.l_prime - 1]


def qaoa_state(d: DiagonalOperator, gammas: Sequence[float], betas: Sequence[float]) -> StateVector:
    """Plus state followed by (cost phase gamma_l, mixer beta_l) for each layer."""
    if len(gammas) != len(betas):
        raise ValueError(f"angle lists differ in length: {len(gammas)} vs {len(betas)}")
    amps = plus_state(d.n).amps
    for g, b in zip(gammas, betas):
        amps = mixer_amps(np.exp(-1j * g * d.values) * amps, d.n, b)
    return StateVector(d.n, amps)


def cost(d: DiagonalOperator, gammas: Sequence[float], betas: Sequence[float]) -> float:
    s = qaoa_state(d, gammas, betas)
    return float(np.dot(d.values, s.probabilities))


def select_depth(cost_by_depth: Sequence[float]) -> int:
    """1-based depth of the lowest cost; the first (shallowest) wins ties."""
    if not len(cost_by_depth):
        raise ValueError("no depths to select from")
    return int(np.argmin(np.asarray(cost_by_depth))) + 1


class _LayerObjective:
    def __init__(self, d: DiagonalOperator, prefix: np.ndarray, step: float):
        self.d = d
        self.energies = d.values.astype(float)
        self.prefix = prefix
        self.step = step
        self.count = 0

    def value(self, x) -> float:
        self.count += 1
        amps = mixer_amps(np.exp(-1j * x[0] * self.energies) * self.prefix, self.d.n, x[1])
        c = float(np.dot(self.energies, np.abs(amps) ** 2))
        if not np.isfinite(c):
            raise NumericalError(f"non-finite QAOA cost at angles {tuple(x)}")
        return c

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        f = self.value(x)
        grad = np.empty(2)
        for k in range(2):
            e = np.zeros(2)
            e[k] = self.step
            grad[k] = (self.value(x + e) - self.value(x - e)) / (2 * self.step)
        return f, grad


def optimize_layer(d: DiagonalOperator, prefix: np.ndarray, config: OptimizerConfig,
                   rng: np.random.Generator) -> tuple[float, float, float, int]:
    """Best (gamma, beta, cost, evaluations) for one layer on top of ``prefix``."""
    obj = _LayerObjective(d, prefix, config.fd_step)
    starts = rng.uniform(0.0, np.pi, size=(config.starts, 2))
    best = (0.0, 0.0, obj.value(np.zeros(2)))  # identity layer
    maxfun = max(1, config.max_evals // 5)
    for x0 in starts:
        res = minimize(obj.value_and_grad, x0, jac=True, method="L-BFGS-B", bounds=ANGLE_BOUNDS,
                       options={"ftol": config.tol, "gtol": 1e-10, "maxfun": maxfun})
        if res.fun < best[2]:
            best = (float(res.x[0]), float(res.x[1]), float(res.fun))
    return best[0], best[1], best[2], obj.count


def optimize_layerwise(d: DiagonalOperator, layers: int | None = None,
                       config: OptimizerConfig | None = None, seed: int | None = None) -> QaoaResult:
    """Greedy layer-by-layer optimisation; earlier layers stay frozen.

    After all layers, the retained depth is the one with the lowest cost.
    """
    config = config or OptimizerConfig()
    if layers is not None:
        config = OptimizerConfig(**{**config.__dict__, "layers": layers})
    if seed is not None:
        config = OptimizerConfig(**{**config.__dict__, "seed": seed})
    if config.layers < 1:
        raise ValueError("need at least one layer")

    rng = np.random.default_rng(config.seed)
    prefix = plus_state(d.n).amps
    gammas, betas, costs = [], [], []
    evals = 0
    for layer in range(config.layers):
        g, b, c, n_eval = optimize_layer(d, prefix, config, rng)
        evals += n_eval
        prefix = mixer_amps(np.exp(-1j * g * d.values) * prefix, d.n, b)
        gammas.append(g)
        betas.append(b)
        costs.append(c)
        logger.debug("layer %d: gamma=%.6f beta=%.6f cost=%.10f", layer + 1, g, b, c)

    l_prime = select_depth(costs)
    state = qaoa_state(d, gammas[:l_prime], betas[:l_prime])
    return QaoaResult(tuple(gammas), tuple(betas), tuple(costs), l_prime, state, evals, config)
