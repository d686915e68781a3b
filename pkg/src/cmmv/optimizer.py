"""Self-contained CMA-ES (minimization) with an ask/tell interface.

Sampling draws candidates v_k = m + sigma * C^{1/2} z_k; the update ranks the
population, recombines the best mu with log-decreasing weights, adapts the
covariance with rank-one and rank-mu terms driven by evolution paths, and
adapts the step size by cumulative step-size adaptation. Learning rates follow
the standard parameterization (the usual defaults as functions of dimension
and weights); population defaults to 4 + floor(3 ln d).

The update depends on objective values only through their ranking (stable
sort, ties broken by sample index), so any strictly increasing transform of
the objective produces a bit-identical trajectory. Infinite values are
allowed and rank worst, which is how calibration encodes monotonicity
penalties. All state transitions are pure: tell returns a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CovarianceDegenerateError, ProtocolMisuseError

EIG_FLOOR = 1e-14  # eigenvalues floored at EIG_FLOOR * max eigenvalue
STALL_EPS = 1e-14  # sigma * sqrt(max eigenvalue) below this -> numerical stall


@dataclass(frozen=True)
class CmaEsConfig:
    """Strategy parameters; omitted fields get the standard defaults."""

    dimension: int
    population: Optional[int] = None
    parents: Optional[int] = None
    weights: Optional[np.ndarray] = None
    sigma0: float = 0.3
    max_generations: int = 1000
    target_value: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise ValueError("dimension must be >= 1")
        lam = self.population if self.population is not None else 4 + int(3 * math.log(d))
        if lam < 2:
            raise ValueError("population must be >= 2")
        mu = self.parents if self.parents is not None else lam // 2
        if not 1 <= mu < lam:
            raise ValueError("parents must satisfy 1 <= parents < population")
        if self.weights is None:
            raw = math.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
            w = raw / raw.sum()
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.size != mu or np.any(w <= 0) or np.any(np.diff(w) > 0):
                raise ValueError("weights must be positive, nonincreasing, length = parents")
            w = w / w.sum()
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "population", lam)
        object.__setattr__(self, "parents", mu)
        object.__setattr__(self, "weights", w)

    # derived strategy constants ------------------------------------------

    @property
    def mu_eff(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    @property
    def c_sigma(self) -> float:
        return (self.mu_eff + 2.0) / (self.dimension + self.mu_eff + 5.0)

    @property
    def d_sigma(self) -> float:
        return 1.0 + 2.0 * max(0.0, math.sqrt((self.mu_eff - 1.0) / (self.dimension + 1.0)) - 1.0) + self.c_sigma

    @property
    def c_c(self) -> float:
        d = self.dimension
        return (4.0 + self.mu_eff / d) / (d + 4.0 + 2.0 * self.mu_eff / d)

    @property
    def c_1(self) -> float:
        return 2.0 / ((self.dimension + 1.3) ** 2 + self.mu_eff)

    @property
    def c_mu(self) -> float:
        d = self.dimension
        return min(
            1.0 - self.c_1,
            2.0 * (self.mu_eff - 2.0 + 1.0 / self.mu_eff) / ((d + 2.0) ** 2 + self.mu_eff),
        )

    @property
    def chi_n(self) -> float:
        d = self.dimension
        return math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))


@dataclass(frozen=True)
class CmaEsState:
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    generation: int = 0


def init_state(config: CmaEsConfig, x0: Sequence[float]) -> CmaEsState:
    m = np.asarray(x0, dtype=float).copy()
    if m.shape != (config.dimension,):
        raise ProtocolMisuseError("x0 does not match config dimension", shape=m.shape)
    d = config.dimension
    return CmaEsState(
        mean=m,
        sigma=config.sigma0,
        cov=np.eye(d),
        path_sigma=np.zeros(d),
        path_c=np.zeros(d),
    )


def _eig_decomposition(cov: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Floored eigendecomposition; raises when the matrix is beyond repair."""
    if not np.all(np.isfinite(cov)):
        raise CovarianceDegenerateError("covariance contains non-finite entries")
    try:
        vals, vecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceDegenerateError(f"eigendecomposition failed: {exc}") from exc
    top = float(vals.max())
    if not (math.isfinite(top) and top > 0.0):
        raise CovarianceDegenerateError("covariance has no positive eigenvalue", max_eig=top)
    return np.maximum(vals, EIG_FLOOR * top), vecs


def ask(state: CmaEsState, config: CmaEsConfig, rng: np.random.Generator) -> np.ndarray:
    """Sample a (population, dimension) array of candidates."""
    vals, vecs = _eig_decomposition(state.cov)
    sqrt_c = (vecs * np.sqrt(vals)) @ vecs.T
    z = rng.standard_normal((config.population, config.dimension))
    return state.mean + state.sigma * (z @ sqrt_c.T)


def tell(
    state: CmaEsState,
    config: CmaEsConfig,
    candidates: np.ndarray,
    values: Sequence[float],
) -> CmaEsState:
    """Rank, recombine, adapt covariance and step size; returns the new state.

    Uses only the ranking of `values` (stable sort), so strictly increasing
    transforms of the objective leave the update bit-identical. Non-finite
    values rank worst.
    """
    cand = np.asarray(candidates, dtype=float)
    vals = np.asarray(values, dtype=float)
    lam, mu, d = config.population, config.parents, config.dimension
    if cand.shape != (lam, d) or vals.shape != (lam,):
        raise ProtocolMisuseError(
            "candidates/values shape mismatch", candidates=cand.shape, values=vals.shape
        )
    order = np.argsort(vals, kind="stable")
    w = config.weights
    sel = cand[order[:mu]]

    m_old, sigma = state.mean, state.sigma
    y = (sel - m_old) / sigma
    y_w = w @ y
    m_new = m_old + sigma * y_w

    eigvals, eigvecs = _eig_decomposition(state.cov)
    inv_sqrt = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T

    c_s, d_s, mu_eff, chi = config.c_sigma, config.d_sigma, config.mu_eff, config.chi_n
    p_sigma = (1.0 - c_s) * state.path_sigma + math.sqrt(c_s * (2.0 - c_s) * mu_eff) * (inv_sqrt @ y_w)
    norm_ps = float(np.linalg.norm(p_sigma))
    gen1 = state.generation + 1
    h_sigma = norm_ps / math.sqrt(1.0 - (1.0 - c_s) ** (2 * gen1)) < (1.4 + 2.0 / (d + 1.0)) * chi

    c_c = config.c_c
    p_c = (1.0 - c_c) * state.path_c + (math.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w if h_sigma else 0.0)

    c1, cmu = config.c_1, config.c_mu
    rank_mu = (y.T * w) @ y
    delta_h = (0.0 if h_sigma else 1.0) * c_c * (2.0 - c_c)
    cov = (
        (1.0 - c1 - cmu) * state.cov
        + c1 * (np.outer(p_c, p_c) + delta_h * state.cov)
        + cmu * rank_mu
    )
    cov = 0.5 * (cov + cov.T)
    vals_f, vecs_f = _eig_decomposition(cov)
    cov = (vecs_f * vals_f) @ vecs_f.T
    cov = 0.5 * (cov + cov.T)

    sigma_new = sigma * math.exp(min(1.0, (c_s / d_s) * (norm_ps / chi - 1.0)))

    return CmaEsState(
        mean=m_new,
        sigma=sigma_new,
        cov=cov,
        path_sigma=p_sigma,
        path_c=p_c,
        generation=gen1,
    )


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    evaluations: int
    best_value: float
    sigma: float
    mean: tuple


@dataclass(frozen=True)
class MinimizeResult:
    best_x: np.ndarray
    best_value: float
    history: List[GenerationRecord]
    termination: str
    evaluations: int
    state: CmaEsState


def minimize(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    config: CmaEsConfig,
) -> MinimizeResult:
    """Run ask/tell until target value, stall, or the generation cap.

    The best-ever candidate is tracked across generations (the reported best
    value is monotone nonincreasing along the history). Stall means
    sigma * sqrt(max eigenvalue of C) dropped below 1e-14: the sampling cloud
    has collapsed to floating-point noise.
    """
    rng = np.random.default_rng(config.seed)
    state = init_state(config, x0)
    best_x = np.asarray(x0, dtype=float).copy()
    best_value = float(objective(best_x))
    evaluations = 1
    history: List[GenerationRecord] = []
    termination = "max_generations"
    for _ in range(config.max_generations):
        candidates = ask(state, config, rng)
        values = np.array([float(objective(c)) for c in candidates])
        evaluations += len(values)
        gen_best = int(np.argmin(np.where(np.isnan(values), np.inf, values)))
        if values[gen_best] < best_value:
            best_value = float(values[gen_best])
            best_x = candidates[gen_best].copy()
        state = tell(state, config, candidates, values)
        history.append(
            GenerationRecord(
                generation=state.generation,
                evaluations=evaluations,
                best_value=best_value,
                sigma=state.sigma,
                mean=tuple(state.mean),
            )
        )
        if config.target_value is not None and best_value <= config.target_value:
            termination = "target"
            break
        max_eig = float(np.linalg.eigvalsh(state.cov).max())
        if state.sigma * math.sqrt(max_eig) < STALL_EPS:
            termination = "stall"
            break
    return MinimizeResult(
        best_x=best_x,
        best_value=best_value,
        history=history,
        termination=termination,
        evaluations=evaluations,
        state=state,
    )
