"""Server side of FedSaC: pairwise matrices, cooperation weights, aggregation.

Each row of the cooperation matrix minimizes, over the probability simplex,

    sum_j (w_j - p_j)^2 + alpha * C_ij * w_j - beta * S_ij * w_j

Completing the square turns this into the Euclidean projection of
``p - (alpha * C_i - beta * S_i) / 2`` onto the simplex, so no iterative
solver is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .client import ClientReport
from .data import make_rng
from .errors import DegenerateVector, DimensionMismatch, InvalidInput
from .model import ParamVector
from .numerics import cosine, principal_angles, project_simplex

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class ServerConfig:
    alpha: float = 0.9
    beta: float = 1.4
    k: int = 3
    anneal_fraction: float = 0.7
    subsample: int | None = None

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidInput("alpha and beta must be >= 0")
        if self.k < 1:
            raise InvalidInput("k must be >= 1")
        if not 0.0 <= self.anneal_fraction <= 1.0:
            raise InvalidInput("anneal_fraction must be in [0, 1]")
        if self.subsample is not None and self.subsample < 2:
            raise InvalidInput("subsample must be >= 2")


def check_row_stochastic(w: np.ndarray, tol: float = SIMPLEX_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InvalidInput(f"cooperation matrix must be square, got {w.shape}")
    if np.any(w < 0) or np.max(np.abs(w.sum(axis=1) - 1.0)) > tol:
        raise InvalidInput("cooperation matrix rows must be non-negative and sum to 1")
    return w


def similarity_matrix(params) -> np.ndarray:
    """Pairwise cosine of flattened parameter vectors (``ParamVector`` or plain arrays)."""
    vecs = [np.asarray(getattr(p, "values", p), dtype=np.float64) for p in params]
    n = len(vecs)
    if n < 1:
        raise InvalidInput("need at least one parameter vector")
    if len({v.size for v in vecs}) != 1:
        raise DimensionMismatch("parameter vectors have different lengths")
    if any(not np.any(v) for v in vecs):
        raise DegenerateVector("similarity is undefined for a zero parameter vector")
    s = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            s[i, j] = s[j, i] = cosine(vecs[i], vecs[j])
    return s


def complementarity_matrix(subspaces) -> np.ndarray:
    """``cos`` of the mean principal angle between every pair of client subspaces."""
    n = len(subspaces)
    c = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            c[i, j] = c[j, i] = np.cos(np.mean(principal_angles(subspaces[i], subspaces[j])))
    return c


def row_objective(w, p, s_row, c_row, alpha: float, beta: float) -> np.ndarray:
    """Row objective evaluated at one or many candidate rows (last axis = clients)."""
    w = np.asarray(w, dtype=np.float64)
    return np.sum((w - p) ** 2 + alpha * c_row * w - beta * s_row * w, axis=-1)


def solve_row(i: int, p, s, c, alpha: float, beta: float) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise InvalidInput("relative sizes p must lie on the probability simplex")
    s = np.asarray(s, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if s.shape != (p.size, p.size) or c.shape != (p.size, p.size):
        raise DimensionMismatch("S and C must be N x N with N = len(p)")
    return project_simplex(p - (alpha * c[i] - beta * s[i]) / 2.0)


def cooperation_matrix(p, s, c, alpha: float, beta: float) -> np.ndarray:
    return np.vstack([solve_row(i, p, s, c, alpha, beta) for i in range(len(p))])


def aggregate(w, params: list[ParamVector]) -> list[ParamVector]:
    """Personalized models: row ``i`` of ``w`` mixes the reported parameter vectors.

    ``w`` is normally the square cooperation matrix; a single row of weights
    (shape ``(1, N)``) gives one shared average, as in FedAvg.
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if w.shape[1] != len(params):
        raise DimensionMismatch(f"W has {w.shape[1]} columns but {len(params)} models given")
    if np.any(w < 0) or np.max(np.abs(w.sum(axis=1) - 1.0)) > SIMPLEX_TOL:
        raise InvalidInput("aggregation weights must be non-negative rows summing to 1")
    spec = params[0].spec
    if any(q.spec != spec for q in params):
        raise DimensionMismatch("cannot aggregate models with different specs")
    stacked = np.stack([q.values for q in params])
    return [ParamVector(row @ stacked, spec) for row in w]


def effective_alpha(round_index: int, total_rounds: int, cfg: ServerConfig) -> float:
    """Complementarity weight for a round: ``alpha`` for the first fraction of rounds, then 0."""
    return cfg.alpha if round_index < cfg.anneal_fraction * total_rounds else 0.0


def subsample_clients(num_clients: int, k_sub: int, round_index: int, seed: int) -> np.ndarray:
    """Sorted cohort of ``min(k_sub, N)`` clients drawn without replacement for one round."""
    if k_sub >= num_clients:
        return np.arange(num_clients)
    rng = make_rng(seed, round_index, 0x5EB)
    return np.sort(rng.choice(num_clients, size=k_sub, replace=False))


@dataclass(frozen=True)
class ServerStep:
    w: np.ndarray
    s: np.ndarray
    c: np.ndarray
    aggregated: list[ParamVector]


def server_step(reports: list[ClientReport], alpha: float, beta: float) -> ServerStep:
    """One full server phase over a cohort of reports."""
    sizes = np.array([r.num_train for r in reports], dtype=np.float64)
    p = sizes / sizes.sum()
    params = [r.params for r in reports]
    s = similarity_matrix(params)
    c = complementarity_matrix([r.subspace for r in reports])
    w = cooperation_matrix(p, s, c, alpha, beta)
    return ServerStep(w, s, c, aggregate(w, params))
