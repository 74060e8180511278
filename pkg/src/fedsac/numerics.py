"""Dense linear-algebra kernels: thin SVD, cosine, principal angles, simplex projection.

Everything here is a pure function of its inputs. The SVD is a one-sided
(Hestenes) Jacobi method with round-robin pair ordering, which lets each
sweep rotate ``n/2`` disjoint column pairs at once with vectorized numpy.
Tall inputs are first reduced to their square triangular factor by a QR
factorization. It is aimed at the small matrices this package works with
(a few hundred rows by ~84 columns), not at BLAS-class performance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVector, DimensionMismatch, InvalidInput

ORTHONORMAL_TOL = 1e-8

_JACOBI_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 80


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate ``x`` as a finite 2-D float array and return it as float64."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class Subspace:
    """A k-dimensional subspace of R^d given by a d x k orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis, "subspace basis")
        d, k = b.shape
        if k > d:
            raise InvalidInput(f"subspace dimension {k} exceeds ambient dimension {d}")
        gram = b.T @ b
        if np.max(np.abs(gram - np.eye(k))) > ORTHONORMAL_TOL:
            raise InvalidInput("subspace basis columns are not orthonormal")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # Circle-method tournament: n-1 rounds (n even), each a perfect matching.
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        p, q = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_columns(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonalize the columns of ``a`` by plane rotations.

    Returns ``(a_rot, v)`` with ``a @ v == a_rot`` and mutually orthogonal
    columns in ``a_rot``.
    """
    m, n = a.shape
    # Rotations act on [a; v] stacked so each pair is gathered once.
    b = np.vstack([a, np.eye(n)])
    if n == 1:
        return b[:m], b[m:]
    schedule = _round_robin(n)
    for _ in range(_JACOBI_MAX_SWEEPS):
        converged = True
        for p, q in schedule:
            bp, bq = b[:, p], b[:, q]
            ap, aq = bp[:m], bq[:m]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            off = np.abs(gamma) > _JACOBI_TOL * np.sqrt(alpha * beta)
            if not off.any():
                continue
            converged = False
            with np.errstate(over="ignore"):
                # zeta = +-inf gives t = 0, the right limit for a negligible coupling
                zeta = (beta - alpha) / (2.0 * np.where(off, gamma, 1.0))
                t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t[~off] = 0.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            b[:, p] = c * bp - s * bq
            b[:, q] = s * bp + c * bq
        if converged:
            break
    return b[:m], b[m:]


def _complete_orthonormal(u: np.ndarray, rank: int) -> np.ndarray:
    """Replace columns ``rank:`` of ``u`` with an orthonormal completion."""
    m, r = u.shape
    basis = [u[:, j] for j in range(rank)]
    for e in np.eye(m):
        if len(basis) == r:
            break
        w = e.copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            basis.append(w / norm)
    return np.column_stack(basis)


def _fix_signs(u: np.ndarray, v: np.ndarray) -> None:
    # Largest-magnitude entry of each v column made non-negative; argmax takes the lowest index on ties.
    idx = np.argmax(np.abs(v), axis=0)
    flip = v[idx, np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    u[:, flip] *= -1.0


def thin_svd(x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin singular value decomposition ``x = u @ diag(s) @ v.T``.

    Parameters
    ----------
    x : array_like, shape (m, d)
        Finite real matrix.

    Returns
    -------
    u : ndarray, shape (m, r)
    s : ndarray, shape (r,)
        Non-negative singular values in non-increasing order.
    v : ndarray, shape (d, r)
        ``r = min(m, d)``. ``u`` and ``v`` have orthonormal columns, and each
        column of ``v`` has its largest-magnitude entry non-negative.
    """
    a = as_matrix(x, "svd input")
    # Work at unit scale so squared column norms cannot under- or overflow.
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale > 0:
        a = a / scale
    tol_dim = max(a.shape)
    transpose = a.shape[0] < a.shape[1]
    if transpose:
        a = a.T
    q = None
    if a.shape[0] > a.shape[1]:
        # Tall case: rotate the square R factor instead of all m rows.
        q, a = np.linalg.qr(a)
    a_rot, v = _jacobi_columns(a)
    s = np.linalg.norm(a_rot, axis=0)
    order = np.argsort(-s, kind="stable")
    s, a_rot, v = s[order], a_rot[:, order], v[:, order]

    cutoff = s[0] * tol_dim * np.finfo(float).eps
    rank = int(np.sum(s > cutoff)) if s[0] > 0 else 0
    u = np.zeros_like(a_rot)
    u[:, :rank] = a_rot[:, :rank] / s[:rank]
    if rank < u.shape[1]:
        u = _complete_orthonormal(u, rank)
    if q is not None:
        u = q @ u
    if transpose:
        u, v = v, u
    _fix_signs(u, v)
    if scale > 0:
        s = s * scale
    return u, s, v


def representative_subspace(x, k: int) -> Subspace:
    """Span of the top-``k`` right singular vectors of feature matrix ``x`` (m x d)."""
    a = as_matrix(x, "feature matrix")
    if k < 1 or k > min(a.shape):
        raise InvalidInput(f"k={k} must satisfy 1 <= k <= min(m, d) = {min(a.shape)}")
    _, _, v = thin_svd(a)
    return Subspace(v[:, :k])


def principal_angles(a: Subspace, b: Subspace) -> np.ndarray:
    """Principal angles between two equal-dimension subspaces, ascending, in radians."""
    if a.ambient_dim != b.ambient_dim or a.k != b.k:
        raise DimensionMismatch(
            f"subspaces differ: ({a.ambient_dim}, {a.k}) vs ({b.ambient_dim}, {b.k})"
        )
    m = a.basis.T @ b.basis
    _, sigma, _ = thin_svd(m)
    cos_angles = np.arccos(np.clip(sigma, 0.0, 1.0))
    # arccos loses about half the digits near 0; small angles come from the
    # sines instead, the singular values of the part of B outside span(A).
    _, sines, _ = thin_svd(b.basis - a.basis @ m)
    sin_angles = np.arcsin(np.clip(np.sort(sines), 0.0, 1.0))
    return np.where(sigma > np.sqrt(0.5), sin_angles, cos_angles)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector lengths differ: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateVector("cosine of a zero vector is undefined")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def project_simplex(c) -> np.ndarray:
    """Euclidean projection of ``c`` onto the probability simplex.

    Sort-and-threshold: with ``u`` sorted descending, find the largest ``r``
    with ``u_r > (sum_{j<=r} u_j - 1) / r`` and shift by that threshold.
    """
    c = np.asarray(c, dtype=np.float64).ravel()
    if c.size == 0:
        raise InvalidInput("cannot project an empty vector")
    if not np.all(np.isfinite(c)):
        raise InvalidInput("simplex projection input contains non-finite entries")
    u = np.sort(c)[::-1]
    css = np.cumsum(u) - 1.0
    r = np.arange(1, c.size + 1)
    rho = np.nonzero(u - css / r > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(c - theta, 0.0)
    # Renormalize to absorb the last-ulp drift of the cumulative sum.
    return w / w.sum()
