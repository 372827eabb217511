"""Truncated weighted spectral embedding of adjacency matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .krein import DiscreteGRD, KreinVector, echelon_basis, sign_fix_columns

ZERO_RTOL = 1e-12
_TIE_RTOL = 1e-9


def _as_dense(A) -> np.ndarray:
    if hasattr(A, "to_dense"):
        return A.to_dense(dtype=float)
    return np.asarray(A, dtype=float)


@dataclass(frozen=True)
class SignedSpectrum:
    """Nonzero eigenpairs split by sign.

    ``pos_vals`` holds the positive eigenvalues in descending order and
    ``neg_vals`` the magnitudes of the negative ones, also descending.  The
    matching eigenvectors are the columns of ``pos_vecs`` / ``neg_vecs``.
    """

    pos_vals: np.ndarray
    neg_vals: np.ndarray
    pos_vecs: np.ndarray
    neg_vecs: np.ndarray

    @property
    def n(self) -> int:
        return self.pos_vecs.shape[0]

    @property
    def rank(self) -> tuple[int, int]:
        return self.pos_vals.size, self.neg_vals.size

    def reconstruct(self) -> np.ndarray:
        P = (self.pos_vecs * self.pos_vals) @ self.pos_vecs.T
        N = (self.neg_vecs * self.neg_vals) @ self.neg_vecs.T
        return P - N

    def scree(self) -> list[tuple[int, float, str]]:
        """(rank, |eigenvalue|, sign) rows sorted by magnitude, descending."""
        vals = [(v, "+") for v in self.pos_vals] + [(v, "-") for v in self.neg_vals]
        vals.sort(key=lambda t: -t[0])
        return [(i + 1, float(v), s) for i, (v, s) in enumerate(vals)]


def _group_ties(vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    scale = float(vals[0]) if vals.size else 0.0
    start = 0
    while start < vals.size:
        stop = start + 1
        while stop < vals.size and vals[start] - vals[stop] <= _TIE_RTOL * scale:
            stop += 1
        if stop - start > 1:
            vecs[:, start:stop] = echelon_basis(vecs[:, start:stop])
        start = stop
    return vecs


def signed_eigendecompose(A, zero_rtol: float = ZERO_RTOL) -> SignedSpectrum:
    """Full symmetric eigendecomposition split into positive and negative parts.

    Eigenvalues with magnitude at most ``zero_rtol * max(1, ||A||_op)`` are
    dropped.  Each eigenvector is signed so that its largest-magnitude entry is
    nonnegative (ties go to the lower index).
    """
    A = _as_dense(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, scale)):
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((A + A.T) / 2)
    cutoff = zero_rtol * max(1.0, float(np.max(np.abs(vals))))

    pos = vals > cutoff
    neg = vals < -cutoff
    order_p = np.argsort(-vals[pos], kind="stable")
    order_n = np.argsort(vals[neg], kind="stable")
    pv, pV = vals[pos][order_p], vecs[:, pos][:, order_p]
    nv, nV = -vals[neg][order_n], vecs[:, neg][:, order_n]
    pV = _group_ties(pv, pV)
    nV = _group_ties(nv, nV)
    pV = pV * sign_fix_columns(pV)
    nV = nV * sign_fix_columns(nV)
    return SignedSpectrum(pv, nv, pV, nV)


@dataclass(frozen=True)
class Embedding:
    X: np.ndarray
    Y: np.ndarray
    rho_used: float = 1.0

    @property
    def dims(self) -> tuple[int, int]:
        return self.X.shape[1], self.Y.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def rows(self) -> list[KreinVector]:
        return [KreinVector(x, y) for x, y in zip(self.X, self.Y)]

    def gram(self) -> np.ndarray:
        return self.X @ self.X.T - self.Y @ self.Y.T

    def as_grd(self) -> DiscreteGRD:
        """Empirical distribution putting mass 1/n on every row."""
        return DiscreteGRD(self.X, self.Y)


def embed(spec: SignedSpectrum, p1: int, p2: int, rho: float = 1.0) -> Embedding:
    """Rows ``(sqrt(lam_j) a_ji ; sqrt(gam_j) b_ji)``, rescaled by ``rho**-0.5``."""
    n1, n2 = spec.rank
    if p1 < 0 or p2 < 0:
        raise ValueError("embedding dimensions must be nonnegative")
    if p1 > n1 or p2 > n2:
        raise ValueError(
            f"requested dims ({p1}, {p2}) but only {n1} positive and "
            f"{n2} negative nonzero eigenvalues are available"
        )
    if not (0 < rho <= 1):
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    scale = rho ** -0.5
    X = spec.pos_vecs[:, :p1] * np.sqrt(spec.pos_vals[:p1]) * scale
    Y = spec.neg_vecs[:, :p2] * np.sqrt(spec.neg_vals[:p2]) * scale
    return Embedding(X, Y, float(rho))


def threshold_value(n: int, c: float = 1.0, mode: str = "dense", density: float | None = None) -> float:
    if mode == "dense":
        return c * math.sqrt(n)
    if mode == "sparse":
        if density is None:
            raise ValueError("sparse threshold mode needs the estimated edge density")
        return c * 2.01 * math.sqrt(n * density * (1 - density))
    raise ValueError(f"unknown threshold mode {mode!r}")


def choose_dims(
    spec: SignedSpectrum,
    n: int,
    c: float = 1.0,
    mode: str = "dense",
    density: float | None = None,
) -> tuple[int, int]:
    """Count eigenvalues of each sign whose magnitude exceeds the threshold.

    ``mode="dense"`` uses ``c * sqrt(n)``.  ``mode="sparse"`` uses
    ``c * 2.01 * sqrt(n * density * (1 - density))``, an extension for graphs
    whose edge density is far below one.
    """
    if n < 1 or c <= 0:
        raise ValueError("need n >= 1 and c > 0")
    t = threshold_value(n, c, mode, density)
    return int(np.sum(spec.pos_vals > t)), int(np.sum(spec.neg_vals > t))


@dataclass(frozen=True)
class EigenDecayProfile:
    alpha_hat: float
    beta_hat: float
    ranks_used: int
    ok: bool


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(x, y, 1)[0])


def fit_decay_profile(spec: SignedSpectrum, max_rank: int, noise_floor: float | None = None) -> EigenDecayProfile:
    """Log-log fit of the absolute spectrum against rank.

    The decay exponent is minus the slope of ``log |value_j|`` on ``log j``;
    the gap exponent is the same fit for the successive differences.  Only
    values above ``noise_floor`` (default ``sqrt(n)``) among the leading
    ``max_rank`` are used.
    """
    floor = math.sqrt(spec.n) if noise_floor is None else noise_floor
    vals = np.array([v for _, v, _ in spec.scree()])[:max_rank]
    vals = vals[vals > floor]
    if vals.size < 3:
        return EigenDecayProfile(float("nan"), float("nan"), int(vals.size), False)
    ranks = np.arange(1, vals.size + 1, dtype=float)
    alpha = -_slope(np.log(ranks), np.log(vals))
    gaps = vals[:-1] - vals[1:]
    keep = gaps > 0
    if keep.sum() >= 2:
        beta = -_slope(np.log(ranks[:-1][keep]), np.log(gaps[keep]))
    else:
        beta = float("nan")
    return EigenDecayProfile(alpha + 0.0, beta, int(vals.size), True)


def estimate_density(A) -> float:
    """Fraction of the n(n-1)/2 node pairs that are joined by an edge."""
    if hasattr(A, "edge_count"):
        n, m = A.n, A.edge_count
    else:
        D = _as_dense(A)
        n = D.shape[0]
        m = int(np.count_nonzero(np.triu(D, 1)))
    if n < 2:
        raise ValueError("density needs at least two nodes")
    return 2.0 * m / (n * (n - 1))
