"""Krein-space vectors and discrete graph root distributions.

A point of the Krein space is stored as a finite positive block ``pos`` and a
finite negative block ``neg``; every coordinate past the stored ones is an
implicit zero.  The indefinite inner product is ``<pos, pos'> - <neg, neg'>``
while the norm is the ordinary Euclidean norm of the concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WEIGHT_TOL = 1e-9
_TIE_RTOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _pad(v: np.ndarray, p: int) -> np.ndarray:
    if v.shape[-1] == p:
        return v
    if v.shape[-1] > p:
        raise ValueError(f"cannot pad block of size {v.shape[-1]} down to {p}")
    width = [(0, 0)] * (v.ndim - 1) + [(0, p - v.shape[-1])]
    return np.pad(v, width)


@dataclass(frozen=True, eq=False)
class KreinVector:
    pos: np.ndarray
    neg: np.ndarray

    def __init__(self, pos: Sequence[float] = (), neg: Sequence[float] = ()):
        p = _frozen(pos).reshape(-1)
        q = _frozen(neg).reshape(-1)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("KreinVector coordinates must be finite")
        object.__setattr__(self, "pos", p)
        object.__setattr__(self, "neg", q)

    @property
    def dims(self) -> tuple[int, int]:
        return self.pos.size, self.neg.size

    def norm(self) -> float:
        return float(np.sqrt(self.pos @ self.pos + self.neg @ self.neg))

    def padded(self, p1: int, p2: int) -> "KreinVector":
        return KreinVector(_pad(self.pos, p1), _pad(self.neg, p2))

    def __add__(self, other: "KreinVector") -> "KreinVector":
        p1 = max(self.pos.size, other.pos.size)
        p2 = max(self.neg.size, other.neg.size)
        a, b = self.padded(p1, p2), other.padded(p1, p2)
        return KreinVector(a.pos + b.pos, a.neg + b.neg)

    def __mul__(self, c: float) -> "KreinVector":
        return KreinVector(c * self.pos, c * self.neg)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, KreinVector):
            return NotImplemented
        return np.array_equal(self.pos, other.pos) and np.array_equal(self.neg, other.neg)

    def __repr__(self) -> str:
        return f"KreinVector(pos={self.pos.tolist()}, neg={self.neg.tolist()})"


def krein_inner(a: KreinVector, b: KreinVector) -> float:
    """Indefinite inner product; the shorter blocks are zero-padded."""
    p1 = min(a.pos.size, b.pos.size)
    p2 = min(a.neg.size, b.neg.size)
    # the padded tail contributes nothing, so only the overlap is summed
    return float(a.pos[:p1] @ b.pos[:p1] - a.neg[:p2] @ b.neg[:p2])


def truncate_prob(x):
    """Clamp to [0, 1]; works elementwise on arrays."""
    out = np.minimum(np.maximum(x, 0.0), 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class OrthogonalPair:
    """Block-diagonal orthogonal map ``(x, y) -> (q_pos @ x, q_neg @ y)``."""

    q_pos: np.ndarray
    q_neg: np.ndarray

    def __init__(self, q_pos, q_neg, atol: float = 1e-10):
        qp = _frozen(np.atleast_2d(q_pos)) if np.size(q_pos) else _frozen(np.zeros((0, 0)))
        qn = _frozen(np.atleast_2d(q_neg)) if np.size(q_neg) else _frozen(np.zeros((0, 0)))
        for name, q in (("q_pos", qp), ("q_neg", qn)):
            if q.shape[0] != q.shape[1]:
                raise ValueError(f"{name} must be square, got {q.shape}")
            if q.size and not np.allclose(q.T @ q, np.eye(q.shape[0]), atol=atol, rtol=0):
                raise ValueError(f"{name} is not orthogonal to {atol}")
        object.__setattr__(self, "q_pos", qp)
        object.__setattr__(self, "q_neg", qn)

    @classmethod
    def identity(cls, p1: int, p2: int) -> "OrthogonalPair":
        return cls(np.eye(p1), np.eye(p2))

    @classmethod
    def random(cls, p1: int, p2: int, rng: np.random.Generator) -> "OrthogonalPair":
        return cls(haar_orthogonal(p1, rng), haar_orthogonal(p2, rng))

    @property
    def dims(self) -> tuple[int, int]:
        return self.q_pos.shape[0], self.q_neg.shape[0]

    def apply_arrays(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # rows are points, so the map acts on the right by the transpose
        return X @ self.q_pos.T, Y @ self.q_neg.T

    def apply(self, obj):
        if isinstance(obj, DiscreteGRD):
            X, Y = self.apply_arrays(obj.X, obj.Y)
            return DiscreteGRD(X, Y, obj.weights)
        if isinstance(obj, KreinVector):
            return KreinVector(self.q_pos @ obj.pos, self.q_neg @ obj.neg)
        return [self.apply(z) for z in obj]

    def compose(self, other: "OrthogonalPair") -> "OrthogonalPair":
        """``self`` after ``other``."""
        return OrthogonalPair(self.q_pos @ other.q_pos, self.q_neg @ other.q_neg)


def haar_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed p x p orthogonal matrix (QR of a Gaussian matrix)."""
    if p == 0:
        return np.zeros((0, 0))
    G = rng.standard_normal((p, p))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))


class DiscreteGRD:
    """Weighted finite set of Krein vectors.

    Atoms are held as two row-stacked arrays, ``X`` (m x p1) for the positive
    blocks and ``Y`` (m x p2) for the negative blocks.
    """

    __slots__ = ("X", "Y", "weights")

    def __init__(self, X, Y, weights=None):
        X = np.array(X, dtype=float)
        Y = np.array(Y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1) if Y.size else Y.reshape(0, 0)
        m = max(X.shape[0], Y.shape[0])
        if X.size == 0 and X.shape[0] != m:
            X = np.zeros((m, X.shape[1] if X.ndim == 2 else 0))
        if Y.size == 0 and Y.shape[0] != m:
            Y = np.zeros((m, Y.shape[1] if Y.ndim == 2 else 0))
        if X.shape[0] != Y.shape[0]:
            raise ValueError("positive and negative blocks have different atom counts")
        if m == 0:
            raise ValueError("a DiscreteGRD needs at least one atom")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("atom coordinates must be finite")
        if weights is None:
            w = np.full(m, 1.0 / m)
        else:
            w = np.array(weights, dtype=float).reshape(-1)
            if w.size != m:
                raise ValueError(f"{w.size} weights for {m} atoms")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and nonnegative")
            total = w.sum()
            if abs(total - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {total!r}, not 1")
            if abs(total - 1.0) > 1e-12:
                w = w / total
        for a in (X, Y, w):
            a.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteGRD is immutable")

    @classmethod
    def from_atoms(cls, atoms: Iterable[KreinVector], weights=None) -> "DiscreteGRD":
        atoms = list(atoms)
        p1 = max(z.pos.size for z in atoms)
        p2 = max(z.neg.size for z in atoms)
        X = np.array([_pad(z.pos, p1) for z in atoms]).reshape(len(atoms), p1)
        Y = np.array([_pad(z.neg, p2) for z in atoms]).reshape(len(atoms), p2)
        return cls(X, Y, weights)

    @property
    def dims(self) -> tuple[int, int]:
        return self.X.shape[1], self.Y.shape[1]

    @property
    def atoms(self) -> list[KreinVector]:
        return [KreinVector(x, y) for x, y in zip(self.X, self.Y)]

    @property
    def points(self) -> np.ndarray:
        """Atoms as rows of the (m x (p1+p2)) Euclidean embedding."""
        return np.hstack([self.X, self.Y])

    def __len__(self) -> int:
        return self.X.shape[0]

    def padded(self, p1: int, p2: int) -> "DiscreteGRD":
        return DiscreteGRD(_pad(self.X, p1), _pad(self.Y, p2), self.weights)

    def scaled(self, c: float) -> "DiscreteGRD":
        return DiscreteGRD(c * self.X, c * self.Y, self.weights)

    def gram(self) -> np.ndarray:
        return self.X @ self.X.T - self.Y @ self.Y.T

    def is_valid_grd(self, atol: float = 1e-12) -> bool:
        G = self.gram()
        return bool(np.all(G >= -atol) and np.all(G <= 1 + atol))

    def second_moments(self) -> tuple[np.ndarray, np.ndarray]:
        w = self.weights[:, None]
        return self.X.T @ (w * self.X), self.Y.T @ (w * self.Y)

    def cross_moment(self) -> np.ndarray:
        """Weighted E[X Y^T]; zero for a GRD with uncorrelated blocks."""
        return self.X.T @ (self.weights[:, None] * self.Y)

    def mean_norm(self) -> float:
        return float(self.weights @ np.sqrt(np.sum(self.points**2, axis=1)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteGRD):
            return NotImplemented
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.Y, other.Y)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"DiscreteGRD(atoms={len(self)}, dims={self.dims})"


def gram_matrix(points) -> np.ndarray:
    """Matrix of pairwise Krein inner products."""
    if isinstance(points, DiscreteGRD):
        return points.gram()
    points = list(points)
    if not points:
        raise ValueError("gram_matrix needs at least one point")
    return DiscreteGRD.from_atoms(points).gram()


def echelon_basis(U: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(U).

    Standard basis vectors are projected onto the subspace in index order and
    Gram-Schmidt orthogonalized, so the first basis vector has the largest
    possible first entry, and so on (lexicographic tie rule).
    """
    d, m = U.shape
    basis = np.zeros((d, m))
    count = 0
    for j in range(d):
        if count == m:
            break
        v = U @ U[j]  # projection of e_j onto span(U)
        for _ in range(2):  # re-orthogonalize once for stability
            v -= basis[:, :count] @ (basis[:, :count].T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis[:, count] = v / nv
            count += 1
    return basis


def sorted_eigh(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, descending, with degenerate groups
    replaced by their echelon basis."""
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
    start = 0
    while start < vals.size:
        stop = start + 1
        while stop < vals.size and vals[start] - vals[stop] <= _TIE_RTOL * scale:
            stop += 1
        if stop - start > 1:
            vecs[:, start:stop] = echelon_basis(vecs[:, start:stop])
        start = stop
    return vals, vecs


def sign_fix_columns(C: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Sign vector making each column's largest-|entry| nonnegative.

    Entries within ``rtol`` of the column maximum count as ties; the lowest
    row index wins.
    """
    signs = np.ones(C.shape[1])
    for j in range(C.shape[1]):
        col = C[:, j]
        mags = np.abs(col)
        top = mags.max() if mags.size else 0.0
        if top == 0.0:
            continue
        i = int(np.argmax(mags >= top * (1 - rtol)))
        if col[i] < 0:
            signs[j] = -1.0
    return signs


def canonicalize(F: DiscreteGRD) -> tuple[DiscreteGRD, OrthogonalPair]:
    """Rotate each block so its weighted second moment is diagonal, nonincreasing.

    Returns the rotated GRD and the orthogonal pair that maps ``F`` onto it.
    Cross moments between the blocks are left as they are; see
    :meth:`DiscreteGRD.cross_moment`.
    """
    Sx, Sy = F.second_moments()
    blocks = []
    for S, Z in ((Sx, F.X), (Sy, F.Y)):
        if S.shape[0] == 0:
            blocks.append(np.zeros((0, 0)))
            continue
        _, V = sorted_eigh(S)
        V = V * sign_fix_columns(Z @ V)
        blocks.append(V.T)
    Q = OrthogonalPair(blocks[0], blocks[1])
    return Q.apply(F), Q


def truncate_grd(F: DiscreteGRD, p1: int, p2: int) -> DiscreteGRD:
    """Zero every coordinate past the first ``p1`` positive and ``p2`` negative ones."""
    d1, d2 = F.dims
    if not (0 <= p1 <= d1 and 0 <= p2 <= d2):
        raise ValueError(f"truncation ({p1}, {p2}) outside available dims ({d1}, {d2})")
    X = np.array(F.X)
    Y = np.array(F.Y)
    X[:, p1:] = 0.0
    Y[:, p2:] = 0.0
    return DiscreteGRD(X, Y, F.weights)
