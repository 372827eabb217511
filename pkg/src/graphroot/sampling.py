"""Exchangeable random graphs from graphons and graph root distributions.

Randomness comes from numpy's Philox4x64-10 counter-based generator.  A run
is keyed by ``(seed, domain)``; node ``i`` reads the uniforms at stream
positions ``[i*K, (i+1)*K)`` of the node domain and the pair ``i < j`` reads
position ``pair_index(i, j)`` of the edge domain.  Any slice of a stream can
be produced independently, so chunked or parallel sampling reproduces the
sequential result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .krein import KreinVector, truncate_prob
from .models import GRDSampler, StepGraphon

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10), counter-addressed streams"
NODE_DOMAIN = 1
EDGE_DOMAIN = 2
_BLOCK = 4  # uint64 outputs per Philox counter increment
_MAX_CHUNK_PAIRS = 1 << 22


def stream_uniforms(seed: int, domain: int, start: int, count: int) -> np.ndarray:
    """Uniforms at positions ``[start, start + count)`` of the ``(seed, domain)`` stream."""
    bitgen = np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, domain])
    q, r = divmod(start, _BLOCK)
    if q:
        bitgen.advance(q)
    gen = np.random.Generator(bitgen)
    return gen.random(r + count)[r:]


@dataclass(frozen=True)
class SamplingConfig:
    n: int
    rho: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (0 < self.rho <= 1):
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class LatentSample:
    """Node latent variables: Krein positions ``(X, Y)`` or graphon uniforms ``s``."""

    X: np.ndarray | None = None
    Y: np.ndarray | None = None
    s: np.ndarray | None = None
    labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.X) if self.X is not None else len(self.s)

    @property
    def positions(self) -> list[KreinVector]:
        if self.X is None:
            raise ValueError("graphon-route sample carries no Krein positions")
        return [KreinVector(x, y) for x, y in zip(self.X, self.Y)]


def pair_index(i, j, n: int):
    """Row-major index of the pair i < j among the n(n-1)/2 upper-triangle pairs."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * n - i * (i + 1) // 2 + (j - i - 1)


class AdjacencyMatrix:
    """Symmetric 0/1 matrix with zero diagonal, stored as a packed upper triangle."""

    __slots__ = ("n", "_bits", "_m")

    def __init__(self, n: int, upper: np.ndarray):
        upper = np.asarray(upper).astype(bool).reshape(-1)
        if upper.size != n * (n - 1) // 2:
            raise ValueError(f"expected {n * (n - 1) // 2} upper-triangle entries, got {upper.size}")
        self.n = int(n)
        self._bits = np.packbits(upper)
        self._m = int(upper.sum())

    @classmethod
    def from_dense(cls, A) -> "AdjacencyMatrix":
        A = np.asarray(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("adjacency matrix must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        if not np.all((A == 0) | (A == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        return cls(n, A[np.triu_indices(n, 1)])

    @classmethod
    def from_edges(cls, n: int, edges) -> "AdjacencyMatrix":
        upper = np.zeros(n * (n - 1) // 2, dtype=bool)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            i, j = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
            if np.any(i == j) or i.min() < 0 or j.max() >= n:
                raise ValueError("edges must join distinct nodes in [0, n)")
            upper[pair_index(i, j, n)] = True
        return cls(n, upper)

    @property
    def upper(self) -> np.ndarray:
        return np.unpackbits(self._bits, count=self.n * (self.n - 1) // 2).astype(bool)

    @property
    def edge_count(self) -> int:
        return self._m

    def edges(self) -> np.ndarray:
        """(m, 2) array of edges ``i < j`` in lexicographic order."""
        iu, ju = np.triu_indices(self.n, 1)
        mask = self.upper
        return np.column_stack([iu[mask], ju[mask]])

    def to_dense(self, dtype=np.uint8) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=dtype)
        iu, ju = np.triu_indices(self.n, 1)
        mask = self.upper
        A[iu[mask], ju[mask]] = 1
        A[ju[mask], iu[mask]] = 1
        return A

    def degrees(self) -> np.ndarray:
        return self.to_dense(np.int64).sum(axis=1)

    def permuted(self, perm) -> "AdjacencyMatrix":
        """Relabel so that new node ``k`` is old node ``perm[k]``."""
        perm = np.asarray(perm)
        D = self.to_dense()
        return AdjacencyMatrix.from_dense(D[np.ix_(perm, perm)])

    def triangle_count(self) -> int:
        D = self.to_dense(np.float64)
        return int(round(float(np.sum((D @ D) * D)) / 6))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._bits, other._bits)

    def __repr__(self) -> str:
        return f"AdjacencyMatrix(n={self.n}, edges={self._m})"


def sample_nodes(sampler: GRDSampler, cfg: SamplingConfig) -> LatentSample:
    K = sampler.n_uniforms
    U = stream_uniforms(cfg.seed, NODE_DOMAIN, 0, cfg.n * K).reshape(cfg.n, K)
    X, Y, labels = sampler.transform(U)
    return LatentSample(X=X, Y=Y, labels=labels)


def _bernoulli_upper(prob_rows, n: int, seed: int) -> np.ndarray:
    """Upper-triangle edge indicators; ``prob_rows(r0, r1)`` returns the
    (r1-r0, n) probability rows.  Rows are processed in chunks."""
    total = n * (n - 1) // 2
    upper = np.zeros(total, dtype=bool)
    rows_per_chunk = max(1, _MAX_CHUNK_PAIRS // max(n, 1))
    for r0 in range(0, max(n - 1, 0), rows_per_chunk):
        r1 = min(n - 1, r0 + rows_per_chunk)
        P = prob_rows(r0, r1)
        ii, jj = np.nonzero(np.arange(n)[None, :] > np.arange(r0, r1)[:, None])
        p = P[ii, jj]
        start = int(pair_index(r0, r0 + 1, n))
        u = stream_uniforms(seed, EDGE_DOMAIN, start, p.size)
        upper[start : start + p.size] = u < p
    return upper


def sample_adjacency(latent: LatentSample, cfg: SamplingConfig) -> AdjacencyMatrix:
    """Edges ``i < j`` drawn with probability ``T(rho * <Z_i, Z_j>)``."""
    if latent.X is None:
        raise ValueError("latent sample has no Krein positions")
    X, Y, n = latent.X, latent.Y, latent.n

    def rows(r0, r1):
        G = X[r0:r1] @ X.T - Y[r0:r1] @ Y.T
        return truncate_prob(cfg.rho * G)

    return AdjacencyMatrix(n, _bernoulli_upper(rows, n, cfg.seed))


def sample_grd_graph(sampler: GRDSampler, cfg: SamplingConfig) -> tuple[LatentSample, AdjacencyMatrix]:
    latent = sample_nodes(sampler, cfg)
    return latent, sample_adjacency(latent, cfg)


def sample_from_graphon(W: StepGraphon, cfg: SamplingConfig) -> tuple[LatentSample, AdjacencyMatrix]:
    """Latent uniforms ``s_i`` and edges drawn with probability ``rho * W(s_i, s_j)``."""
    s = stream_uniforms(cfg.seed, NODE_DOMAIN, 0, cfg.n)
    labels = W.block_of(s)
    n = cfg.n

    def rows(r0, r1):
        return truncate_prob(cfg.rho * W.block_values[np.ix_(labels[r0:r1], labels)])

    return LatentSample(s=s, labels=labels), AdjacencyMatrix(n, _bernoulli_upper(rows, n, cfg.seed))
