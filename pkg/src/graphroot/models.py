"""Step graphons and exact graph root distributions for block models.

The factorization of a step graphon follows the spectral decomposition of
its integral operator: with ``D = diag(measures)`` the nonzero eigenpairs of
``D^{1/2} B D^{1/2}`` give the coordinates of the block atoms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaincinv

from .embedding import SignedSpectrum, signed_eigendecompose
from .krein import DiscreteGRD, sign_fix_columns, truncate_grd, truncate_prob

RANK_TOL = 1e-12


class ConfigError(ValueError):
    """Invalid model or experiment configuration."""


def _check_prob_matrix(B, name="B") -> np.ndarray:
    B = np.array(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty square matrix, got shape {B.shape}")
    if not np.allclose(B, B.T, rtol=0, atol=1e-12):
        raise ValueError(f"{name} is not symmetric")
    if np.any(B < 0) or np.any(B > 1):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return (B + B.T) / 2


def _check_simplex(pi, k=None, name="pi") -> np.ndarray:
    pi = np.array(pi, dtype=float).reshape(-1)
    if k is not None and pi.size != k:
        raise ValueError(f"{name} has length {pi.size}, expected {k}")
    if np.any(pi <= 0):
        raise ValueError(f"{name} must be strictly positive")
    if abs(pi.sum() - 1) > 1e-9:
        raise ValueError(f"{name} sums to {pi.sum()}, not 1")
    return pi / pi.sum()


@dataclass(frozen=True, eq=False)
class StepGraphon:
    """Graphon constant on the blocks ``[c_{i-1}, c_i) x [c_{j-1}, c_j)``
    with ``c`` the cumulative block measures."""

    block_values: np.ndarray
    block_measures: np.ndarray

    def __post_init__(self):
        B = _check_prob_matrix(self.block_values, "block_values")
        pi = _check_simplex(self.block_measures, B.shape[0], "block_measures")
        B.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "block_values", B)
        object.__setattr__(self, "block_measures", pi)

    @classmethod
    def constant(cls, q: float) -> "StepGraphon":
        return cls(np.array([[q]]), np.array([1.0]))

    @property
    def k(self) -> int:
        return self.block_measures.size

    @property
    def breakpoints(self) -> np.ndarray:
        c = np.cumsum(self.block_measures)
        c[-1] = 1.0
        return c

    def block_of(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > 1):
            raise ValueError("graphon arguments must lie in [0, 1]")
        idx = np.searchsorted(self.breakpoints, s, side="right")
        return np.minimum(idx, self.k - 1)

    def refine(self, cuts: np.ndarray) -> "StepGraphon":
        """Same function on the partition given by the sorted breakpoints ``cuts``."""
        lo = np.concatenate([[0.0], cuts[:-1]])
        mid = (lo + cuts) / 2
        idx = self.block_of(mid)
        return StepGraphon(self.block_values[np.ix_(idx, idx)], np.diff(np.concatenate([[0.0], cuts])))


def graphon_eval(W: StepGraphon, s: float, t: float) -> float:
    """Value of the step graphon at (s, t); block boundaries are right-continuous."""
    i, j = W.block_of(s), W.block_of(t)
    return float(W.block_values[i, j])


def common_refinement(W1: StepGraphon, W2: StepGraphon, tol: float = 1e-12) -> tuple[StepGraphon, StepGraphon]:
    cuts = np.unique(np.concatenate([W1.breakpoints, W2.breakpoints]))
    keep = np.diff(np.concatenate([[0.0], cuts])) > tol
    cuts = cuts[keep]
    cuts[-1] = 1.0
    return W1.refine(cuts), W2.refine(cuts)


def graphon_l2_distance(W1: StepGraphon, W2: StepGraphon) -> float:
    A, B = common_refinement(W1, W2)
    pi = A.block_measures
    D = A.block_values - B.block_values
    return float(np.sqrt(pi @ (D**2) @ pi))


def grd_graphon(F: DiscreteGRD) -> StepGraphon:
    """Step graphon sampled by ``F`` when its atoms are laid out as blocks.

    Edge probabilities are the clamped inner products; atoms with zero weight
    are dropped.
    """
    keep = F.weights > 0
    G = truncate_prob(F.gram()[np.ix_(keep, keep)])
    return StepGraphon(np.atleast_2d(G), F.weights[keep] / F.weights[keep].sum())


def _sqrt_psd(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root of S and its inverse."""
    if np.count_nonzero(S - np.diag(np.diag(S))) == 0:
        d = np.diag(S)
        return np.diag(np.sqrt(d)), np.diag(1 / np.sqrt(d))
    w, V = np.linalg.eigh(S)
    if np.any(w <= 0):
        raise ValueError("measure matrix must be positive definite")
    return (V * np.sqrt(w)) @ V.T, (V / np.sqrt(w)) @ V.T


def factorize(B: np.ndarray, S: np.ndarray, weights=None) -> tuple[DiscreteGRD, SignedSpectrum]:
    """Atoms ``z_1..z_k`` with ``<z_i, z_j> = B_ij`` and diagonal moments under ``S``.

    ``S`` is the second-moment matrix of the mixing coordinates: ``diag(pi)``
    for a block model, ``E[g g^T]`` for mixed memberships.  The returned GRD
    carries ``weights`` (defaults to the diagonal of ``S``).
    """
    half, inv_half = _sqrt_psd(S)
    M = half @ B @ half
    spec = signed_eigendecompose((M + M.T) / 2, zero_rtol=RANK_TOL)
    X = inv_half @ spec.pos_vecs * np.sqrt(spec.pos_vals)
    Y = inv_half @ spec.neg_vecs * np.sqrt(spec.neg_vals)
    X = X * sign_fix_columns(X)
    Y = Y * sign_fix_columns(Y)
    if weights is None:
        weights = np.diag(S) / np.trace(S)
    return DiscreteGRD(X, Y, weights), spec


def spectral_factorize(W: StepGraphon) -> tuple[DiscreteGRD, SignedSpectrum]:
    """Canonical GRD of a step graphon and the signed spectrum of its operator."""
    pi = W.block_measures
    return factorize(W.block_values, np.diag(pi), pi)


@dataclass(frozen=True, eq=False)
class SBMSpec:
    pi: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        B = _check_prob_matrix(self.B)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", _check_simplex(self.pi, B.shape[0]))

    @property
    def k(self) -> int:
        return self.pi.size

    def graphon(self) -> StepGraphon:
        return StepGraphon(self.B, self.pi)


def grd_from_sbm(spec: SBMSpec, vertex_measures=None) -> DiscreteGRD:
    """Point-mass GRD of a stochastic block model.

    By default the atoms come from the ``pi``-weighted factorization, which
    is the canonical representative.  ``vertex_measures`` overrides the
    weighting used to place the atoms (``"uniform"`` or a probability
    vector); the atom weights stay ``pi`` either way and the Gram matrix of
    the atoms is ``B`` regardless.
    """
    if vertex_measures is None:
        return spectral_factorize(spec.graphon())[0]
    if isinstance(vertex_measures, str):
        if vertex_measures != "uniform":
            raise ValueError(f"unknown vertex weighting {vertex_measures!r}")
        vertex_measures = np.full(spec.k, 1.0 / spec.k)
    v = _check_simplex(vertex_measures, spec.k, "vertex_measures")
    return factorize(spec.B, np.diag(v), spec.pi)[0]


@dataclass(frozen=True)
class Theta:
    """Activeness distribution: ``uniform`` on [lo, hi] or ``point`` at lo."""

    kind: str = "point"
    lo: float = 1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "point"):
            raise ValueError(f"unsupported theta kind {self.kind!r}")
        if self.kind == "point":
            object.__setattr__(self, "hi", self.lo)
        if not (0 < self.lo <= self.hi):
            raise ValueError("theta support must be positive with lo <= hi")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "point":
            return np.full_like(u, self.lo)
        return self.lo + (self.hi - self.lo) * u


@dataclass(frozen=True, eq=False)
class DCBMSpec:
    sbm: SBMSpec
    theta: Theta = field(default_factory=Theta)

    def __post_init__(self):
        if self.theta.hi**2 * float(self.sbm.B.max()) > 1 + 1e-12:
            raise ValueError("theta support pushes edge probabilities above 1")


@dataclass(frozen=True, eq=False)
class MMBMSpec:
    B: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        B = _check_prob_matrix(self.B)
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.size != B.shape[0]:
            raise ValueError(f"a has length {a.size}, expected {B.shape[0]}")
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise ValueError("Dirichlet concentration must be strictly positive")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "a", a)

    def second_moment(self) -> np.ndarray:
        """E[g g^T] for g ~ Dirichlet(a)."""
        a0 = self.a.sum()
        return (np.diag(self.a) + np.outer(self.a, self.a)) / (a0 * (a0 + 1))


@dataclass(frozen=True, eq=False)
class GRDSampler:
    """Maps per-node uniforms to GRD draws.

    Every kind consumes a fixed number of uniforms per node
    (``n_uniforms``), so node ``i`` of a counter-based stream always sees the
    same inputs regardless of how many nodes are drawn.

    * ``discrete``: atom chosen by inverse CDF of the weights.
    * ``dcbm-segments``: block as above, then ``theta`` scales the atom.
    * ``mmbm-polytope``: Dirichlet weights from inverse-CDF Gamma draws,
      then the convex combination of the vertex atoms.
    """

    kind: str
    vertices: DiscreteGRD
    theta: Theta | None = None
    a: np.ndarray | None = None

    @property
    def dims(self) -> tuple[int, int]:
        return self.vertices.dims

    @property
    def n_uniforms(self) -> int:
        return {"discrete": 1, "dcbm-segments": 2, "mmbm-polytope": len(self.vertices)}[self.kind]

    def transform(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw ``(X, Y, labels)`` from an (n, n_uniforms) array of uniforms.

        ``labels`` is the block index for the block kinds and the argmax
        membership for the mixed-membership kind.
        """
        U = np.asarray(U, dtype=float).reshape(-1, self.n_uniforms)
        V = self.vertices
        if self.kind in ("discrete", "dcbm-segments"):
            cdf = np.cumsum(V.weights)
            labels = np.minimum(np.searchsorted(cdf, U[:, 0], side="right"), len(V) - 1)
            scale = self.theta.from_uniform(U[:, 1]) if self.kind == "dcbm-segments" else np.ones(len(U))
            return V.X[labels] * scale[:, None], V.Y[labels] * scale[:, None], labels
        g = self.memberships(U)
        return g @ V.X, g @ V.Y, np.argmax(g, axis=1)

    def memberships(self, U: np.ndarray) -> np.ndarray:
        G = gammaincinv(self.a[None, :], np.clip(U, 1e-300, None))
        return G / G.sum(axis=1, keepdims=True)

    def draw(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.transform(rng.random((n, self.n_uniforms)))


def grd_sampler_from_sbm(spec: SBMSpec, vertex_measures=None) -> GRDSampler:
    return GRDSampler("discrete", grd_from_sbm(spec, vertex_measures))


def grd_sampler_from_dcbm(spec: DCBMSpec, vertex_measures=None) -> GRDSampler:
    """Mixture of segments from the origin to the block atoms."""
    return GRDSampler("dcbm-segments", grd_from_sbm(spec.sbm, vertex_measures), theta=spec.theta)


def grd_sampler_from_mmbm(spec: MMBMSpec, pi_for_vertices=None) -> GRDSampler:
    """Polytope-supported GRD of a mixed-membership block model.

    With ``pi_for_vertices`` given, the vertex atoms are the block-model
    factorization of ``B`` under that weighting.  When omitted, they are
    placed with the Dirichlet second moment ``E[g g^T]`` so that the
    resulting distribution is canonical (diagonal second moments and
    uncorrelated blocks).
    """
    k = spec.B.shape[0]
    if pi_for_vertices is None:
        vertices, _ = factorize(spec.B, spec.second_moment(), np.full(k, 1.0 / k))
    else:
        if isinstance(pi_for_vertices, str) and pi_for_vertices == "uniform":
            pi_for_vertices = np.full(k, 1.0 / k)
        pi = _check_simplex(pi_for_vertices, k, "pi_for_vertices")
        vertices, _ = factorize(spec.B, np.diag(pi), pi)
    return GRDSampler("mmbm-polytope", vertices, a=spec.a)


def truncated_graphon(F: DiscreteGRD, n_pos: int, n_neg: int | None = None) -> StepGraphon:
    """Graphon of ``F`` keeping the leading ``n_pos``/``n_neg`` coordinates."""
    n_neg = n_pos if n_neg is None else n_neg
    p1, p2 = F.dims
    return grd_graphon(truncate_grd(F, min(n_pos, p1), min(n_neg, p2)))


# model configuration files

_MODEL_KEYS = {
    "sbm": {"model", "pi", "B"},
    "dcbm": {"model", "pi", "B", "theta"},
    "mmbm": {"model", "B", "a"},
}


def parse_model_config(cfg: dict, where: str = ""):
    """Build an SBMSpec / DCBMSpec / MMBMSpec from a decoded JSON object."""
    prefix = f"{where}." if where else ""
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where or '<root>'}: expected an object")
    model = cfg.get("model")
    if model not in _MODEL_KEYS:
        raise ConfigError(f"{prefix}model: expected one of sbm, dcbm, mmbm, got {model!r}")
    unknown = set(cfg) - _MODEL_KEYS[model]
    if unknown:
        raise ConfigError(f"{prefix}{sorted(unknown)[0]}: unknown key for model {model!r}")
    missing = _MODEL_KEYS[model] - set(cfg) - {"theta"}
    if missing:
        raise ConfigError(f"{prefix}{sorted(missing)[0]}: required key missing")

    def grab(key, fn):
        try:
            return fn(cfg[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{prefix}{key}: {exc}") from exc

    B = grab("B", lambda b: _check_prob_matrix(b))
    try:
        if model == "mmbm":
            return MMBMSpec(B, grab("a", lambda a: np.array(a, dtype=float)))
        sbm = SBMSpec(grab("pi", lambda p: np.array(p, dtype=float)), B)
        if model == "sbm":
            return sbm
        th = cfg.get("theta", {"kind": "point", "lo": 1.0})
        if not isinstance(th, dict) or set(th) - {"kind", "lo", "hi"}:
            raise ConfigError(f"{prefix}theta: expected object with keys kind, lo, hi")
        theta = grab("theta", lambda t: Theta(t.get("kind", "point"), float(t.get("lo", 1.0)), float(t.get("hi", t.get("lo", 1.0)))))
        return DCBMSpec(sbm, theta)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{prefix}<model>: {exc}") from exc


def load_model_config(path) -> object:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_model_config(cfg)


def sampler_for(spec, vertex_measures=None) -> GRDSampler:
    if isinstance(spec, SBMSpec):
        return grd_sampler_from_sbm(spec, vertex_measures)
    if isinstance(spec, DCBMSpec):
        return grd_sampler_from_dcbm(spec, vertex_measures)
    if isinstance(spec, MMBMSpec):
        return grd_sampler_from_mmbm(spec, vertex_measures)
    raise TypeError(f"not a model spec: {spec!r}")
