"""Wasserstein and orthogonal Wasserstein distances between discrete GRDs,
and exact cut norms of step functions."""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .krein import DiscreteGRD, OrthogonalPair, canonicalize, haar_orthogonal
from .models import StepGraphon, common_refinement

# POT probes every installed array backend on import; only numpy is needed here.
for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

CERT_TOL = 1e-8
MAX_CUT_BLOCKS = 20
SINKHORN_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class TransportPlan:
    coupling: np.ndarray
    cost: float
    certified: bool | None = None
    converged: bool = True
    iterations: int = 0

    def support(self, tol: float = 0.0) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(self.coupling > tol)
        return list(zip(ii.tolist(), jj.tolist()))


def _common(F1: DiscreteGRD, F2: DiscreteGRD) -> tuple[DiscreteGRD, DiscreteGRD]:
    p1 = max(F1.dims[0], F2.dims[0])
    p2 = max(F1.dims[1], F2.dims[1])
    return F1.padded(p1, p2), F2.padded(p1, p2)


def ground_cost(F1: DiscreteGRD, F2: DiscreteGRD) -> np.ndarray:
    """Matrix of Krein norms ``||z_i - z'_j||`` (Euclidean on the stacked blocks)."""
    A, B = _common(F1, F2)
    return cdist(A.points, B.points)


def _is_uniform(w: np.ndarray) -> bool:
    return bool(np.all(w == w[0]))


def certify(C: np.ndarray, coupling: np.ndarray, u: np.ndarray, v: np.ndarray, tol: float = CERT_TOL) -> bool:
    """Complementary slackness: reduced costs nonnegative, zero on the support."""
    scale = max(1.0, float(np.max(np.abs(C))))
    reduced = C - u[:, None] - v[None, :]
    if reduced.min() < -tol * scale:
        return False
    return bool(np.all(np.abs(reduced[coupling > 0]) <= tol * scale))


def solve_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> TransportPlan:
    """Exact optimal coupling of weights ``a`` and ``b`` for the cost matrix ``C``."""
    m, k = C.shape
    if m == k and _is_uniform(a) and _is_uniform(b):
        rows, cols = linear_sum_assignment(C)
        P = np.zeros_like(C)
        P[rows, cols] = 1.0 / m
        return TransportPlan(P, float(C[rows, cols].sum() / m), certified=None)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b * (a.sum() / b.sum()), dtype=np.float64)
    P, log = ot.emd(a, b, np.ascontiguousarray(C), numItermax=10_000_000, log=True)
    if log.get("warning"):
        warnings.warn(f"network simplex: {log['warning']}")
    ok = certify(C, P, log["u"], log["v"])
    return TransportPlan(P, float(np.sum(P * C)), certified=ok)


def wasserstein(F1: DiscreteGRD, F2: DiscreteGRD) -> TransportPlan:
    """Exact W1 distance with ground cost the Krein norm."""
    return solve_transport(F1.weights, F2.weights, ground_cost(F1, F2))


def sinkhorn_wasserstein(
    F1: DiscreteGRD,
    F2: DiscreteGRD,
    epsilon: float,
    max_iter: int = SINKHORN_MAX_ITER,
    tol: float = 1e-9,
) -> TransportPlan:
    """Entropic transport plan by log-domain Sinkhorn iterations.

    The reported cost is the transport cost of the regularized plan, which
    exceeds the exact value by at most ``epsilon * log(m * m')`` at
    convergence.  Stops when the column marginal error drops below ``tol``
    or after ``max_iter`` sweeps; in the latter case ``converged`` is False
    and a warning is issued.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    C = ground_cost(F1, F2)
    la, lb = np.log(F1.weights), np.log(F2.weights)
    f = np.zeros(C.shape[0])
    g = np.zeros(C.shape[1])
    # anneal from a coarse regularization down to epsilon, warm-starting the
    # potentials; small epsilons converge far faster this way
    schedule = []
    e = max(float(C.max()), epsilon)
    while e > epsilon:
        schedule.append(e)
        e /= 4
    schedule.append(epsilon)
    converged = False
    it = 0
    for stage, eps in enumerate(schedule):
        final = stage == len(schedule) - 1
        stage_tol = tol if final else max(tol, 1e-3)
        done = False
        while it < max_iter:
            it += 1
            f = eps * (la - logsumexp((g[None, :] - C) / eps, axis=1))
            g = eps * (lb - logsumexp((f[:, None] - C) / eps, axis=0))
            if it % 10 == 0 or it == max_iter:
                logP = (f[:, None] + g[None, :] - C) / eps
                err = np.abs(np.exp(logsumexp(logP, axis=1)) - F1.weights).sum()
                if err < stage_tol:
                    done = True
                    break
        if final:
            converged = done
        if it >= max_iter:
            break
    P = np.exp((f[:, None] + g[None, :] - C) / epsilon)
    if not converged:
        warnings.warn(f"Sinkhorn did not converge in {max_iter} iterations")
    return TransportPlan(P, float(np.sum(P * C)), converged=converged, iterations=it)


@dataclass(frozen=True, eq=False)
class OwResult:
    """Best alignment found; ``value`` is an upper bound on d_ow."""

    value: float
    rotation: OrthogonalPair
    plan: TransportPlan
    restarts_used: int


def _procrustes(A: np.ndarray, B: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Orthogonal Q minimizing sum_ij P_ij ||a_i - Q b_j||^2."""
    if A.shape[1] == 0:
        return np.zeros((0, 0))
    U, _, Vt = np.linalg.svd(B.T @ P.T @ A)
    return Vt.T @ U.T


def _align(F1: DiscreteGRD, F2: DiscreteGRD, Q: OrthogonalPair, tol: float, max_iter: int):
    """Alternate exact transport and blockwise Procrustes from rotation Q."""
    best = None
    prev = np.inf
    for _ in range(max_iter):
        plan = wasserstein(F1, Q.apply(F2))
        if best is None or plan.cost < best[0]:
            best = (plan.cost, Q, plan)
        if plan.cost <= 1e-15 or (np.isfinite(prev) and prev - plan.cost <= tol * prev):
            break
        prev = plan.cost
        P = plan.coupling
        Q = OrthogonalPair(_procrustes(F1.X, F2.X, P), _procrustes(F1.Y, F2.Y, P), atol=1e-8)
    return best


def sign_flips(p1: int, p2: int) -> list[OrthogonalPair]:
    out = []
    for s in product((1.0, -1.0), repeat=p1 + p2):
        out.append(OrthogonalPair(np.diag(s[:p1]), np.diag(s[p1:])))
    return out


def _moment_starts(F1: DiscreteGRD, F2: DiscreteGRD, flips: list[OrthogonalPair]) -> list[OrthogonalPair]:
    """Rotations matching the second-moment eigenbases of F2 to those of F1.

    If F2 is an exact rotation of F1 with distinct moment eigenvalues, one of
    these (up to the listed coordinate signs) is that rotation.
    """
    _, Q1 = canonicalize(F1)
    _, Q2 = canonicalize(F2)
    back = OrthogonalPair(Q1.q_pos.T, Q1.q_neg.T)
    return [back.compose(S.compose(Q2)) for S in flips]


def orthogonal_wasserstein(
    F1: DiscreteGRD,
    F2: DiscreteGRD,
    restarts: int = 8,
    tol: float = 1e-10,
    seed: int = 0,
    max_iter: int = 100,
    inits: list[OrthogonalPair] | None = None,
    max_sign_dims: int = 4,
    workers: int = 1,
) -> OwResult:
    """Upper bound on the orthogonal Wasserstein distance.

    Alternating minimization over couplings and blockwise orthogonal maps
    applied to ``F2``.  The rotation step solves the squared-cost alignment in
    closed form; candidates are always scored with the unsquared cost.
    Starting points are the identity, every coordinate sign flip when
    ``p1 + p2 <= max_sign_dims``, the same flips composed with the map
    between the two second-moment eigenbases, any ``inits`` given, and
    ``restarts`` Haar-random pairs seeded by ``(seed, r)``.  The objective
    is nonconvex, so the result is not claimed to be the global infimum.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    F1, F2 = _common(F1, F2)
    p1, p2 = F1.dims
    flips = sign_flips(p1, p2) if p1 + p2 <= max_sign_dims else [OrthogonalPair.identity(p1, p2)]
    starts = list(flips)
    starts += _moment_starts(F1, F2, flips)
    starts += list(inits or [])
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        starts.append(OrthogonalPair(haar_orthogonal(p1, rng), haar_orthogonal(p2, rng)))

    def run(Q):
        return _align(F1, F2, Q, tol, max_iter)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(Q) for Q in starts]
    # first strictly smallest wins, so the outcome does not depend on scheduling
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    value, Q, plan = results[best]
    return OwResult(float(value), Q, plan, restarts)


def _cut_norm_blocks(D: np.ndarray, mu: np.ndarray, chunk: int = 1 << 14) -> float:
    """max over block unions S, S' of |sum_{a in S, b in S'} mu_a D_ab mu_b|."""
    K = mu.size
    if K > MAX_CUT_BLOCKS:
        raise ValueError(f"{K} blocks exceeds the exhaustive-search limit of {MAX_CUT_BLOCKS}")
    R = mu[:, None] * D * mu[None, :]
    bits = 1 << np.arange(K)
    best = 0.0
    for start in range(0, 1 << K, chunk):
        masks = np.arange(start, min(start + chunk, 1 << K))
        S = ((masks[:, None] & bits[None, :]) > 0).astype(float)
        rows = S @ R
        # for a fixed S the best S' takes all positive (or all negative) columns
        pos = np.clip(rows, 0, None).sum(axis=1)
        neg = -np.clip(rows, None, 0).sum(axis=1)
        best = max(best, float(pos.max()), float(neg.max()))
    return best


def cut_norm_step(W1: StepGraphon, W2: StepGraphon) -> float:
    """Exact cut norm of ``W1 - W2`` on their common partition (identity alignment)."""
    A, B = common_refinement(W1, W2)
    if A.k > MAX_CUT_BLOCKS:
        raise ValueError(f"{A.k} blocks exceeds the exhaustive-search limit of {MAX_CUT_BLOCKS}")
    return _cut_norm_blocks(A.block_values - B.block_values, A.block_measures)


@dataclass(frozen=True)
class CutBoundReport:
    lhs: float
    rhs: float
    atoms_1: int
    atoms_2: int

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-9

    def to_json(self) -> str:
        def g(x):
            return float(f"{x:.12g}")

        return json.dumps(
            {"lhs": g(self.lhs), "rhs": g(self.rhs), "margin": g(self.margin),
             "atoms_1": self.atoms_1, "atoms_2": self.atoms_2}
        )


def check_cut_bound(F1: DiscreteGRD, F2: DiscreteGRD) -> CutBoundReport:
    """Cut norm of the two induced graphons, aligned by the optimal coupling,
    against ``(E||Z_1|| + E||Z_2||) * d_w``."""
    if len(F1) + len(F2) > MAX_CUT_BLOCKS:
        raise ValueError(f"at most {MAX_CUT_BLOCKS} atoms in total are supported")
    plan = wasserstein(F1, F2)
    ii, jj = np.nonzero(plan.coupling > 0)
    mu = plan.coupling[ii, jj]
    mu = mu / mu.sum()
    G1 = F1.gram()[np.ix_(ii, ii)]
    G2 = F2.gram()[np.ix_(jj, jj)]
    lhs = _cut_norm_blocks(G1 - G2, mu)
    rhs = (F1.mean_norm() + F2.mean_norm()) * plan.cost
    return CutBoundReport(lhs, rhs, len(F1), len(F2))
