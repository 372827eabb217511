"""End-to-end acceptance checks.

Every test records one PASS/FAIL line, printed in the terminal summary under
"acceptance criteria".  Thresholds and sizes are fixed here; do not relax them.
"""

import itertools
import time

import numpy as np

from conftest import B_EXAMPLE, B_SIM, PI, ROUNDED_ATOMS, record
from graphroot.embedding import choose_dims, embed, signed_eigendecompose
from graphroot.krein import DiscreteGRD, KreinVector, OrthogonalPair, krein_inner
from graphroot.models import (
    DCBMSpec,
    MMBMSpec,
    SBMSpec,
    StepGraphon,
    Theta,
    grd_from_sbm,
    graphon_l2_distance,
    sampler_for,
    spectral_factorize,
    truncated_graphon,
)
from graphroot.pipeline import cmd_converge, parse_experiment_config
from graphroot.sampling import SamplingConfig, sample_from_graphon, sample_grd_graph
from graphroot.transport import check_cut_bound, ground_cost, orthogonal_wasserstein, wasserstein

SIM_CONFIG = {"model": "sbm", "pi": PI.tolist(), "B": B_SIM.tolist()}
N_GRID = [250, 500, 1000, 2000]


def test_c01_block_model_atoms():
    t0 = time.perf_counter()
    F = grd_from_sbm(SBMSpec(PI, B_EXAMPLE), "uniform")
    elapsed = time.perf_counter() - t0
    # canonical GRDs are fixed only up to coordinate signs
    best = min(
        float(np.abs(F.points * np.array(s) - ROUNDED_ATOMS).max())
        for s in itertools.product((1.0, -1.0), repeat=3)
    )
    gram_err = float(np.abs(F.gram() - B_EXAMPLE).max())
    ok = F.dims == (1, 2) and best <= 0.005 and gram_err <= 1e-8 and elapsed < 1.0
    record("C1 block-model atoms", ok, f"max coord err {best:.4f} (<=0.005), gram err {gram_err:.1e} (<=1e-8), {elapsed:.3f}s")
    assert ok


def test_c02_rank_two():
    F, spec = spectral_factorize(StepGraphon(B_SIM, PI))
    M = np.sqrt(PI)[:, None] * B_SIM * np.sqrt(PI)[None, :]
    third = float(np.sort(np.abs(np.linalg.eigvalsh(M)))[0])
    ok = spec.rank == (1, 1) and third < 1e-12
    record("C2 rank structure", ok, f"signed rank {spec.rank}, third |eigenvalue| {third:.1e} (<1e-12)")
    assert ok


def test_c03_dimension_selection():
    t0 = time.perf_counter()
    sbm = SBMSpec(PI, B_SIM)
    models = {
        "sbm": sbm,
        "dcbm": DCBMSpec(sbm, Theta("uniform", 0.7, 1.4)),
        "mmbm": MMBMSpec(B_SIM, [0.5, 0.5, 0.5]),
    }
    hits = {}
    for name, spec in models.items():
        sampler = sampler_for(spec)
        hits[name] = 0
        for seed in range(20):
            _, A = sample_grd_graph(sampler, SamplingConfig(1000, seed=seed))
            hits[name] += choose_dims(signed_eigendecompose(A), 1000) == (1, 1)
    elapsed = time.perf_counter() - t0
    ok = all(h >= 18 for h in hits.values()) and elapsed < 120
    record("C3 dimension selection", ok, f"(1,1) hits per 20 seeds {hits} (>=18 each), {elapsed:.1f}s (<120s)")
    assert ok


def test_c04_noiseless_recovery():
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(50, 3)) * np.array([3.0, 2.0, 1.0])
    Z -= Z.mean(axis=0)
    G = Z @ Z.T
    vals = np.sort(np.linalg.eigvalsh(G))[::-1][:3]
    emb = embed(signed_eigendecompose(G), 3, 0).as_grd()
    d = orthogonal_wasserstein(emb, DiscreteGRD(Z, np.zeros((50, 0)))).value
    ok = d <= 1e-6
    record("C4 noiseless recovery", ok, f"d_ow {d:.1e} (<=1e-6), eigenvalues {np.round(vals, 1).tolist()}")
    assert ok


def random_grd(rng, m, p1, p2, uniform=False):
    w = None if uniform else rng.dirichlet(np.ones(m))
    return DiscreteGRD(rng.normal(size=(m, p1)) * 0.5, rng.normal(size=(m, p2)) * 0.5, w)


def test_c05_cut_bound():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    held, worst = 0, np.inf
    for _ in range(100):
        p1, p2 = int(rng.integers(1, 4)), int(rng.integers(0, 3))
        F1 = random_grd(rng, int(rng.integers(1, 6)), p1, p2)
        F2 = random_grd(rng, int(rng.integers(1, 6)), p1, p2)
        r = check_cut_bound(F1, F2)
        held += r.holds
        worst = min(worst, r.margin)
    elapsed = time.perf_counter() - t0
    ok = held == 100 and elapsed < 30
    record("C5 cut-norm bound", ok, f"{held}/100 pairs hold, smallest margin {worst:.3e}, {elapsed:.1f}s (<30s)")
    assert ok


def test_c06_exact_transport():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 8))
        F1, F2 = random_grd(rng, m, 2, 1, True), random_grd(rng, m, 2, 1, True)
        C = ground_cost(F1, F2)
        oracle = min(C[np.arange(m), list(p)].sum() for p in itertools.permutations(range(m))) / m
        worst = max(worst, abs(wasserstein(F1, F2).cost - oracle))
    ok = worst <= 1e-10
    record("C6 exact transport", ok, f"max |d_w - exhaustive| over 50 instances {worst:.1e} (<=1e-10)")
    assert ok


def converge(tmp_path, **extra):
    raw = {
        "model": SIM_CONFIG,
        "n_grid": N_GRID,
        "seeds": list(range(10)),
        "dims_rule": {"kind": "fixed", "p1": 1, "p2": 1},
        "output_dir": str(tmp_path),
        "record_runtime": False,
    }
    raw.update(extra)
    return cmd_converge(parse_experiment_config(raw))["sbm"]


def test_c07_convergence_trend(tmp_path):
    t0 = time.perf_counter()
    s = converge(tmp_path)
    elapsed = time.perf_counter() - t0
    med = s["median_d_w"]
    ok = all(b < a for a, b in zip(med, med[1:])) and s["slope_d_w"] <= -0.25 and elapsed < 300
    record(
        "C7 convergence trend", ok,
        f"median d_w {[round(v, 4) for v in med]}, slope {s['slope_d_w']:.3f} (<=-0.25), {elapsed:.0f}s (<300s)",
    )
    assert ok


def test_c08_sparse_regime(tmp_path):
    s = converge(tmp_path, rho_rule={"kind": "log", "c": 4.0})
    med = s["median_d_ow"]
    ok = all(b < a for a, b in zip(med, med[1:]))
    record("C8 sparse regime", ok, f"median d_ow {[round(v, 4) for v in med]} decreasing in n")
    assert ok


def test_c09_sampling_equivalence():
    spec = SBMSpec(PI, B_EXAMPLE)
    sampler = sampler_for(spec)
    n, reps = 2000, 20
    pairs, triples = n * (n - 1) / 2, n * (n - 1) * (n - 2) / 6

    def densities(A):
        return A.edge_count / pairs, A.triangle_count() / triples

    # disjoint seeds so the two routes do not share random streams
    g = np.array([densities(sample_from_graphon(spec.graphon(), SamplingConfig(n, seed=s))[1]) for s in range(reps)])
    r = np.array([densities(sample_grd_graph(sampler, SamplingConfig(n, seed=1000 + s))[1]) for s in range(reps)])
    se = np.sqrt(g.var(axis=0, ddof=1) / reps + r.var(axis=0, ddof=1) / reps)
    z = np.abs(g.mean(axis=0) - r.mean(axis=0)) / se
    ok = bool(np.all(z <= 3))
    record("C9 sampling equivalence", ok, f"edge z {z[0]:.2f}, triangle z {z[1]:.2f} (<=3 pooled SE)")
    assert ok


def test_c10_truncation_monotone():
    rng = np.random.default_rng(10)
    ok_all, worst_end = True, 0.0
    for _ in range(20):
        k = int(rng.integers(2, 7))
        B = rng.uniform(size=(k, k))
        W = StepGraphon((B + B.T) / 2, rng.dirichlet(np.ones(k)))
        F, spec = spectral_factorize(W)
        r = max(spec.rank)
        d = [graphon_l2_distance(W, truncated_graphon(F, N, N)) for N in range(r + 1)]
        ok_all &= bool(np.all(np.diff(d) <= 0))
        worst_end = max(worst_end, d[-1])
    ok = ok_all and worst_end <= 1e-10
    record("C10 truncation", ok, f"nonincreasing in N: {ok_all}, max L2 at full rank {worst_end:.1e} (<=1e-10)")
    assert ok


def test_c11_metric_and_invariance():
    rng = np.random.default_rng(11)
    worst_orbit = 0.0
    for _ in range(50):
        p1 = int(rng.integers(1, 4))
        p2 = int(rng.integers(0, 5 - p1))
        F = random_grd(rng, int(rng.integers(2, 7)), p1, p2, True)
        Q = OrthogonalPair.random(p1, p2, rng)
        worst_orbit = max(worst_orbit, orthogonal_wasserstein(F, Q.apply(F)).value)

    axioms = True
    for _ in range(50):
        F1, F2, F3 = (random_grd(rng, int(rng.integers(1, 6)), 2, 1) for _ in range(3))
        d12, d21 = wasserstein(F1, F2).cost, wasserstein(F2, F1).cost
        d13, d23 = wasserstein(F1, F3).cost, wasserstein(F2, F3).cost
        axioms &= d12 >= 0 and abs(d12 - d21) <= 1e-9 and d13 <= d12 + d23 + 1e-8
        axioms &= wasserstein(F1, F1).cost <= 1e-12

    krein = True
    for _ in range(200):
        a, b, c = (KreinVector(rng.normal(size=3), rng.normal(size=2)) for _ in range(3))
        alpha = rng.normal()
        lhs = krein_inner(alpha * a + b, c)
        krein &= abs(lhs - alpha * krein_inner(a, c) - krein_inner(b, c)) <= 1e-12
        krein &= krein_inner(a, b) == krein_inner(b, a)
        Q = OrthogonalPair.random(3, 2, rng)
        krein &= abs(krein_inner(Q.apply(a), Q.apply(b)) - krein_inner(a, b)) <= 1e-10

    ok = worst_orbit <= 1e-8 and axioms and krein
    record(
        "C11 metric/invariance", ok,
        f"max d_ow(F, QF) {worst_orbit:.1e} (<=1e-8), d_w axioms {axioms}, Krein properties {krein}",
    )
    assert ok
