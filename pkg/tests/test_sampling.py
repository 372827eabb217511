import numpy as np
import pytest

import graphroot.sampling as sampling
from conftest import PI
from graphroot.krein import DiscreteGRD
from graphroot.models import GRDSampler, StepGraphon, grd_sampler_from_sbm
from graphroot.sampling import (
    AdjacencyMatrix,
    SamplingConfig,
    pair_index,
    sample_from_graphon,
    sample_grd_graph,
    sample_nodes,
    stream_uniforms,
)


def point_mass(x):
    return GRDSampler("discrete", DiscreteGRD([[x]], np.zeros((1, 0))))


def test_stream_slices_agree():
    full = stream_uniforms(5, 1, 0, 50)
    for start in (0, 1, 3, 4, 7, 17):
        assert np.array_equal(stream_uniforms(5, 1, start, 50 - start), full[start:])


def test_streams_depend_on_domain_and_seed():
    a = stream_uniforms(1, 1, 0, 10)
    assert not np.array_equal(a, stream_uniforms(1, 2, 0, 10))
    assert not np.array_equal(a, stream_uniforms(2, 1, 0, 10))


def test_pair_index_is_row_major():
    n = 6
    ii, jj = np.triu_indices(n, 1)
    assert np.array_equal(pair_index(ii, jj, n), np.arange(len(ii)))


def test_point_mass_positions():
    latent = sample_nodes(point_mass(0.6), SamplingConfig(100, seed=1))
    assert np.all(latent.X == 0.6)
    assert latent.Y.shape == (100, 0)


def test_block_frequencies(example_sbm):
    n = 5000
    latent = sample_nodes(grd_sampler_from_sbm(example_sbm), SamplingConfig(n, seed=2))
    freq = np.bincount(latent.labels, minlength=3) / n
    assert np.all(np.abs(freq - PI) <= 3 * np.sqrt(PI * (1 - PI) / n))


def test_deterministic(example_sbm):
    S = grd_sampler_from_sbm(example_sbm)
    _, A1 = sample_grd_graph(S, SamplingConfig(200, seed=9))
    _, A2 = sample_grd_graph(S, SamplingConfig(200, seed=9))
    _, A3 = sample_grd_graph(S, SamplingConfig(200, seed=10))
    assert A1 == A2
    assert A1 != A3


def test_chunking_does_not_change_graph(example_sbm, monkeypatch):
    S = grd_sampler_from_sbm(example_sbm)
    cfg = SamplingConfig(150, seed=4)
    _, A = sample_grd_graph(S, cfg)
    monkeypatch.setattr(sampling, "_MAX_CHUNK_PAIRS", 97)
    _, B = sample_grd_graph(S, cfg)
    assert A == B


def test_prefix_nodes_stable(example_sbm):
    # node i's latent draw does not depend on n
    S = grd_sampler_from_sbm(example_sbm)
    a = sample_nodes(S, SamplingConfig(50, seed=3))
    b = sample_nodes(S, SamplingConfig(80, seed=3))
    assert np.array_equal(a.X, b.X[:50])


@pytest.mark.parametrize("rho", [1.0, 0.3])
def test_erdos_renyi_density(rho):
    n = 400
    _, A = sample_grd_graph(point_mass(0.6), SamplingConfig(n, rho=rho, seed=11))
    p = 0.36 * rho
    m = n * (n - 1) / 2
    assert abs(A.edge_count / m - p) <= 4 * np.sqrt(p * (1 - p) / m)


def test_rho_must_be_positive():
    with pytest.raises(ValueError):
        SamplingConfig(10, rho=0.0)
    with pytest.raises(ValueError):
        SamplingConfig(0)


def test_zero_graph():
    _, A = sample_grd_graph(point_mass(0.0), SamplingConfig(30, seed=1))
    assert A.edge_count == 0
    assert A.to_dense().shape == (30, 30)


def test_single_node():
    _, A = sample_grd_graph(point_mass(0.5), SamplingConfig(1))
    assert A.edge_count == 0 and A.n == 1


def test_graphon_route_edges_follow_blocks():
    W = StepGraphon(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])
    latent, A = sample_from_graphon(W, SamplingConfig(60, seed=2))
    D = A.to_dense()
    same = latent.labels[:, None] == latent.labels[None, :]
    assert np.array_equal(D.astype(bool), same & ~np.eye(60, dtype=bool))


def test_exchangeable_edge_marginals(example_sbm):
    # each pair position has the same marginal edge frequency
    S = grd_sampler_from_sbm(example_sbm)
    counts = np.zeros((6, 6))
    reps = 400
    for seed in range(reps):
        counts += sample_grd_graph(S, SamplingConfig(6, seed=seed))[1].to_dense()
    p_bar = float(PI @ example_sbm.B @ PI)
    iu = np.triu_indices(6, 1)
    freq = counts[iu] / reps
    assert np.all(np.abs(freq - p_bar) <= 4.5 * np.sqrt(p_bar * (1 - p_bar) / reps))


class TestAdjacency:
    def test_round_trip_dense(self, rng):
        D = np.triu(rng.random((9, 9)) < 0.4, 1)
        D = (D | D.T).astype(np.uint8)
        A = AdjacencyMatrix.from_dense(D)
        assert np.array_equal(A.to_dense(), D)
        assert A.edge_count == D.sum() // 2
        assert np.array_equal(A.degrees(), D.sum(axis=1))

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            AdjacencyMatrix.from_dense(np.array([[0, 1], [0, 0]]))
        with pytest.raises(ValueError):
            AdjacencyMatrix.from_dense(np.eye(2))

    def test_edges_and_triangles(self):
        A = AdjacencyMatrix.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
        assert A.triangle_count() == 1
        assert A.edges().tolist() == [[0, 1], [0, 2], [1, 2], [2, 3]]

    def test_permuted(self, rng):
        A = AdjacencyMatrix.from_edges(5, [(0, 1), (1, 4), (2, 3)])
        perm = rng.permutation(5)
        D = A.to_dense()
        assert np.array_equal(A.permuted(perm).to_dense(), D[np.ix_(perm, perm)])
