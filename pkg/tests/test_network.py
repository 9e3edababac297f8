import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochdda.network import (
    Bernoulli,
    Gossip,
    Graph,
    TimeInvariant,
    beta_of_model,
    gossip_matrix,
    metropolis_matrix,
    sample_round,
    validate_doubly_stochastic,
)


def test_graph_canonicalizes_edges():
    g = Graph(3, frozenset({(1, 0), (0, 1), (2, 1)}))
    assert g.edge_list == [(0, 1), (1, 2)]
    assert g.neighbors(1) == [0, 2]
    np.testing.assert_array_equal(g.adjacency(), g.adjacency().T)


def test_graph_rejects_self_loops_and_out_of_range():
    with pytest.raises(ValueError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        Graph(3, frozenset({(0, 3)}))


def test_generators():
    assert len(Graph.cycle(6).edges) == 6
    assert len(Graph.complete(5).edges) == 10
    g = Graph.grid(2, 3)
    assert g.n == 6 and len(g.edges) == 7 and g.is_connected()
    assert not Graph(4, frozenset({(0, 1), (2, 3)})).is_connected()


def test_erdos_renyi_connected_and_sized(rng):
    g = Graph.erdos_renyi(12, 0.3, rng)
    assert g.is_connected()
    assert len(g.edges) == round(0.3 * 66)


def test_edge_list_roundtrip(tmp_path):
    g = Graph.grid(3, 3)
    g.write_edge_list(tmp_path / "g.txt")
    assert Graph.read_edge_list(tmp_path / "g.txt", 9) == g


def test_gossip_matrix_examples():
    np.testing.assert_array_equal(gossip_matrix(0, 1, 3), [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 1]])
    np.testing.assert_array_equal(gossip_matrix(0, 1, 2), [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ValueError):
        gossip_matrix(1, 1, 3)
    with pytest.raises(ValueError):
        gossip_matrix(0, 3, 3)


@given(st.integers(2, 9).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1), st.integers(0, n - 1))))
def test_gossip_matrix_is_symmetric_projector(args):
    n, i, j = args
    if i == j:
        return
    P = gossip_matrix(i, j, n)
    np.testing.assert_array_equal(P, P.T)
    np.testing.assert_array_equal(P @ P, P)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=0)


def test_metropolis_is_doubly_stochastic():
    P = metropolis_matrix(5, Graph.cycle(5).edge_list)
    assert validate_doubly_stochastic(P)
    np.testing.assert_allclose(P, P.T)
    np.testing.assert_allclose(np.diag(P), 1 / 3)


def test_validate_doubly_stochastic_reports_violations():
    rep = validate_doubly_stochastic(np.array([[0.6, 0.5], [0.4, 0.5]]))
    assert not rep and rep.max_row_violation == pytest.approx(0.1)
    with pytest.raises(ValueError):
        TimeInvariant(np.array([[0.6, 0.5], [0.4, 0.5]]))


def test_bernoulli_full_activation_is_metropolis(rng):
    g = Graph.cycle(7)
    model = Bernoulli(g, 1.0)
    for _ in range(5):
        np.testing.assert_array_equal(sample_round(model, rng), metropolis_matrix(7, g.edge_list))


def test_bernoulli_no_activation_is_identity(rng):
    np.testing.assert_array_equal(Bernoulli(Graph.cycle(4), 0.0).sample(rng), np.eye(4))


@given(st.integers(0, 2**31), st.integers(2, 9), st.sampled_from(["gossip_n", "gossip_u", "bernoulli"]))
def test_every_sample_doubly_stochastic(seed, n, kind):
    rng = np.random.default_rng(seed)
    g = Graph.cycle(n) if n > 2 else Graph(2, frozenset({(0, 1)}))
    model = {"gossip_n": Gossip(g), "gossip_u": Gossip(g, "uniform"), "bernoulli": Bernoulli(g, 0.4)}[kind]
    for _ in range(5):
        assert validate_doubly_stochastic(model.sample(rng))


def test_models_reject_empty_graphs():
    with pytest.raises(ValueError):
        Gossip(Graph(3))
    with pytest.raises(ValueError):
        Bernoulli(Graph(3), 0.5)


def test_gossip_neighbor_law_probabilities():
    g = Graph.cycle(6)
    probs = Gossip(g).edge_probabilities()
    # each endpoint has degree 2: 2 * 1/(6 * 3)
    assert all(p == pytest.approx(1 / 9) for p in probs.values())
    outs = Gossip(g).outcomes()
    assert sum(p for p, _ in outs) == pytest.approx(1.0)


def test_gossip_sampling_frequencies_match_law():
    g = Graph.grid(2, 3)
    model = Gossip(g)
    rng = np.random.default_rng(0)
    counts = {}
    N = 60000
    for _ in range(N):
        pair = model.sample_pair(rng)
        counts[pair] = counts.get(pair, 0) + 1
    for e, p in model.edge_probabilities().items():
        assert counts.get(e, 0) / N == pytest.approx(p, abs=4 * np.sqrt(p / N) + 1e-3)


def test_same_seed_same_samples():
    model = Bernoulli(Graph.complete(5), 0.3)
    a = [model.sample(np.random.default_rng(3)) for _ in range(1)]
    b = [model.sample(np.random.default_rng(3)) for _ in range(1)]
    np.testing.assert_array_equal(a, b)


# -- contraction factor --------------------------------------------------------------


def test_beta_single_edge_uniform_gossip_is_zero():
    assert beta_of_model(Gossip(Graph(2, frozenset({(0, 1)})), "uniform")) <= 1e-12


def test_beta_complete_averaging_is_zero():
    assert beta_of_model(TimeInvariant(np.full((4, 4), 0.25))) == 0.0


def test_beta_disconnected_is_one():
    g = Graph(4, frozenset({(0, 1), (2, 3)}))
    assert beta_of_model(TimeInvariant.metropolis(g)) == pytest.approx(1.0)
    assert beta_of_model(Gossip(g)) == pytest.approx(1.0)


def test_beta_time_invariant_is_second_singular_value():
    P = metropolis_matrix(6, Graph.cycle(6).edge_list)
    sv = np.sort(np.linalg.svd(P, compute_uv=False))
    assert beta_of_model(TimeInvariant(P)) == pytest.approx(sv[-2], abs=1e-12)


def test_beta_exact_matches_hand_expectation_on_triangle():
    # uniform gossip on a triangle: E[P^T P] = E[P] = I - (1/3) * (1/2) * L_graph
    g = Graph.complete(3)
    EP = sum(gossip_matrix(i, j, 3) for i, j in g.edge_list) / 3
    eig = np.linalg.eigvalsh(EP - np.full((3, 3), 1 / 3))
    assert beta_of_model(Gossip(g, "uniform")) == pytest.approx(np.sqrt(np.max(np.abs(eig))), abs=1e-12)
    assert beta_of_model(Gossip(g, "uniform")) == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_beta_monte_carlo_close_to_exact():
    model = Bernoulli(Graph.cycle(6), 0.5)
    exact = beta_of_model(model)
    mc = beta_of_model(model, "monte_carlo", 20000, np.random.default_rng(1))
    assert abs(mc - exact) < 0.02


def test_beta_monte_carlo_sample_floor():
    with pytest.raises(ValueError):
        beta_of_model(Gossip(Graph.cycle(4)), "monte_carlo", 50)


def test_bernoulli_exact_enumeration_limit():
    with pytest.raises(ValueError):
        Bernoulli(Graph.complete(7), 0.5).outcomes()
