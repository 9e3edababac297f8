import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochdda.problems import (
    AgentDataset,
    CSVFormatError,
    ProblemInstance,
    estimate_constants,
    generate_lasso_instance,
    generate_logistic_data,
    generate_quadratic_instance,
    lasso_value_grad,
    load_csv_partitioned,
    logistic_value_grad,
    make_logistic_instance,
    power_iteration,
)
from stochdda.proximal import Regularizer


def central_diff(fun, x):
    h = 1e-6 * (1 + np.linalg.norm(x))
    return np.array([(fun(x + h * e) - fun(x - h * e)) / (2 * h) for e in np.eye(x.size)])


def test_logistic_at_zero(rng):
    M = rng.normal(size=(8, 4))
    y = rng.choice([-1.0, 1.0], size=8)
    val, g = logistic_value_grad(np.zeros(4), M, y, 0.3)
    assert val == pytest.approx(math.log(2))
    np.testing.assert_allclose(g, -(y @ M) / 16, atol=1e-15)


@given(st.integers(0, 2**31), st.floats(0, 1))
def test_logistic_gradient_finite_difference(seed, mu):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(10, 5))
    y = rng.choice([-1.0, 1.0], size=10)
    x = rng.normal(size=5)
    _, g = logistic_value_grad(x, M, y, mu)
    fd = central_diff(lambda z: logistic_value_grad(z, M, y, mu)[0], x)
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_logistic_is_stable_for_huge_margins():
    M = np.array([[1.0]])
    for s in (1e4, -1e4):
        val, g = logistic_value_grad(np.array([s]), M, np.array([1.0]))
        assert np.isfinite(val) and np.all(np.isfinite(g))
    assert logistic_value_grad(np.array([-1e4]), M, np.array([1.0]))[0] == pytest.approx(1e4)


def test_logistic_dimension_mismatch():
    with pytest.raises(ValueError):
        logistic_value_grad(np.zeros(3), np.ones((2, 4)), np.ones(2))


def test_lasso_value_grad_examples(rng):
    C = rng.normal(size=(6, 3))
    x = rng.normal(size=3)
    val, g = lasso_value_grad(x, C, C @ x)
    assert val == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)
    b = rng.normal(size=6)
    val, g = lasso_value_grad(np.zeros(3), C, b)
    assert val == pytest.approx(0.5 * b @ b)
    np.testing.assert_allclose(g, -C.T @ b)
    fd = central_diff(lambda z: lasso_value_grad(z, C, b)[0], x)
    np.testing.assert_allclose(lasso_value_grad(x, C, b)[1], fd, rtol=1e-5, atol=1e-7)
    with pytest.raises(ValueError):
        lasso_value_grad(np.zeros(4), C, b)


@pytest.fixture(scope="module")
def logistic_instance():
    return make_logistic_instance(generate_logistic_data(3, n=4, samples_per_agent=30, m=6), mu=0.05, phi=0.01)


@pytest.fixture(scope="module")
def lasso_instance():
    return generate_lasso_instance(5, n=4, rows_per_agent=20, m=12)


def test_vectorized_grads_agree_with_local_oracles(logistic_instance, lasso_instance, rng):
    for inst in (logistic_instance, lasso_instance[0]):
        X = rng.normal(size=(inst.n, inst.m))
        G = inst.grads(X)
        vals = inst.local_values(X)
        for i in range(inst.n):
            v, g = inst.local_value_grad(i, X[i])
            np.testing.assert_allclose(G[i], g, rtol=1e-12, atol=1e-14)
            assert vals[i] == pytest.approx(v, rel=1e-12)


def test_average_objective_and_gradient(logistic_instance, rng):
    inst = logistic_instance
    x = rng.normal(size=inst.m)
    vals = [inst.local_value_grad(i, x) for i in range(inst.n)]
    assert inst.f(x) == pytest.approx(np.mean([v for v, _ in vals]), rel=1e-12)
    np.testing.assert_allclose(inst.grad_f(x), np.mean([g for _, g in vals], axis=0), rtol=1e-12)
    batch = rng.normal(size=(3, inst.m))
    np.testing.assert_allclose(inst.f(batch), [inst.f(b) for b in batch], rtol=1e-13)
    assert inst.F(x) == pytest.approx(inst.f(x) + 0.01 * np.abs(x).sum())


def test_lipschitz_and_strong_convexity(logistic_instance, lasso_instance, rng):
    for inst in (logistic_instance, lasso_instance[0]):
        for _ in range(1000 // 10):
            X, Y = rng.uniform(-3, 3, size=(2, inst.n, inst.m))
            gx, gy = inst.grads(X), inst.grads(Y)
            dist = np.linalg.norm(X - Y, axis=1)
            assert np.all(np.linalg.norm(gx - gy, axis=1) <= inst.L * (1 + 1e-8) * dist)
            # midpoint convexity of f_i - mu/2 ||x||^2
            q = lambda Z: inst.local_values(Z) - 0.5 * inst.mu * np.sum(Z * Z, axis=1)
            assert np.all(q(0.5 * (X + Y)) <= 0.5 * (q(X) + q(Y)) + 1e-10)


def test_power_iteration_matches_dense(rng):
    A = rng.normal(size=(30, 10))
    G = A.T @ A
    assert power_iteration(G) == pytest.approx(np.linalg.eigvalsh(G)[-1], rel=1e-8)


def test_estimate_constants_identity_blocks():
    C = np.broadcast_to(np.eye(3), (2, 3, 3)).copy()
    inst = ProblemInstance("least_squares", C, np.zeros((2, 3)), L=1.0, mu=0.0)
    assert estimate_constants(inst) == pytest.approx((1.0, 1.0))


def test_estimate_constants_logistic_matches_dense(rng):
    M = rng.normal(size=(3, 40, 5))
    ds = AgentDataset(M, np.sign(rng.normal(size=(3, 40))))
    inst = make_logistic_instance(ds, mu=0.1, phi=0.0)
    want = max(np.linalg.eigvalsh(Mi.T @ Mi)[-1] / (4 * 40) for Mi in M) + 0.1
    assert inst.L == pytest.approx(want, rel=1e-8)
    assert inst.mu == 0.1


def test_estimate_constants_rank_deficient_gives_zero_mu(rng):
    C = rng.normal(size=(2, 3, 6))  # 3 rows, 6 columns
    inst = ProblemInstance("least_squares", C, np.zeros((2, 3)), L=1.0, mu=0.0)
    assert estimate_constants(inst)[1] == 0.0


def test_lasso_generator_constants_and_determinism(lasso_instance):
    inst, x_sharp = lasso_instance
    L, mu = estimate_constants(inst)
    assert 1 - 1e-6 <= L <= 1 + 1e-6
    assert mu == pytest.approx(0.5, abs=1e-9)
    assert inst.h.kind == "l1_ball" and inst.h.radius == pytest.approx(1.1 * np.abs(x_sharp).sum())
    again, xs2 = generate_lasso_instance(5, n=4, rows_per_agent=20, m=12)
    np.testing.assert_array_equal(again.features, inst.features)
    np.testing.assert_array_equal(again.targets, inst.targets)
    np.testing.assert_array_equal(xs2, x_sharp)


def test_lasso_generator_zero_signal_rejected():
    with pytest.raises(ValueError):
        generate_lasso_instance(0, nonzero_prob=0.0)


def test_quadratic_generator_spectrum():
    inst = generate_quadratic_instance(0, n=3, m=8, L=2.0, mu=0.25)
    for Ci in inst.features:
        ev = np.linalg.eigvalsh(Ci.T @ Ci)
        assert ev[0] == pytest.approx(0.25) and ev[-1] == pytest.approx(2.0)


def test_logistic_labels_validated():
    ds = AgentDataset(np.ones((2, 3, 2)), np.array([[1.0, 0.0, 1.0], [1.0, -1.0, 1.0]]))
    with pytest.raises(ValueError):
        make_logistic_instance(ds)


# -- CSV ingestion ------------------------------------------------------------------


def write_csv(path, rows, header=None):
    lines = ([header] if header else []) + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def test_csv_partition_round_robin(tmp_path, rng):
    X = rng.normal(size=(3000, 4))
    y = rng.integers(0, 2, size=3000)
    write_csv(tmp_path / "d.csv", np.column_stack([X, y]), header="a,b,c,d,label")
    ds = load_csv_partitioned(tmp_path / "d.csv", 30, 3000)
    assert ds.features.shape == (30, 100, 4)
    assert set(np.unique(ds.targets)) == {-1.0, 1.0}
    Xs = (X - X.mean(0)) / X.std(0)
    np.testing.assert_allclose(ds.features[7, 2], Xs[2 * 30 + 7], atol=1e-12)
    assert ds.targets[7, 2] == 2 * y[67] - 1


def test_csv_standardized_columns(tmp_path, rng):
    data = np.column_stack([rng.normal(5, 3, size=(60, 3)), rng.choice([-1, 1], 60)])
    write_csv(tmp_path / "d.csv", data)
    ds = load_csv_partitioned(tmp_path / "d.csv", 3, 60)
    flat = ds.features.reshape(-1, 3)
    np.testing.assert_allclose(flat.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(flat.std(0), 1, atol=1e-12)


def test_csv_not_divisible(tmp_path):
    write_csv(tmp_path / "d.csv", [[0, 1]] * 7)
    with pytest.raises(CSVFormatError, match="not divisible"):
        load_csv_partitioned(tmp_path / "d.csv", 3, 7)


def test_csv_malformed_row_reports_line(tmp_path):
    (tmp_path / "d.csv").write_text("1,2,1\n3,x,0\n")
    with pytest.raises(CSVFormatError, match=":2:"):
        load_csv_partitioned(tmp_path / "d.csv", 1, 2)
    (tmp_path / "e.csv").write_text("1,2,1\n3,0\n")
    with pytest.raises(CSVFormatError, match=":2:"):
        load_csv_partitioned(tmp_path / "e.csv", 1, 2)


def test_csv_bad_labels(tmp_path):
    write_csv(tmp_path / "d.csv", [[0.1, 2], [0.2, 1]])
    with pytest.raises(CSVFormatError, match="labels"):
        load_csv_partitioned(tmp_path / "d.csv", 1, 2)


def test_csv_shuffle_is_seeded(tmp_path, rng):
    write_csv(tmp_path / "d.csv", np.column_stack([rng.normal(size=(20, 2)), rng.integers(0, 2, 20)]))
    a = load_csv_partitioned(tmp_path / "d.csv", 2, 10, shuffle_seed=4)
    b = load_csv_partitioned(tmp_path / "d.csv", 2, 10, shuffle_seed=4)
    c = load_csv_partitioned(tmp_path / "d.csv", 2, 10)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)


def test_instance_rejects_bad_constants():
    with pytest.raises(ValueError):
        ProblemInstance("least_squares", np.ones((1, 2, 2)), np.ones((1, 2)), L=0.1, mu=0.5)
    with pytest.raises(ValueError):
        ProblemInstance("poisson", np.ones((1, 2, 2)), np.ones((1, 2)), L=1, mu=0)


def test_instance_describe_is_plain(logistic_instance):
    d = logistic_instance.describe()
    assert d["family"] == "logistic" and d["h"] == Regularizer.l1(0.01).to_dict()
