import math

import numpy as np
import pytest

from agc.errors import DegenerateDenominator, EmptyGraph, InfiniteDivergence, NumericalFailure
from agc.graph import build_graph
from agc.losses import dec_kl_loss, dmon_grad, dmon_loss, mincut_grad, mincut_loss
from agc.metrics import modularity
from agc.mlp import init_mlp
from agc.train import backward, predict

from conftest import BARBELL_SPLIT, dense_adjacency, random_graph
import gradcheck

ONE_HOT = np.eye(2)[BARBELL_SPLIT]


# --- dmon ------------------------------------------------------------------


def test_dmon_uniform_is_zero(barbell):
    loss, collapse = dmon_loss(np.full((6, 3), 1 / 3), barbell)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert collapse == pytest.approx(0.0, abs=1e-12)


def test_dmon_barbell_planted(barbell):
    loss, collapse = dmon_loss(ONE_HOT, barbell)
    assert loss == pytest.approx(-5 / 14, abs=1e-12)
    assert collapse == pytest.approx(0.0, abs=1e-12)


def test_dmon_single_cluster(barbell):
    loss, collapse = dmon_loss(np.ones((6, 1)), barbell)
    assert loss - collapse == pytest.approx(0.0, abs=1e-12)


def test_dmon_empty_graph():
    with pytest.raises(EmptyGraph):
        dmon_loss(np.full((3, 2), 0.5), build_graph([], 3))


def dense_dmon(c, graph):
    a = dense_adjacency(graph)
    d = a.sum(axis=1)
    two_m = d.sum()
    b = a - np.outer(d, d) / two_m
    n, k = c.shape
    return -np.trace(c.T @ b @ c) / two_m + math.sqrt(k) / n * np.linalg.norm(c.sum(axis=0)) - 1


def test_dmon_matches_dense_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 31))
        g = random_graph(rng, n, rng.uniform(0.05, 0.5))
        c = rng.dirichlet(np.ones(int(rng.integers(1, 6))), size=n)
        assert dmon_loss(c, g)[0] == pytest.approx(dense_dmon(c, g), abs=1e-6)


def test_dmon_term_is_negative_modularity():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(3, 25))
        g = random_graph(rng, n, 0.3)
        k = int(rng.integers(1, 5))
        labels = rng.integers(0, k, size=n)
        loss, collapse = dmon_loss(np.eye(k)[labels], g)
        assert loss - collapse == pytest.approx(-modularity(g, labels), abs=1e-6)


# --- mincut ----------------------------------------------------------------


def test_mincut_barbell_planted(barbell):
    cut, ortho = mincut_loss(ONE_HOT, barbell)
    assert cut == pytest.approx(-6 / 7, abs=1e-12)
    assert ortho == pytest.approx(0.0, abs=1e-12)


def test_mincut_uniform_rows(barbell):
    cut, ortho = mincut_loss(np.full((6, 2), 0.5), barbell)
    assert cut == pytest.approx(-1.0, abs=1e-12)
    assert ortho == pytest.approx(math.sqrt(2 - math.sqrt(2)), abs=1e-12)


def test_mincut_single_cluster_degenerate(barbell):
    # a single cluster forces every simplex row to (1,)
    assert mincut_loss(np.ones((6, 1)), barbell)[0] == pytest.approx(-1.0, abs=1e-12)
    g = random_graph(np.random.default_rng(0), 12, 0.3)
    assert mincut_loss(np.ones((12, 1)), g)[0] == pytest.approx(-1.0, abs=1e-12)


def test_mincut_zero_volume():
    g = build_graph([(0, 1)], 3)
    c = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DegenerateDenominator):
        mincut_loss(c, g)


# --- dec -------------------------------------------------------------------


def test_kl_values():
    q = np.random.default_rng(0).dirichlet(np.ones(3), size=5)
    assert dec_kl_loss(q, q) == 0.0
    assert dec_kl_loss([[0.5, 0.5]], [[1.0, 0.0]]) == pytest.approx(math.log(2))
    with pytest.raises(InfiniteDivergence):
        dec_kl_loss([[1.0, 0.0]], [[0.5, 0.5]])


def test_kl_nonnegative():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        q = rng.dirichlet(np.ones(k), size=4)
        p = rng.dirichlet(np.full(k, 0.3), size=4)
        assert dec_kl_loss(q, p) >= 0.0


# --- cross-cutting ---------------------------------------------------------


def test_losses_permutation_invariant():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(4, 20))
        g = random_graph(rng, n, 0.3)
        c = rng.dirichlet(np.ones(3), size=n)
        perm = rng.permutation(n)
        inv = np.argsort(perm)
        g2 = build_graph(inv[g.edges()], n)
        c2 = c[perm]
        assert dmon_loss(c2, g2)[0] == pytest.approx(dmon_loss(c, g)[0], abs=1e-9)
        assert sum(mincut_loss(c2, g2)) == pytest.approx(sum(mincut_loss(c, g)), abs=1e-9)
        p = c ** 2 / (c**2).sum(axis=1, keepdims=True)
        assert dec_kl_loss(c2, p[perm]) == pytest.approx(dec_kl_loss(c, p), abs=1e-9)


@pytest.mark.parametrize("kind", ["dmon", "mincut"])
def test_assignment_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(5)
    loss = {"dmon": lambda c, g: dmon_loss(c, g)[0], "mincut": lambda c, g: sum(mincut_loss(c, g))}[kind]
    grad = {"dmon": dmon_grad, "mincut": mincut_grad}[kind]
    for _ in range(5):
        g = random_graph(rng, 10, 0.4)
        c = rng.dirichlet(np.ones(3), size=10)
        num = np.zeros_like(c)
        for idx in np.ndindex(c.shape):
            up, down = c.copy(), c.copy()
            up[idx] += 1e-6
            down[idx] -= 1e-6
            num[idx] = (loss(up, g) - loss(down, g)) / 2e-6
        assert gradcheck.relative_error({"c": grad(c, g)}, {"c": num}) < 1e-6


@pytest.mark.parametrize("kind", ["dmon", "mincut", "dec"])
def test_parameter_gradients_match_finite_differences(kind):
    rng = np.random.default_rng({"dmon": 1, "mincut": 2, "dec": 3}[kind])
    for _ in range(3):
        inst = gradcheck.random_instance(rng, kind)
        assert gradcheck.check(kind, *inst) < 1e-4


def test_dec_stationary_when_target_equals_q():
    rng = np.random.default_rng(0)
    graph = random_graph(rng, 8, 0.4)
    x = rng.normal(size=(8, 4))
    params = init_mlp(4, 6, 3, rng)
    params["mu"] = rng.normal(size=(2, 3))
    q = predict("dec", x, params)
    loss, _, grads = backward("dec", graph, x, params, target=q)
    assert loss == pytest.approx(0.0, abs=1e-15)
    for g in grads.values():
        assert np.allclose(g, 0.0, atol=1e-15)


def test_saturated_softmax_gradient_is_finite(barbell):
    params = init_mlp(2, 4, 2, np.random.default_rng(0))
    params["b2"] = np.array([800.0, -800.0])
    x = np.random.default_rng(1).normal(size=(6, 2))
    loss, _, grads = backward("dmon", barbell, x, params)
    assert np.isfinite(loss)
    assert all(np.all(np.isfinite(g)) for g in grads.values())


def test_non_finite_gradient_named(barbell):
    params = init_mlp(2, 4, 2, np.random.default_rng(0))
    params["w2"][0, 0] = np.nan
    with pytest.raises(NumericalFailure) as info:
        backward("dmon", barbell, np.ones((6, 2)), params)
    assert info.value.param in params
