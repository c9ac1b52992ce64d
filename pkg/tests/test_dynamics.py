import math

import numpy as np
import pytest

import oracle
from lbgnn import dynamics
from lbgnn.dynamics import DynamicsFns, paper_dynamics
from lbgnn.graph import build_graph, complete_graph
from lbgnn.sim import paper_scenario, rk4_step

FNS = paper_dynamics()
X0 = np.array([6.0, -4.0, 2.0])
Y0 = np.array([[-6.0, -1.0, 8.0], [6.0, 4.0, -2.0], [4.0, -6.0, 1.0], [-4.0, 6.0, -2.0]])
EDGES4 = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]


def test_g_values():
    assert FNS.g(np.zeros(3), np.zeros(3)) == 0.1
    assert FNS.g(np.zeros(3), np.array([1000.0, 0, 0])) == pytest.approx(0.1 * math.exp(-1), rel=1e-15)
    assert FNS.g(np.zeros(3), np.array([1000.0, 0, 0])) == pytest.approx(0.0367879, abs=1e-7)


def test_h_at_origin():
    np.testing.assert_allclose(FNS.h(np.zeros(3)), [-0.057, 0.0, -0.008])


def test_bounds_cover_instance(rng):
    for _ in range(1000):
        x = rng.uniform(-100, 100, 3)
        assert np.linalg.norm(FNS.h(x)) <= FNS.h_bar
        assert FNS.g(x, rng.uniform(-100, 100, 3)) <= FNS.g_bar
    FNS.check_bounds(X0, Y0)


def test_check_bounds_flags_violation():
    bad = DynamicsFns(g=lambda x, y: 1.0, h=lambda x: np.zeros(3), f=lambda y, n: np.zeros(3),
                      g_bar=0.5, h_bar=1.0)
    with pytest.raises(AssertionError):
        bad.check_bounds(X0, Y0)


@pytest.mark.parametrize("d", [0.5, 2.0, 7.0])
def test_repulsion_magnitude(d):
    f = FNS.f(np.array([0.0, d, 0.0]), np.array([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(f, [0.0, 50.0 / d**2, 0.0], rtol=1e-14)


def test_repulsion_antisymmetric_and_momentum_free(rng):
    g = complete_graph(4)
    ys = rng.normal(size=(4, 3)) * 5
    f = np.stack([dynamics.interaction(FNS, g, i, ys) for i in range(1, 5)])
    np.testing.assert_allclose(f.sum(axis=0), 0.0, atol=1e-12)
    f12 = FNS.f(ys[0], ys[1:2])
    f21 = FNS.f(ys[1], ys[0:1])
    np.testing.assert_allclose(f12, -f21, rtol=1e-15)


def test_jitted_interaction_matches_python(rng):
    g = build_graph(4, [(1, 2), (2, 3), (3, 4)])
    ys = rng.normal(size=(4, 3)) * 3
    f_all = FNS.jit[2](ys, g.adjacency)
    ref = np.stack([dynamics.interaction(FNS, g, i, ys) for i in range(1, 5)])
    np.testing.assert_allclose(f_all, ref, rtol=1e-14)


def test_coincident_nodes_are_guarded():
    f = FNS.f(np.ones(3), np.ones((1, 3)))
    assert np.all(np.isfinite(f))


def test_node_inputs_layout():
    g = build_graph(4, [(1, 2), (2, 3), (3, 4)])
    R = dynamics.node_inputs(X0, Y0, g)
    assert R.shape == (4, 15)
    np.testing.assert_array_equal(R[0], np.concatenate([X0, Y0[0], Y0[1], np.zeros(6)]))
    for i in range(1, 5):
        np.testing.assert_array_equal(R[i - 1], dynamics.node_input(X0, Y0, g, i))


def test_single_influencer_closed_form():
    c = 0.3
    fns = DynamicsFns(g=lambda x, y: c, h=lambda x: np.zeros(3), f=lambda y, n: np.zeros(3),
                      g_bar=c, h_bar=1e-9)
    y1 = np.array([[1.0, -2.0, 0.5]])
    x = np.array([2.0, 0.0, 0.0])
    dt, T = 0.01, 2.0
    for k in range(int(T / dt)):
        x = rk4_step(lambda t, s: dynamics.target_derivative(fns, s, y1), k * dt, x, dt)
    exact = y1[0] + (np.array([2.0, 0.0, 0.0]) - y1[0]) * math.exp(c * T)
    np.testing.assert_allclose(x, exact, rtol=1e-9)


def test_true_F_special_cases():
    zero = dynamics.zero_dynamics()
    g = complete_graph(4)
    e, eta = np.ones(3), np.ones((4, 3))
    np.testing.assert_array_equal(dynamics.true_F(zero, 3.5, g, 1, X0, Y0, e, eta), 0.0)
    # k1 = 1 removes the tracking-error coupling
    const = DynamicsFns(g=lambda x, y: 0.2, h=lambda x: np.zeros(3), f=lambda y, n: np.zeros(3),
                        g_bar=0.2, h_bar=1e-9)
    F = dynamics.true_F(const, 1.0, g, 2, X0, Y0, 5 * e, eta)
    np.testing.assert_allclose(F, 0.2 * eta.sum(axis=0))


def test_true_F_matches_oracle_on_random_states(rng):
    cfg = paper_scenario()
    for _ in range(20):
        x0 = rng.uniform(-20, 20, 3)
        ys = rng.uniform(-20, 20, (4, 3))
        e = rng.normal(size=3)
        eta = rng.normal(size=(4, 3))
        k1 = rng.uniform(0.5, 5)
        H = dynamics.true_H(FNS, k1, cfg.graph, x0, ys, e, eta)
        for i in range(1, 5):
            ref = oracle.true_F(k1, 4, EDGES4, i, x0.tolist(), ys.tolist(), e.tolist(), eta.tolist())
            np.testing.assert_allclose(H[i - 1], ref, rtol=1e-12, atol=1e-13)


def test_true_F_initial_fixture():
    # replication initial conditions with x_d(0) = 0 and k1 = 3.5
    e = X0.copy()
    eta = 3.5 * e - Y0
    F1 = dynamics.true_F(FNS, 3.5, complete_graph(4), 1, X0, Y0, e, eta)
    ref = oracle.true_F(3.5, 4, EDGES4, 1, X0.tolist(), Y0.tolist(), e.tolist(), eta.tolist())
    np.testing.assert_allclose(F1, ref, rtol=1e-12)


def test_unknown_dynamics_name():
    with pytest.raises(KeyError):
        dynamics.get_dynamics("nope")
