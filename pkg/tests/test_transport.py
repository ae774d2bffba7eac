import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cflexplain.errors import DomainError
from cflexplain.lp import solve_transportation
from cflexplain.transport import wasserstein2, wasserstein_all, wasserstein_sum

from oracles import transport_value_tableau

# values of the explicit transport LP, computed by the tableau oracle
FROZEN_SEED = 20240601
FROZEN_VALUES = [1.5292644377539626, 3.0317916863809704, 1.7173826150945692]


def test_frozen_oracle_values():
    rng = np.random.default_rng(FROZEN_SEED)
    for expected in FROZEN_VALUES:
        a = rng.dirichlet(np.ones(6))
        b = rng.dirichlet(np.ones(6))
        C = rng.integers(0, 10, (6, 6)).astype(float)
        assert solve_transportation(a, b, C).value == pytest.approx(expected, abs=1e-12)


def test_identity_is_free():
    C = np.array([[0.0, 4.0, 9.0], [4.0, 0.0, 1.0], [9.0, 1.0, 0.0]])
    p = np.array([0.2, 0.5, 0.3])
    res = wasserstein2(p, p, C)
    assert res.value == 0.0
    assert np.allclose(res.plan.pi, np.diag(p), atol=1e-15)


def test_point_masses():
    C = np.array([[0.0, 4.0, 9.0], [4.0, 0.0, 1.0], [9.0, 1.0, 0.0]])
    assert wasserstein2([1, 0, 0], [0, 0, 1], C).value == 9.0


def test_two_point_hand_value():
    C = np.array([[0.0, 4.0], [4.0, 0.0]])
    assert wasserstein2([0.5, 0.5], [0.25, 0.75], C).value == pytest.approx(1.0, abs=1e-15)


def test_rejects_bad_inputs():
    C = np.zeros((2, 2))
    with pytest.raises(DomainError):
        wasserstein2([0.5, 0.5], [0.2, 0.3, 0.5], C)
    with pytest.raises(DomainError):
        wasserstein2([0.5, 0.6], [0.5, 0.5], C)
    with pytest.raises(DomainError):
        wasserstein2([1.5, -0.5], [0.5, 0.5], C)
    with pytest.raises(DomainError):
        solve_transportation([0.5, 0.5], [0.7, 0.7], C)


def test_sum_examples():
    assert wasserstein_sum([10.0, 20.0, 30.0, 40.0]) == 100.0
    assert wasserstein_sum([1.0, 2.0], weights=[2.0, 0.5]) == 3.0


def _random_pair(rng, k):
    C = rng.random((k, 2)) * 10
    cost = ((C[:, None] - C[None]) ** 2).sum(axis=2)
    p0 = rng.dirichlet(np.ones(k)) * (rng.random(k) < 0.7)
    p = rng.dirichlet(np.ones(k)) * (rng.random(k) < 0.7)
    p0[0] += 1e-3
    p[-1] += 1e-3
    return p0 / p0.sum(), p / p.sum(), cost


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 8))
def test_matches_lp_oracle_and_duals(seed, k):
    rng = np.random.default_rng(seed)
    p0, p, cost = _random_pair(rng, k)
    res = wasserstein2(p0, p, cost, pin=k - 1)
    assert res.value == pytest.approx(transport_value_tableau(p0, p, cost), abs=1e-9)
    assert np.allclose(res.plan.row_sums(), p0, atol=1e-12)
    assert np.allclose(res.plan.col_sums(), p, atol=1e-12)
    assert res.plan.cost(cost) == pytest.approx(res.value, abs=1e-12)
    assert res.potentials[k - 1] == 0.0
    sol = solve_transportation(p0, p, cost)
    assert np.all(sol.u[:, None] + sol.v[None, :] <= cost + 1e-9)
    assert sol.u @ p0 + sol.v @ p == pytest.approx(sol.value, abs=1e-9)


@given(seed=st.integers(0, 2**32 - 1))
def test_potentials_give_a_supergradient(seed):
    """``W(p0, .)`` is convex; the column potentials support it from below."""
    rng = np.random.default_rng(seed)
    p0, p, cost = _random_pair(rng, 5)
    p = 0.9 * p + 0.1 / 5  # full support for the reference point
    res = wasserstein2(p0, p, cost)
    for _ in range(5):
        q = rng.dirichlet(np.ones(5))
        assert wasserstein2(p0, q, cost).value >= res.value + res.potentials @ (q - p) - 1e-9


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    P0 = rng.dirichlet(np.ones(6), size=12)
    P = rng.dirichlet(np.ones(6), size=12)
    P0[:, 2] = 0
    P0 /= P0.sum(axis=1, keepdims=True)
    cost = rng.random((6, 6)) * 5
    np.fill_diagonal(cost, 0)
    values, plans, pots = wasserstein_all(P0, P, cost, pin=4)
    for n in range(12):
        one = wasserstein2(P0[n], P[n], cost, pin=4)
        assert values[n] == pytest.approx(one.value, abs=1e-12)
        assert np.allclose(plans[n], one.plan.pi, atol=1e-14)
        assert np.allclose(pots[n], one.potentials, atol=1e-12)
