import numpy as np
import pytest

from cflexplain import choice
from cflexplain.errors import ConfigError, EnumerationCapExceeded
from cflexplain.factual import (haase_lp, solve_factual, solve_factual_enumerate,
                                solve_factual_haase, split_haase)
from cflexplain.instance import GenerationConfig, generate, precompute
from cflexplain.lp import solve_lp

from conftest import make_instance
from oracles import mnl_probabilities

# brute force over the three open pairs of the regression instance, from raw coordinates
REGRESSION_PAIR_DEMAND = {
    (0, 1): 1.9379518831993061,
    (0, 2): 2.0457400112299613,
    (1, 2): 1.9725516244147752,
}


def test_regression_instance_frozen(regression_instance):
    inst, pre = regression_instance
    for S, q in REGRESSION_PAIR_DEMAND.items():
        assert choice.captured_demand(pre.phi0, choice.decision(S, 3), pre, inst.weights) == pytest.approx(q, abs=1e-14)
        P = mnl_probabilities(inst.customer_xy, inst.candidate_xy, inst.competitor_xy, np.ones(3), S)
        assert np.allclose(choice.probabilities(pre.phi0, choice.decision(S, 3), pre), P, atol=1e-15)
    for method in ("enumeration", "haase_bnb"):
        sol = solve_factual(inst, pre, 2, method=method)
        assert sol.open_set == (0, 2)
        assert sol.q_factual == pytest.approx(REGRESSION_PAIR_DEMAND[(0, 2)], abs=1e-12)


def test_dominant_candidate_opens():
    inst = make_instance([[1, 1], [2, 1], [1, 2]], [[1.5, 1.5], [15, 15]], [[10, 10]])
    pre = precompute(inst)
    for method in ("enumeration", "haase_bnb"):
        assert solve_factual(inst, pre, 1, method=method).open_set == (0,)


def test_all_open():
    inst = generate(GenerationConfig(6, 3, 2, seed=4))
    pre = precompute(inst)
    sol = solve_factual_enumerate(inst, pre, 3)
    att = pre.a_hat.sum(axis=1)
    assert sol.q_factual == pytest.approx(float(np.sum(att / (att + pre.b_sum))), rel=1e-14)
    assert np.allclose(sol.p0.sum(axis=1), 1, atol=1e-14)


def test_single_candidate():
    inst = generate(GenerationConfig(5, 1, 2, seed=2))
    pre = precompute(inst)
    sol = solve_factual_haase(inst, pre, 1)
    assert sol.q_factual == pytest.approx(choice.captured_demand(pre.phi0, [True], pre, inst.weights), abs=1e-14)


def test_ties_go_to_the_smallest_set():
    # two candidates at the same spot: {0} and {1} capture the same demand
    inst = make_instance([[0, 0], [5, 5]], [[2, 2], [2, 2], [9, 9]], [[4, 0]])
    pre = precompute(inst)
    assert solve_factual_enumerate(inst, pre, 1).open_set == (0,)
    assert solve_factual_haase(inst, pre, 1).open_set == (0,)


def test_integral_relaxation_reproduces_probabilities(medium_instance):
    inst, pre = medium_instance
    z = np.zeros(8)
    z[[1, 2, 5]] = 1
    sol = solve_lp(haase_lp(pre, inst.weights, 3, z, z), method="highs")
    w, w_hat, _ = split_haase(sol, inst.n_customers, 8)
    P = choice.probabilities(pre.phi0, z.astype(bool), pre)
    assert np.allclose(w, P[:, :8], atol=1e-8)
    assert np.allclose(w_hat, P[:, 8:].sum(axis=1), atol=1e-8)
    assert -sol.objective == pytest.approx(choice.captured_demand(pre.phi0, z, pre, inst.weights), abs=1e-8)


@pytest.mark.parametrize("seed,r", [(s, r) for s in range(5) for r in (2, 4)])
def test_haase_equals_enumeration(seed, r):
    inst = generate(GenerationConfig(30, 8, 5, seed=100 + seed))
    pre = precompute(inst)
    a = solve_factual_enumerate(inst, pre, r)
    b = solve_factual_haase(inst, pre, r)
    assert b.q_factual == pytest.approx(a.q_factual, abs=1e-7)
    assert b.info["root_bound"] >= a.q_factual - 1e-9
    assert b.info["gap"] == 0.0


def test_revised_simplex_inside_branch_and_bound():
    inst = generate(GenerationConfig(8, 5, 3, seed=9))
    pre = precompute(inst)
    a = solve_factual_enumerate(inst, pre, 2)
    b = solve_factual_haase(inst, pre, 2, lp_method="revised")
    assert b.open_set == a.open_set


def test_node_limit_reports_gap():
    inst = generate(GenerationConfig(40, 10, 5, seed=3))
    pre = precompute(inst)
    sol = solve_factual_haase(inst, pre, 4, node_limit=1)
    assert sol.info["node_limit_hit"] or sol.info["gap"] == 0.0
    assert sol.info["gap"] >= 0.0
    assert len(sol.open_set) == 4


def test_budget_and_cap_errors(regression_instance):
    inst, pre = regression_instance
    with pytest.raises(ConfigError):
        solve_factual_enumerate(inst, pre, 0)
    with pytest.raises(ConfigError):
        solve_factual_haase(inst, pre, 4)
    with pytest.raises(EnumerationCapExceeded):
        solve_factual_enumerate(inst, pre, 2, cap=2)
    with pytest.raises(ConfigError):
        solve_factual(inst, pre, 2, method="greedy")
