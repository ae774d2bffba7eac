import numpy as np
import pytest

from cflexplain.explain import SolverConfig, inner_solve
from cflexplain.explain.model import NodeObjective, target_demand
from cflexplain.factual import solve_factual
from cflexplain.instance import GenerationConfig, generate, precompute

from conftest import make_instance


def test_single_customer_closed_form():
    inst = make_instance([[0, 0]], [[0, 0]], [[0, 0]])
    pre = precompute(inst)
    fac = solve_factual(inst, pre, 1)
    cfg = SolverConfig(alpha=1.2, budget=1)
    obj = NodeObjective(inst, pre, fac, np.array([True]), 0.0, target_demand(inst, fac, 1.2))
    res = inner_solve(obj, cfg, np.array([2.0]))
    assert res.feasible
    assert res.phi[0] == pytest.approx(1.5, abs=1e-6)
    assert res.total == pytest.approx(0.5, abs=1e-6)


def test_factual_decision_needs_no_change(regression_instance):
    inst, pre = regression_instance
    fac = solve_factual(inst, pre, 2)
    obj = NodeObjective(inst, pre, fac, fac.z0, 1.0, target_demand(inst, fac, 1.0))
    res = inner_solve(obj, SolverConfig(alpha=1.0, budget=2, lam=1.0), obj.phi0.copy())
    assert res.total == pytest.approx(0.0, abs=1e-10)
    assert np.allclose(res.phi, 1.0, atol=1e-8)


@pytest.mark.parametrize("lam", [0.0, 0.1, 1.0])
def test_result_is_feasible_and_no_worse_than_start(lam):
    inst = generate(GenerationConfig(15, 5, 3, seed=21))
    pre = precompute(inst)
    fac = solve_factual(inst, pre, 2)
    z = np.zeros(5, dtype=bool)
    z[[i for i in range(5) if not fac.z0[i]][:2]] = True
    target = target_demand(inst, fac, 1.05)
    obj = NodeObjective(inst, pre, fac, z, lam, target)
    start = np.full(2, 3.0)
    while obj.demand(start) < target:
        start *= 2
    res = inner_solve(obj, SolverConfig(alpha=1.05, budget=2, lam=lam), start)
    assert res.feasible
    assert res.q >= target - 1e-12
    assert np.all(res.phi >= SolverConfig().phi_min)
    assert res.total <= obj.total(start) + 1e-12


def test_seeded_runs_agree(regression_instance):
    inst, pre = regression_instance
    fac = solve_factual(inst, pre, 2)
    obj = NodeObjective(inst, pre, fac, np.array([True, True, False]), 0.1, target_demand(inst, fac, 1.0))
    cfg = SolverConfig(alpha=1.0, budget=2, lam=0.1, seed=3)
    a = inner_solve(obj, cfg, np.array([1.0, 2.0]))
    b = inner_solve(obj, cfg, np.array([1.0, 2.0]))
    assert np.array_equal(a.phi, b.phi)
