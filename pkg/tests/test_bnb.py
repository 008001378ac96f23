import numpy as np
import pytest

import oracles
from modnoise.core import NeighborhoodSpec
from modnoise.solver import (
    LinearProgram,
    MixedIntegerProgram,
    Status,
    branch_and_bound,
    brute_force_milp,
    build_min_error_milp,
    simplex_solve,
)


def knapsack():
    # max 5a + 4b + 3x, 2a + 3b + x <= 4, x in [0, 1] continuous.
    c = np.array([-5.0, -4.0, -3.0])
    A = np.array([[2.0, 3.0, 1.0]])
    prog = LinearProgram(c, A, ('<=',), np.array([4.0]), 0.0, 1.0)
    return MixedIntegerProgram(prog, (0, 1))


def test_knapsack_toy():
    res = branch_and_bound(knapsack())
    # Enumerated by hand: a=1, b=0, x=1 gives 8; a=b=1 is over capacity.
    assert res.optimal
    assert res.objective == pytest.approx(-8.0)
    assert res.x == pytest.approx([1.0, 0.0, 1.0])
    assert res.gap <= 1e-9


def test_fixed_binaries_reduce_to_simplex():
    m = knapsack()
    lo, hi = m.lp.lo.copy(), m.lp.hi.copy()
    lo[:2] = hi[:2] = [0.0, 1.0]
    fixed = MixedIntegerProgram(m.lp.with_bounds(lo, hi), m.binaries)
    res = branch_and_bound(fixed)
    ref = simplex_solve(fixed.lp)
    assert res.objective == pytest.approx(ref.objective)
    assert res.x == pytest.approx(ref.x)


def test_infeasible_milp():
    # a + b = 1.5 has no binary solution.
    prog = LinearProgram(np.zeros(2), [[1.0, 1.0]], ('=',), [1.5], 0.0, 1.0)
    res = branch_and_bound(MixedIntegerProgram(prog, (0, 1)))
    assert res.status is Status.INFEASIBLE


def test_node_limit():
    m, _ = build_min_error_milp(8, NeighborhoodSpec.bounded_difference(3), 1.5, 0.15)
    assert branch_and_bound(m, max_nodes=1).status is Status.ITERATION_LIMIT


def test_binary_validation():
    prog = LinearProgram(np.zeros(2), np.zeros((0, 2)), (), [], 0.0, 2.0)
    with pytest.raises(ValueError):
        MixedIntegerProgram(prog, (0,))
    with pytest.raises(ValueError):
        MixedIntegerProgram(prog.with_bounds(np.zeros(2), np.ones(2)), (3,))


@pytest.mark.parametrize('seed', range(40))
def test_random_milps_agree_with_highs_and_brute_force(seed):
    rng = np.random.default_rng(seed)
    nb, nc = int(rng.integers(1, 6)), int(rng.integers(0, 4))
    n = nb + nc
    m = int(rng.integers(1, 5))
    A = rng.integers(-3, 4, (m, n)).astype(float)
    b = rng.uniform(0, 4, m)
    c = rng.integers(-5, 6, n).astype(float)
    prog = LinearProgram(c, A, ('<=',) * m, b, 0.0, rng.integers(1, 3, n) * 1.0)
    lo, hi = prog.lo.copy(), prog.hi.copy()
    hi[:nb] = 1.0
    milp = MixedIntegerProgram(prog.with_bounds(lo, hi), range(nb))
    status, obj, _ = oracles.highs_milp(milp)
    res = branch_and_bound(milp)
    brute = brute_force_milp(milp)
    assert res.status.value == status == brute.status.value
    if res.optimal:
        assert res.objective == pytest.approx(obj, abs=1e-7)
        assert brute.objective == pytest.approx(obj, abs=1e-7)
        assert np.all(np.abs(res.x[:nb] - np.round(res.x[:nb])) <= 1e-6)


@pytest.mark.parametrize('n', [2, 3, 4, 5])
@pytest.mark.parametrize('mu', [1, 2])
@pytest.mark.parametrize('delta', [0.05, 0.2])
def test_noise_milp_matches_exhaustive_enumeration(n, mu, delta):
    if mu > n:
        pytest.skip('offset exceeds n')
    nbhd = NeighborhoodSpec.single_distance(mu)
    milp, _ = build_min_error_milp(n, nbhd, 1.0, delta)
    assert len(milp.binaries) == n + 1
    brute = brute_force_milp(milp)
    res = branch_and_bound(milp)
    assert brute.nodes == 2 ** (n + 1)
    assert res.status is brute.status
    if res.optimal:
        assert res.objective == pytest.approx(brute.objective, abs=1e-9)


def test_deterministic_repeat():
    milp, _ = build_min_error_milp(8, NeighborhoodSpec.bounded_difference(3), 1.5, 0.15)
    a, b = branch_and_bound(milp), branch_and_bound(milp)
    assert np.array_equal(a.x, b.x) and a.nodes == b.nodes


def test_to_text_lists_binaries():
    assert knapsack().to_text().endswith('binary x0 x1\n')
