import numpy as np
import pytest

import oracles
from modnoise.core import NeighborhoodSpec
from modnoise.solver import LinearProgram, Status, build_zero_delta_lp, simplex_solve


def lp(c, A, senses, b, lo, hi):
    return LinearProgram(np.asarray(c, float), A, tuple(senses), b, lo, hi)


def test_max_x_with_upper_row():
    res = simplex_solve(lp([-1.0], [[1.0]], ['<='], [1.0], 0.0, 2.0))
    assert res.optimal
    assert res.x[0] == pytest.approx(1.0)
    assert res.objective == pytest.approx(-1.0)


def test_infeasible_pair():
    res = simplex_solve(lp([0.0], [[1.0], [-1.0]], ['<=', '<='], [0.0, -1.0], 0, 5))
    assert res.status is Status.INFEASIBLE


def test_crossed_bounds_are_infeasible():
    assert simplex_solve(lp([1.0], np.zeros((0, 1)), [], [], 1.0, 0.0)).status is (
        Status.INFEASIBLE
    )


def test_no_rows_picks_cheapest_bound():
    res = simplex_solve(lp([1.0, -2.0], np.zeros((0, 2)), [], [], [-1, 0], [3, 4]))
    assert res.x.tolist() == [-1.0, 4.0]


def test_equality_rows_and_negative_rhs():
    # x + y = 3, x - y <= -1, min x  ->  x = 0 (y = 3)
    res = simplex_solve(
        lp([1.0, 0.0], [[1, 1], [1, -1]], ['=', '<='], [3, -1], [0, 0], [5, 5])
    )
    assert res.optimal and res.x == pytest.approx([0.0, 3.0])


def test_empty_row_consistency():
    ok = lp([1.0], [[0.0]], ['<='], [0.0], 0, 1)
    bad = lp([1.0], [[0.0]], ['='], [1.0], 0, 1)
    assert simplex_solve(ok).optimal
    assert simplex_solve(bad).status is Status.INFEASIBLE


def test_iteration_limit_reported():
    rng = np.random.default_rng(0)
    A = rng.uniform(-1, 1, (8, 10))
    res = simplex_solve(lp(-np.ones(10), A, ['<='] * 8, np.ones(8), 0, 1), 1)
    assert res.status is Status.ITERATION_LIMIT


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        lp([1.0], [[1.0]], ['>='], [1.0], 0, 1)
    with pytest.raises(ValueError):
        lp([1.0], [[1.0]], ['<='], [1.0], 0, np.inf)


def test_zero_delta_sd_lp_matches_geometric_objective():
    prog = build_zero_delta_lp(7, NeighborhoodSpec.single_distance(3), 0.75)
    res = simplex_solve(prog)
    assert res.optimal
    assert res.objective == pytest.approx(1 - 0.528944, abs=1e-6)
    assert res.x == pytest.approx(oracles.sd_zero_delta(7, 3, 0.75), abs=1e-9)


def _random_lp(rng):
    n = int(rng.integers(2, 9))
    m = int(rng.integers(1, 8))
    A = rng.integers(-4, 5, (m, n)).astype(float)
    A[rng.random((m, n)) < 0.3] = 0.0
    lo = rng.integers(-3, 1, n).astype(float)
    hi = lo + rng.integers(0, 5, n)
    x0 = rng.uniform(lo, hi)
    senses = ['=' if rng.random() < 0.25 else '<=' for _ in range(m)]
    b = A @ x0
    slack = np.where(np.array(senses) == '<=', rng.uniform(0, 2, m), 0.0)
    if rng.random() < 0.2:
        # Perturb so that a share of instances are infeasible.
        b = b - rng.uniform(0, 6, m)
    else:
        b = b + slack
    c = rng.integers(-5, 6, n).astype(float)
    return lp(c, A, senses, b, lo, hi)


@pytest.mark.parametrize('seed', range(300))
def test_random_lps_agree_with_highs(seed):
    prog = _random_lp(np.random.default_rng(seed))
    status, obj, _ = oracles.highs_lp(prog)
    res = simplex_solve(prog)
    assert res.status.value == status
    if res.optimal:
        assert res.objective == pytest.approx(obj, abs=1e-7)
        assert prog.residuals(res.x) <= 1e-8


@pytest.mark.parametrize('n,mu_bar,eps', [(8, 3, 1.5), (4, 2, 1.5), (12, 5, 2.5)])
def test_zero_delta_bd_lp_matches_highs(n, mu_bar, eps):
    prog = build_zero_delta_lp(n, NeighborhoodSpec.bounded_difference(mu_bar), eps)
    _, obj, _ = oracles.highs_lp(prog)
    res = simplex_solve(prog)
    assert res.objective == pytest.approx(obj, abs=1e-9)
    assert res.x == pytest.approx(oracles.bd_zero_delta(n, mu_bar, eps), abs=1e-9)


def test_to_text_lists_rows_and_bounds():
    text = lp([1.0, 0.0], [[1, 2]], ['<='], [3], 0, 1).to_text()
    assert text.splitlines()[0] == 'min 1*x0'
    assert '1*x0 + 2*x1 <= 3' in text
    assert '0 <= x1 <= 1' in text


def test_zero_delta_lp_infeasible_when_f0_cannot_reach_half():
    prog = build_zero_delta_lp(12, NeighborhoodSpec.bounded_difference(5), 0.4)
    assert oracles.highs_lp(prog)[0] == 'infeasible'
    assert simplex_solve(prog).status is Status.INFEASIBLE
