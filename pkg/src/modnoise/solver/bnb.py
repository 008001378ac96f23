"""Best-bound branch-and-bound over binary variables."""

from __future__ import annotations

import dataclasses
import heapq
import itertools
from typing import Optional, Tuple

import numpy as np

from modnoise.solver.simplex import (
    LinearProgram,
    SolveResult,
    Status,
    simplex_solve,
)

GAP_TOL = 1e-9
INTEGRALITY_TOL = 1e-6
MAX_NODES = 10**6


@dataclasses.dataclass(frozen=True)
class MixedIntegerProgram:
    """A linear program with some variables restricted to {0, 1}."""

    lp: LinearProgram
    binaries: Tuple[int, ...]

    def __post_init__(self):
        binaries = tuple(sorted(int(i) for i in self.binaries))
        if any(i < 0 or i >= self.lp.num_vars for i in binaries):
            raise ValueError('binary index out of range')
        if len(set(binaries)) != len(binaries):
            raise ValueError('duplicate binary index')
        lo = self.lp.lo[list(binaries)]
        hi = self.lp.hi[list(binaries)]
        if np.any(lo < 0) or np.any(hi > 1):
            raise ValueError('binary variables must be bounded within [0, 1]')
        object.__setattr__(self, 'binaries', binaries)

    def to_text(self) -> str:
        names = self.lp.names or tuple(f'x{i}' for i in range(self.lp.num_vars))
        tail = 'binary ' + ' '.join(names[i] for i in self.binaries) + '\n'
        return self.lp.to_text() + tail


def _most_fractional(x: np.ndarray, binaries: np.ndarray) -> Optional[int]:
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    if frac.size == 0 or frac.max() <= INTEGRALITY_TOL:
        return None
    # Distance from 0.5; argmin returns the lowest index on ties.
    score = np.abs(x[binaries] - 0.5)
    return int(binaries[np.argmin(score)])


def _snap(
    lp: LinearProgram, lo: np.ndarray, hi: np.ndarray, x: np.ndarray, binaries
) -> Optional[SolveResult]:
    """Fixes near-integral binaries exactly and re-solves the remaining LP."""
    lo, hi = lo.copy(), hi.copy()
    vals = np.round(x[binaries])
    lo[binaries] = vals
    hi[binaries] = vals
    res = simplex_solve(lp.with_bounds(lo, hi))
    return res if res.optimal else None


def branch_and_bound(
    milp: MixedIntegerProgram,
    max_nodes: int = MAX_NODES,
    gap_tol: float = GAP_TOL,
) -> SolveResult:
    """Globally minimises ``milp`` up to an absolute gap of ``gap_tol``.

    Nodes are explored in best-bound order. Children are solved when created
    so that each queued node carries its exact relaxation bound.
    """
    lp = milp.lp
    binaries = np.asarray(milp.binaries, dtype=int)
    counter = itertools.count()
    iterations = 0

    best_obj = np.inf
    best_x = None
    best_key = None

    def consider(res: SolveResult, lo, hi):
        nonlocal best_obj, best_x, best_key, iterations
        snapped = _snap(lp, lo, hi, res.x, binaries)
        if snapped is None:
            return False
        iterations += snapped.iterations
        key = tuple(np.round(snapped.x[binaries]).astype(int))
        better = snapped.objective < best_obj - 1e-12
        tie = abs(snapped.objective - best_obj) <= 1e-12 and key < best_key
        if better or tie:
            best_obj, best_x, best_key = snapped.objective, snapped.x, key
        return True

    root = simplex_solve(lp)
    iterations += root.iterations
    if root.status is Status.ITERATION_LIMIT:
        return SolveResult(Status.ITERATION_LIMIT, iterations=iterations)
    if not root.optimal:
        return SolveResult(Status.INFEASIBLE, nodes=1, iterations=iterations)

    heap = [(root.objective, next(counter), lp.lo.copy(), lp.hi.copy(), root)]
    nodes = 1
    while heap:
        bound, _, lo, hi, res = heapq.heappop(heap)
        if bound >= best_obj - gap_tol:
            heapq.heappush(heap, (bound, next(counter), lo, hi, res))
            break
        j = _most_fractional(res.x, binaries)
        if j is None:
            if consider(res, lo, hi):
                continue
            # Snapping failed numerically; fall through and branch anyway.
            free = binaries[lo[binaries] != hi[binaries]]
            if free.size == 0:
                continue
            j = int(free[np.argmin(np.abs(res.x[free] - 0.5))])
        for value in (0.0, 1.0):
            nodes += 1
            if nodes > max_nodes:
                return SolveResult(
                    Status.ITERATION_LIMIT,
                    best_obj,
                    best_x,
                    nodes=nodes,
                    iterations=iterations,
                )
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = value
            child = simplex_solve(lp.with_bounds(clo, chi))
            iterations += child.iterations
            if child.status is Status.ITERATION_LIMIT:
                return SolveResult(
                    Status.ITERATION_LIMIT, nodes=nodes, iterations=iterations
                )
            if not child.optimal or child.objective >= best_obj - gap_tol:
                continue
            heapq.heappush(heap, (child.objective, next(counter), clo, chi, child))

    if best_x is None:
        return SolveResult(Status.INFEASIBLE, nodes=nodes, iterations=iterations)
    lower = heap[0][0] if heap else best_obj
    gap = max(best_obj - min(lower, best_obj), 0.0)
    return SolveResult(
        Status.OPTIMAL, best_obj, best_x, nodes=nodes, iterations=iterations, gap=gap
    )


def brute_force_milp(milp: MixedIntegerProgram) -> SolveResult:
    """Enumerates every binary pattern and solves each as an LP.

    Exponential in the number of binaries; meant as a test oracle only.
    """
    lp = milp.lp
    binaries = list(milp.binaries)
    best = SolveResult(Status.INFEASIBLE)
    count = 0
    for pattern in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, hi = lp.lo.copy(), lp.hi.copy()
        vals = np.asarray(pattern)
        if np.any(vals < lo[binaries]) or np.any(vals > hi[binaries]):
            continue
        lo[binaries] = vals
        hi[binaries] = vals
        res = simplex_solve(lp.with_bounds(lo, hi))
        count += 1
        if res.optimal and (not best.optimal or res.objective < best.objective):
            best = res
    return dataclasses.replace(best, nodes=count, gap=0.0 if best.optimal else np.nan)
