"""Dense bounded-variable primal simplex with Bland's anti-cycling rule.

Small, dense LPs only. All structural variables carry finite bounds; they are
shifted to ``[0, hi - lo]`` and handled with the upper-bounding technique so
no extra rows are needed for them. Phase 1 minimises the sum of artificial
variables; phase 2 the user objective. The final basis is re-solved against
the original (scaled) rows to remove accumulated tableau round-off.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Optional, Tuple

import numpy as np

PIVOT_TOL = 1e-7
FEAS_TOL = 1e-9
MAX_PIVOTS = 10**6
STALL_LIMIT = 50
REFACTOR_EVERY = 50
SCALING_PASSES = 8
GROWTH_LIMIT = 1e8
REFACTOR_GROWTH = 1e5
SCREEN_LIMIT = 64

LE = '<='
EQ = '='


class Status(enum.Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    ITERATION_LIMIT = 'iteration_limit'


@dataclasses.dataclass(frozen=True)
class LinearProgram:
    """``min c @ x`` subject to ``A x (<= | =) b`` and ``lo <= x <= hi``.

    Attributes:
        c: objective coefficients, shape ``(nvars,)``.
        A: constraint matrix, shape ``(nrows, nvars)``.
        senses: one of ``'<='`` or ``'='`` per row.
        b: right-hand sides.
        lo, hi: finite variable bounds.
        names: optional variable names, used by :meth:`to_text`.
    """

    c: np.ndarray
    A: np.ndarray
    senses: Tuple[str, ...]
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.b, dtype=float)
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), c.shape).copy()
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), c.shape).copy()
        senses = tuple(self.senses)
        if b.shape != (A.shape[0],) or len(senses) != A.shape[0]:
            raise ValueError('inconsistent constraint dimensions')
        if any(s not in (LE, EQ) for s in senses):
            raise ValueError('constraint senses must be "<=" or "="')
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError('all variable bounds must be finite')
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError('constraint data must be finite')
        if self.names is not None and len(self.names) != c.size:
            raise ValueError('one name per variable required')
        for name, value in (('c', c), ('A', A), ('b', b), ('lo', lo), ('hi', hi)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'senses', senses)

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def with_bounds(self, lo: np.ndarray, hi: np.ndarray) -> 'LinearProgram':
        return dataclasses.replace(self, lo=lo, hi=hi)

    def residuals(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x``."""
        ax = self.A @ x - self.b
        eq = np.array([s == EQ for s in self.senses], dtype=bool)
        viol = np.where(eq, np.abs(ax), np.maximum(ax, 0.0))
        bound = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
        return float(max(viol.max(initial=0.0), bound.max(initial=0.0)))

    def to_text(self) -> str:
        """Plain-text dump: objective, one line per row, then bounds."""
        names = self.names or tuple(f'x{i}' for i in range(self.num_vars))

        def expr(coefs):
            terms = [f'{v:.12g}*{names[j]}' for j, v in enumerate(coefs) if v != 0]
            return ' + '.join(terms) if terms else '0'

        lines = [f'min {expr(self.c)}']
        for row, sense, rhs in zip(self.A, self.senses, self.b):
            lines.append(f'{expr(row)} {sense} {rhs:.12g}')
        for j in range(self.num_vars):
            lines.append(f'{self.lo[j]:.12g} <= {names[j]} <= {self.hi[j]:.12g}')
        return '\n'.join(lines) + '\n'


@dataclasses.dataclass(frozen=True)
class SolveResult:
    status: Status
    objective: float = float('nan')
    x: Optional[np.ndarray] = None
    nodes: int = 0
    iterations: int = 0
    gap: float = float('nan')
    flags: Tuple[str, ...] = ()

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _IterationLimit(Exception):
    pass


class _Tableau:
    """Working state for the bounded simplex on ``T z = beta`` form.

    Columns: shifted structurals, then slacks, then artificials. ``T`` holds
    ``B^-1 [A | I]`` and ``beta`` the current basic values.
    """

    def __init__(self, T, beta, basis, upper, at_upper, budget):
        self.row_ids = np.arange(T.shape[0])
        self.T = T
        self.beta = beta
        self.basis = basis
        self.upper = upper
        self.at_upper = at_upper
        self.pivots = 0
        self.budget = budget
        self.degenerate_run = 0
        self.since_refactor = 0
        self.M = T.copy()
        self.rhs = beta.copy()

    def refactor(self) -> None:
        """Rebuilds ``T`` and ``beta`` from the original rows and the basis."""
        rows = self.row_ids
        B = self.M[np.ix_(rows, self.basis)]
        try:
            T = np.linalg.solve(B, self.M[rows])
        except np.linalg.LinAlgError:
            return
        z = np.where(self.at_upper, self.upper, 0.0)
        z[self.basis] = 0.0
        beta = np.linalg.solve(B, self.rhs[rows] - self.M[rows] @ z)
        self.since_refactor = 0
        # On a near-singular basis the fresh solve can be worse than the
        # updated tableau; keep whichever is more nearly feasible.
        if self._infeasibility(beta) > max(self._infeasibility(self.beta), FEAS_TOL):
            return
        T[np.abs(T) < 1e-13] = 0.0
        self.T = T
        self.beta = beta

    def _infeasibility(self, beta: np.ndarray) -> float:
        ub = self.upper[self.basis]
        over = np.where(np.isfinite(ub), beta - ub, 0.0)
        return float(max((-beta).max(initial=0.0), over.max(initial=0.0)))

    def _ratio_test(self, j: int):
        """Returns (leave, step, leave_to_upper, col, growth) for entering ``j``.

        ``leave`` is -1 for a bound flip. ``growth`` estimates the largest
        tableau entry the pivot would create.
        """
        T, basis = self.T, self.basis
        direction = -1.0 if self.at_upper[j] else 1.0
        col = T[:, j] * direction
        # Basic variables move by -col * t.
        ub_basic = self.upper[basis]
        ratios = np.full(col.size, np.inf)
        pos = col > PIVOT_TOL
        neg = (col < -PIVOT_TOL) & np.isfinite(ub_basic)
        ratios[pos] = np.maximum(self.beta[pos], 0.0) / col[pos]
        ratios[neg] = np.maximum(ub_basic[neg] - self.beta[neg], 0.0) / -col[neg]
        best = ratios.min(initial=np.inf)
        step = self.upper[j]
        leave = -1
        leave_to_upper = False
        growth = 0.0
        if np.isfinite(best) and best <= step + 1e-12:
            # A row ties when taking the leader's step would push its basic
            # variable past its bound by no more than round-off.
            finite = np.flatnonzero(np.isfinite(ratios))
            slack = (ratios[finite] - best) * np.abs(col[finite])
            tied = finite[slack <= 1e-12]
            if self.degenerate_run < STALL_LIMIT:
                # Largest pivot among ties keeps the tableau well scaled.
                leave = int(tied[np.argmax(np.abs(col[tied]))])
            else:
                # Stalling: strict Bland, smallest basic index leaves.
                leave = int(tied[np.argmin(basis[tied])])
            step = ratios[leave]
            leave_to_upper = bool(neg[leave])
            growth = np.abs(col).max() * np.abs(T[leave]).max() / abs(col[leave])
        return leave, step, leave_to_upper, col, growth

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> None:
        T, basis = self.T, self.basis
        while True:
            d = cost - cost[basis] @ T
            d[basis] = 0.0
            cand = allowed & (
                ((d < -FEAS_TOL) & ~self.at_upper) | ((d > FEAS_TOL) & self.at_upper)
            )
            cand[basis] = False
            cand &= self.upper > 0
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                if self.since_refactor == 0:
                    return
                # Confirm optimality on a freshly factored tableau.
                self.refactor()
                T, basis = self.T, self.basis
                continue
            if self.degenerate_run < STALL_LIMIT:
                # Dantzig pricing, then screen out pivots that would make the
                # basis ill-conditioned while a tamer candidate exists.
                norms = np.sqrt(1.0 + np.einsum('ij,ij->j', T[:, idx], T[:, idx]))
                order = idx[np.argsort(-np.abs(d[idx]) / norms, kind='stable')]
                choice = None
                for j in order[:SCREEN_LIMIT]:
                    test = self._ratio_test(int(j))
                    if choice is None or test[4] < choice[1][4]:
                        choice = (int(j), test)
                    if test[4] <= GROWTH_LIMIT:
                        choice = (int(j), test)
                        break
                j, (leave, step, leave_to_upper, col, growth) = choice
            else:
                j = int(idx[0])
                leave, step, leave_to_upper, col, growth = self._ratio_test(j)
            if not np.isfinite(step):
                raise RuntimeError('unbounded direction in a bounded LP')
            self.pivots += 1
            if self.pivots > self.budget:
                raise _IterationLimit
            self.degenerate_run = self.degenerate_run + 1 if step <= 1e-12 else 0
            self.beta -= col * step
            if leave < 0:
                # Bound flip, basis unchanged.
                self.at_upper[j] = not self.at_upper[j]
                continue
            entering_value = (self.upper[j] - step) if self.at_upper[j] else step
            old = basis[leave]
            self._pivot(leave, j)
            self.beta[leave] = entering_value
            self.at_upper[old] = leave_to_upper
            self.at_upper[j] = False
            # Large multipliers leave round-off behind; rebuild from the
            # original rows.
            if growth > REFACTOR_GROWTH or self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            T, basis = self.T, self.basis

    def _pivot(self, r: int, j: int) -> None:
        T = self.T
        prow = T[r] / T[r, j]
        T -= np.outer(T[:, j], prow)
        T[r] = prow
        T[np.abs(T) < 1e-13] = 0.0
        self.basis[r] = j
        self.since_refactor += 1


def simplex_solve(lp: LinearProgram, max_pivots: int = MAX_PIVOTS) -> SolveResult:
    """Solves ``lp`` to optimality or proves it infeasible."""
    n = lp.num_vars
    width = lp.hi - lp.lo
    if np.any(width < -FEAS_TOL):
        return SolveResult(Status.INFEASIBLE)
    width = np.maximum(width, 0.0)

    A = lp.A.copy()
    b = lp.b - A @ lp.lo
    row_scale, col_scale = _geometric_scaling(A)
    A *= row_scale[:, None] * col_scale[None, :]
    b = b * row_scale
    width = width / col_scale
    cost = lp.c * col_scale
    le = np.array([s == LE for s in lp.senses], dtype=bool)
    m = A.shape[0]
    if m == 0:
        z = np.where(lp.c < 0, width, 0.0) * col_scale
        x = lp.lo + z
        return SolveResult(Status.OPTIMAL, float(lp.c @ x), x, iterations=0)

    # Empty rows must already be satisfied.
    empty = ~np.any(A != 0, axis=1)
    if np.any(empty & le & (b < -FEAS_TOL)) or np.any(
        empty & ~le & (np.abs(b) > FEAS_TOL)
    ):
        return SolveResult(Status.INFEASIBLE)

    slack_cols = np.flatnonzero(le)
    ns = slack_cols.size
    S = np.zeros((m, ns))
    S[slack_cols, np.arange(ns)] = 1.0
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    S *= sign[:, None]
    b = b * sign

    # Rows whose slack enters with +1 start with the slack basic.
    basis = np.empty(m, dtype=int)
    art_rows = []
    slack_of_row = {r: n + k for k, r in enumerate(slack_cols)}
    for r in range(m):
        if le[r] and sign[r] > 0:
            basis[r] = slack_of_row[r]
        else:
            art_rows.append(r)
    na = len(art_rows)
    Art = np.zeros((m, na))
    for k, r in enumerate(art_rows):
        Art[r, k] = 1.0
        basis[r] = n + ns + k

    T = np.hstack([A, S, Art])
    total = n + ns + na
    upper = np.concatenate([width, np.full(ns + na, np.inf)])
    tab = _Tableau(T, b.copy(), basis, upper, np.zeros(total, dtype=bool), max_pivots)

    try:
        if na:
            cost1 = np.zeros(total)
            cost1[n + ns :] = 1.0
            tab.run(cost1, np.ones(total, dtype=bool))
            art_value = sum(tab.beta[i] for i in range(m) if tab.basis[i] >= n + ns)
            if art_value > FEAS_TOL * max(1.0, m):
                return SolveResult(Status.INFEASIBLE, iterations=tab.pivots)
            _drive_out_artificials(tab, n + ns)
        cost2 = np.zeros(total)
        cost2[:n] = cost
        allowed = np.zeros(total, dtype=bool)
        allowed[: n + ns] = True
        tab.run(cost2, allowed)
    except _IterationLimit:
        return SolveResult(Status.ITERATION_LIMIT, iterations=tab.pivots)

    z = _recover(tab, A, S, b, n, ns, width) * col_scale
    x = np.clip(lp.lo + z, lp.lo, lp.hi)
    return SolveResult(Status.OPTIMAL, float(lp.c @ x), x, iterations=tab.pivots)


def _geometric_scaling(A: np.ndarray, passes: int = SCALING_PASSES):
    """Row and column factors that pull nonzero magnitudes towards one.

    Alternating geometric-mean passes, rounded to powers of two so scaling
    itself adds no round-off, followed by a final row max-normalisation.
    """
    m, n = A.shape
    row = np.ones(m)
    col = np.ones(n)
    mag = np.abs(A)
    nz = mag > 0
    logs = np.where(nz, np.log2(np.where(nz, mag, 1.0)), 0.0)
    for _ in range(passes):
        cur = logs + np.log2(row)[:, None] + np.log2(col)[None, :]
        hi = np.where(nz, cur, -np.inf).max(axis=1, initial=-np.inf)
        lo = np.where(nz, cur, np.inf).min(axis=1, initial=np.inf)
        ok = np.isfinite(hi)
        row[ok] *= np.exp2(-np.round((hi[ok] + lo[ok]) / 2))
        cur = logs + np.log2(row)[:, None] + np.log2(col)[None, :]
        hi = np.where(nz, cur, -np.inf).max(axis=0, initial=-np.inf)
        lo = np.where(nz, cur, np.inf).min(axis=0, initial=np.inf)
        ok = np.isfinite(hi)
        col[ok] *= np.exp2(-np.round((hi[ok] + lo[ok]) / 2))
    cur = mag * row[:, None] * col[None, :]
    peak = cur.max(axis=1, initial=0.0)
    peak[peak == 0] = 1.0
    row /= np.exp2(np.round(np.log2(peak)))
    return row, col


def _drive_out_artificials(tab: _Tableau, first_art: int) -> None:
    """Pivots zero-valued artificials out of the basis; drops redundant rows."""
    keep = []
    for i in range(tab.T.shape[0]):
        if tab.basis[i] < first_art:
            keep.append(i)
            continue
        row = tab.T[i, :first_art]
        cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
        cand = [j for j in cand if j not in set(tab.basis)]
        if not cand:
            continue
        j = int(cand[0])
        # Entering at its current bound keeps every basic value unchanged.
        value = tab.upper[j] if tab.at_upper[j] else 0.0
        tab._pivot(i, j)
        tab.beta[i] = value
        tab.at_upper[j] = False
        keep.append(i)
    if len(keep) < tab.T.shape[0]:
        tab.T = tab.T[keep]
        tab.beta = tab.beta[keep]
        tab.basis = tab.basis[keep]
        tab.row_ids = tab.row_ids[keep]


def _recover(tab, A, S, b, n, ns, width) -> np.ndarray:
    """Basic solution of the final basis, re-solved on the original rows."""
    full = np.hstack([A, S])
    nonbasic_value = np.where(tab.at_upper[: n + ns], tab.upper[: n + ns], 0.0)
    basis = tab.basis
    z_all = nonbasic_value.copy()
    in_range = basis < n + ns
    z_all[basis[in_range]] = tab.beta[in_range]
    if np.all(in_range) and len(basis) == full.shape[0]:
        nonbasic_value[basis] = 0.0
        try:
            refined = np.linalg.solve(full[:, basis], b - full @ nonbasic_value)
        except np.linalg.LinAlgError:
            refined = None
        ub = tab.upper[basis]
        if (
            refined is not None
            and np.all(refined >= -FEAS_TOL)
            and np.all(refined <= ub + FEAS_TOL)
        ):
            z_all[basis] = refined
    return np.clip(z_all[:n], 0.0, width)
