"""Optimisation problems for the optimal modular noise PMF.

Variables are ``f`` (the PMF over the flattened ``(n+1)^dims`` grid), leakage
indicators ``u`` and the products ``y = u * f``. The default formulation uses
one indicator vector shared by every offset: ``u(eta) = 1`` marks noise values
allowed to break the ratio bound for some offset, and the total leaked mass
``sum y`` is capped by delta. ``indicator='per_offset'`` instead gives every
offset its own ``(u, y)`` block and its own cap.
"""

from __future__ import annotations

import dataclasses
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from modnoise.core import NeighborhoodSpec, NoisePmf
from modnoise.solver.bnb import MixedIntegerProgram, branch_and_bound
from modnoise.solver.simplex import EQ, LE, LinearProgram, SolveResult

MAX_GRID = 4096
HALF_TOL = 1e-9

SHARED = 'shared'
PER_OFFSET = 'per_offset'


class InfeasibleError(RuntimeError):
    """No PMF meets the constraints (typically f(0) > 1/2 is out of reach)."""


class IterationLimitError(RuntimeError):
    pass


def _grid_size(n: int, dims: int) -> int:
    size = (n + 1) ** dims
    if size > MAX_GRID:
        raise ValueError(f'grid of {size} points exceeds the limit of {MAX_GRID}')
    return size


def shift_index(n: int, dims: int, mu: Sequence[int]) -> np.ndarray:
    """``idx[eta] = flat index of (eta + mu) mod (n + 1)`` coordinatewise."""
    shape = (n + 1,) * dims
    grid = np.arange((n + 1) ** dims).reshape(shape)
    return np.roll(grid, shift=tuple(-m for m in mu), axis=tuple(range(dims))).ravel()


def cost_weights(n: int, dims: int, objective: str = 'er') -> np.ndarray:
    """Per-cell cost: 1 off the origin for ``er``, squared norm for ``mse``."""
    coords = np.indices((n + 1,) * dims).reshape(dims, -1)
    if objective == 'er':
        w = np.ones(coords.shape[1])
    elif objective == 'mse':
        w = (coords.astype(float) ** 2).sum(axis=0)
    else:
        raise ValueError(f'unknown objective {objective!r}')
    w[0] = 0.0
    return w


def _cell_names(n: int, dims: int) -> List[str]:
    if dims == 1:
        return [str(i) for i in range(n + 1)]
    coords = np.indices((n + 1,) * dims).reshape(dims, -1).T
    return ['_'.join(map(str, c)) for c in coords]


def _offset_name(mu) -> str:
    return '_'.join(map(str, mu))


@dataclasses.dataclass
class _Builder:
    nvars: int = 0
    names: List[str] = dataclasses.field(default_factory=list)
    lo: List[float] = dataclasses.field(default_factory=list)
    hi: List[float] = dataclasses.field(default_factory=list)
    rows: List[Tuple[dict, str, float]] = dataclasses.field(default_factory=list)

    def add_vars(self, names, lo=0.0, hi=1.0) -> np.ndarray:
        start = self.nvars
        self.names.extend(names)
        self.lo.extend([lo] * len(names))
        self.hi.extend([hi] * len(names))
        self.nvars += len(names)
        return np.arange(start, self.nvars)

    def add(self, coefs: dict, sense: str, rhs: float) -> None:
        self.rows.append((coefs, sense, float(rhs)))

    def build(self, c: np.ndarray) -> LinearProgram:
        A = np.zeros((len(self.rows), self.nvars))
        for r, (coefs, _, _) in enumerate(self.rows):
            for j, v in coefs.items():
                A[r, j] += v
        return LinearProgram(
            c=c,
            A=A,
            senses=tuple(s for _, s, _ in self.rows),
            b=np.array([r for _, _, r in self.rows]),
            lo=np.array(self.lo),
            hi=np.array(self.hi),
            names=tuple(self.names),
        )


@dataclasses.dataclass(frozen=True)
class Layout:
    """Where each family of variables lives in the solution vector."""

    n: int
    dims: int
    f: np.ndarray
    y: Tuple[np.ndarray, ...]
    u: Tuple[np.ndarray, ...]
    delta: Optional[int] = None


def _base(n: int, dims: int, nbhd: NeighborhoodSpec, eps: float, indicator: str):
    if not eps > 0:
        raise ValueError('eps must be positive')
    if indicator not in (SHARED, PER_OFFSET):
        raise ValueError(f'unknown indicator mode {indicator!r}')
    nbhd.validate(n, dims)
    size = _grid_size(n, dims)
    cells = _cell_names(n, dims)
    b = _Builder()
    f = b.add_vars([f'f{c}' for c in cells])
    b.add({int(j): 1.0 for j in f}, EQ, 1.0)
    b.add({int(j): 1.0 for j in f[1:]}, LE, 0.5)
    scale = math.exp(min(eps, 700.0))
    if indicator == SHARED:
        blocks = [(None, nbhd.offset_set)]
    else:
        blocks = [(mu, (mu,)) for mu in nbhd.offset_set]
    ys, us = [], []
    for tag, offsets in blocks:
        suffix = '' if tag is None else _offset_name(tag) + '_'
        y = b.add_vars([f'y_{suffix}{c}' for c in cells])
        u = b.add_vars([f'u_{suffix}{c}' for c in cells])
        ys.append(y)
        us.append(u)
        for e in range(size):
            fe, ye, ue = int(f[e]), int(y[e]), int(u[e])
            b.add({ye: 1.0, ue: -1.0}, LE, 0.0)
            b.add({ue: 1.0, fe: 1.0, ye: -1.0}, LE, 1.0)
            b.add({ue: 1.0, fe: -1.0, ye: 1.0}, LE, 1.0)
        for mu in offsets:
            shifted = shift_index(n, dims, mu)
            for e in range(size):
                fe, fs, ue = int(f[e]), int(f[shifted[e]]), int(u[e])
                b.add({fe: 1.0, fs: -scale, ue: -1.0}, LE, 0.0)
                b.add({fs: scale, fe: -1.0, ue: scale}, LE, scale)
    layout = Layout(n, dims, f, tuple(ys), tuple(us))
    return b, layout


def _objective(b: _Builder, layout: Layout, weights: np.ndarray) -> np.ndarray:
    c = np.zeros(b.nvars)
    c[layout.f] = weights
    return c


def _resolve_weights(n, dims, weights, objective) -> np.ndarray:
    if weights is None:
        return cost_weights(n, dims, objective)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != (n + 1) ** dims:
        raise ValueError('one weight per noise value required')
    return w


def build_min_error_milp(
    n: int,
    nbhd: NeighborhoodSpec,
    eps: float,
    delta: float,
    weights: Optional[Sequence[float]] = None,
    *,
    dims: Optional[int] = None,
    objective: str = 'er',
    indicator: str = SHARED,
) -> Tuple[MixedIntegerProgram, Layout]:
    """Minimum expected cost PMF with leakage at most ``delta``.

    With ``delta == 0`` the indicators are fixed to zero by their bounds:
    ``y = 0`` forces ``f(eta) = 0`` wherever ``u(eta) = 1``, so dropping the
    indicators loses no feasible PMF.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError('delta must lie in [0, 1]')
    dims = nbhd.dims if dims is None else dims
    b, layout = _base(n, dims, nbhd, eps, indicator)
    for y in layout.y:
        b.add({int(j): 1.0 for j in y}, LE, delta)
    if delta == 0.0:
        for u in layout.u:
            for j in u:
                b.hi[int(j)] = 0.0
    w = _resolve_weights(n, dims, weights, objective)
    lp = b.build(_objective(b, layout, w))
    binaries = tuple(int(j) for u in layout.u for j in u)
    return MixedIntegerProgram(lp, binaries), layout


def build_min_delta_milp(
    n: int,
    nbhd: NeighborhoodSpec,
    eps: float,
    max_error_rate: Optional[float] = None,
    max_mse: Optional[float] = None,
    *,
    dims: Optional[int] = None,
    indicator: str = SHARED,
) -> Tuple[MixedIntegerProgram, Layout]:
    """Smallest leakage subject to an accuracy target (exactly one of two)."""
    if (max_error_rate is None) == (max_mse is None):
        raise ValueError('give exactly one of max_error_rate and max_mse')
    dims = nbhd.dims if dims is None else dims
    b, layout = _base(n, dims, nbhd, eps, indicator)
    d = int(b.add_vars(['delta'])[0])
    for y in layout.y:
        coefs = {int(j): 1.0 for j in y}
        coefs[d] = -1.0
        b.add(coefs, LE, 0.0)
    if max_error_rate is not None:
        if not 0.0 < max_error_rate < 0.5:
            raise ValueError('max_error_rate must lie in (0, 0.5)')
        b.add({int(layout.f[0]): -1.0}, LE, -(1.0 - max_error_rate))
    else:
        if not max_mse > 0:
            raise ValueError('max_mse must be positive')
        w = cost_weights(n, dims, 'mse')
        b.add(
            {int(j): float(w[k]) for k, j in enumerate(layout.f) if w[k]}, LE, max_mse
        )
    c = np.zeros(b.nvars)
    c[d] = 1.0
    lp = b.build(c)
    binaries = tuple(int(j) for u in layout.u for j in u)
    layout = dataclasses.replace(layout, delta=d)
    return MixedIntegerProgram(lp, binaries), layout


def build_zero_delta_lp(
    n: int,
    nbhd: NeighborhoodSpec,
    eps: float,
    *,
    dims: Optional[int] = None,
    objective: str = 'er',
) -> LinearProgram:
    """Pure LP: every ratio constraint holds everywhere (no indicators)."""
    if not eps > 0:
        raise ValueError('eps must be positive')
    dims = nbhd.dims if dims is None else dims
    nbhd.validate(n, dims)
    size = _grid_size(n, dims)
    b = _Builder()
    f = b.add_vars([f'f{c}' for c in _cell_names(n, dims)])
    b.add({int(j): 1.0 for j in f}, EQ, 1.0)
    b.add({int(j): 1.0 for j in f[1:]}, LE, 0.5)
    scale = math.exp(min(eps, 700.0))
    for mu in nbhd.offset_set:
        shifted = shift_index(n, dims, mu)
        for e in range(size):
            b.add({int(f[e]): 1.0, int(f[shifted[e]]): -scale}, LE, 0.0)
    c = np.zeros(size)
    c[:] = cost_weights(n, dims, objective)
    return b.build(c)


def _half_flag(f: np.ndarray) -> Tuple[str, ...]:
    return ('tail_mass_at_half',) if abs(f[1:].sum() - 0.5) <= HALF_TOL else ()


def extract_pmf(res: SolveResult, layout: Layout) -> NoisePmf:
    f = np.clip(res.x[layout.f], 0.0, None)
    return NoisePmf(layout.n, layout.dims, f / f.sum())


def _check(res: SolveResult) -> None:
    if res.status.value == 'infeasible':
        raise InfeasibleError('no noise PMF satisfies the constraints')
    if not res.optimal:
        raise IterationLimitError('solver hit its iteration limit')


def solve_min_error(
    n: int,
    nbhd: NeighborhoodSpec,
    eps: float,
    delta: float,
    *,
    dims: Optional[int] = None,
    objective: str = 'er',
    weights: Optional[Sequence[float]] = None,
    indicator: str = SHARED,
) -> Tuple[NoisePmf, SolveResult]:
    """Solves the min-cost MILP; returns the PMF and the raw result."""
    milp, layout = build_min_error_milp(
        n,
        nbhd,
        eps,
        delta,
        weights,
        dims=dims,
        objective=objective,
        indicator=indicator,
    )
    res = branch_and_bound(milp)
    _check(res)
    res = dataclasses.replace(res, flags=res.flags + _half_flag(res.x[layout.f]))
    return extract_pmf(res, layout), res


def solve_optimal_pmf(
    n: int,
    dims: int,
    nbhd: NeighborhoodSpec,
    eps: float,
    delta: float,
    objective: str = 'er',
    *,
    indicator: str = SHARED,
) -> NoisePmf:
    """Optimal joint noise PMF on ``[0..n]^dims``.

    Raises:
        InfeasibleError: when f(0) > 1/2 cannot be reached.
        ValueError: when the grid exceeds ``MAX_GRID`` cells.
    """
    pmf, _ = solve_min_error(
        n, nbhd, eps, delta, dims=dims, objective=objective, indicator=indicator
    )
    return pmf


def solve_min_delta(
    n: int,
    nbhd: NeighborhoodSpec,
    eps: float,
    max_error_rate: Optional[float] = None,
    max_mse: Optional[float] = None,
    *,
    dims: Optional[int] = None,
    indicator: str = SHARED,
) -> Tuple[float, NoisePmf, SolveResult]:
    """Smallest achievable leakage at the given accuracy; raises if none."""
    milp, layout = build_min_delta_milp(
        n, nbhd, eps, max_error_rate, max_mse, dims=dims, indicator=indicator
    )
    res = branch_and_bound(milp)
    _check(res)
    return max(res.objective, 0.0), extract_pmf(res, layout), res
