"""Closed-form optimal noise for single-distance and bounded-difference offsets.

As delta grows, the optimal f(0) alternates between flat regions (the PMF does
not change) and linear regions (f(0) grows proportionally to delta). Every
section ``s`` has a flat value ``F_s`` of f(0), a flat interval
``[lo_s, hi_s]`` and a linear interval ``(hi_{s-1}, lo_s]`` on which
``f(0) = F_s * delta / lo_s``. The last section always has ``lo = hi = 1`` and
``F = 1``, i.e. ``f(0) = delta``.

SD results live on the lattice of multiples of ``mu`` modulo ``n + 1``;
``m`` below is the lattice size minus one (``n`` itself when ``mu`` and
``n + 1`` are coprime).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, List, Tuple

import numpy as np
from scipy.optimize import bisect

from modnoise.core import NoisePmf

BISECT_LO = 1e-6
BISECT_HI = 50.0
BISECT_TOL = 1e-10


class ClosedFormUnsupported(ValueError):
    """No closed form is available; use the solver instead."""


def _check_eps(eps: float) -> None:
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError('eps must be a positive finite number')


def _check_mu(n: int, mu: int) -> None:
    if n < 1:
        raise ValueError('n must be at least 1')
    if not 1 <= mu <= n:
        raise ValueError(f'mu must lie in [1..{n}], got {mu}')


def _check_delta(delta: float) -> None:
    if not 0.0 <= delta <= 1.0:
        raise ValueError('delta must lie in [0, 1]')


def _check_rho(rho_star: float) -> None:
    if not 0.0 < rho_star < 0.5:
        raise ValueError('target error rate must lie in (0, 0.5)')


def xi(a: int, eps: float) -> float:
    """``sum_{i<a} e^{-i eps}``."""
    return float(np.exp(-eps * np.arange(a)).sum())


@dataclasses.dataclass(frozen=True)
class Segment:
    """One flat region and the linear region leading into it.

    ``index`` is ``(k,)`` for SD and ``(h, j)`` for BD; the final section
    carries ``index = ('final',)``.
    """

    index: tuple
    flat_lo: float
    flat_hi: float
    linear_lo: float
    f0: float

    @property
    def linear_hi(self) -> float:
        return self.flat_lo

    @property
    def has_linear(self) -> bool:
        return self.flat_lo > self.linear_lo


@dataclasses.dataclass(frozen=True)
class RegionMap:
    kind: str
    n: int
    eps: float
    mu: int
    segments: Tuple[Segment, ...]

    def locate(self, delta: float) -> Tuple[int, str]:
        """Section position and ``'flat'``/``'linear'``; flat wins at boundaries."""
        _check_delta(delta)
        for pos, seg in enumerate(self.segments):
            if seg.flat_lo <= delta <= seg.flat_hi:
                return pos, 'flat'
            if seg.linear_lo < delta < seg.flat_lo:
                return pos, 'linear'
        raise AssertionError('region map does not cover delta')  # pragma: no cover

    def f0(self, delta: float) -> float:
        pos, region = self.locate(delta)
        seg = self.segments[pos]
        return seg.f0 if region == 'flat' else seg.f0 * delta / seg.flat_lo

    def error_rate(self, delta: float) -> float:
        return 1.0 - self.f0(delta)

    def min_delta(self, target_f0: float) -> float:
        """Smallest delta whose optimal f(0) reaches ``target_f0``."""
        if not 0.0 < target_f0 <= 1.0:
            raise ValueError('target f(0) must lie in (0, 1]')
        for seg in self.segments:
            if seg.f0 >= target_f0:
                if seg.linear_lo == 0.0 and not seg.has_linear:
                    return 0.0
                return max(target_f0 * seg.flat_lo / seg.f0, seg.linear_lo)
        return 1.0  # pragma: no cover

    def breakpoints(self) -> List[float]:
        """Interior deltas where the slope of f(0) changes, increasing."""
        pts = []
        for seg in self.segments:
            for p in (seg.linear_lo, seg.flat_lo, seg.flat_hi):
                if 0.0 < p < 1.0 and (not pts or p > pts[-1] + 1e-15):
                    pts.append(p)
        return pts


@dataclasses.dataclass(frozen=True)
class StaircaseDescriptor:
    """Consecutive runs of equal mass in natural order ``eta = 0, 1, ...``."""

    group_lengths: Tuple[int, ...]
    group_values: Tuple[float, ...]
    section: tuple
    region: str

    def __post_init__(self):
        if len(self.group_lengths) != len(self.group_values):
            raise ValueError('one value per group required')
        if any(l < 0 for l in self.group_lengths):
            raise ValueError('negative group length')
        total = math.fsum(l * v for l, v in zip(self.group_lengths, self.group_values))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f'staircase mass {total!r} differs from 1')

    def masses(self) -> np.ndarray:
        return np.repeat(self.group_values, self.group_lengths)

    def to_pmf(self) -> NoisePmf:
        m = np.clip(self.masses(), 0.0, None)
        return NoisePmf(len(m) - 1, 1, m / m.sum())


# ---------------------------------------------------------------- SD


def lattice_size(n: int, mu: int) -> int:
    """Number of distinct multiples of ``mu`` modulo ``n + 1``."""
    return (n + 1) // math.gcd(n + 1, mu)


def sort_map_sd(n: int, mu: int) -> Tuple[int, ...]:
    """Positions ``h * mu mod (n + 1)`` in assignment order ``h = 0, 1, ...``.

    Only the lattice of multiples is listed when ``gcd(mu, n + 1) > 1``.
    """
    _check_mu(n, mu)
    return tuple(h * mu % (n + 1) for h in range(lattice_size(n, mu)))


def _sd_flat_value(m: int, k: int, eps: float) -> float:
    """Optimal f(0) on flat region ``k``: geometric on ``m - k + 1`` points."""
    return -math.expm1(-eps) / -math.expm1(-(m - k + 1) * eps)


def _sd_lower(m: int, k: int, eps: float) -> float:
    if k == 0:
        return 0.0
    return math.exp(-(m - k) * eps) * _sd_flat_value(m, k, eps)


def _sd_upper(m: int, k: int, eps: float) -> float:
    if k == m:
        return 1.0
    return math.exp(-(m - k - 1) * eps) * _sd_flat_value(m, k, eps)


def _natural_sd(n: int, mu: int, sorted_masses: np.ndarray) -> NoisePmf:
    out = np.zeros(n + 1)
    out[list(sort_map_sd(n, mu))] = sorted_masses
    out = np.clip(out, 0.0, None)
    return NoisePmf(n, 1, out / out.sum())


def sd_pmf_zero_delta(n: int, mu: int, eps: float) -> NoisePmf:
    """Geometric masses ``f(h mu) = e^{-h eps} f(0)`` over the lattice."""
    _check_mu(n, mu)
    _check_eps(eps)
    size = lattice_size(n, mu)
    sorted_masses = np.exp(-eps * np.arange(size)) * _sd_flat_value(size - 1, 0, eps)
    return _natural_sd(n, mu, sorted_masses)


def sd_region_boundaries(n: int, eps: float, mu: int = 1) -> RegionMap:
    """Flat/linear regions for SD; ``mu`` only matters through the lattice size."""
    _check_mu(n, mu)
    _check_eps(eps)
    m = lattice_size(n, mu) - 1
    segments = []
    prev_hi = 0.0
    for k in range(m + 1):
        lo = _sd_lower(m, k, eps)
        hi = _sd_upper(m, k, eps)
        f0 = 1.0 if k == m else _sd_flat_value(m, k, eps)
        index = ('final',) if k == m else (k,)
        segments.append(Segment(index, lo, hi, prev_hi, f0))
        prev_hi = hi
    return RegionMap('sd', n, eps, mu, tuple(segments))


def sd_sorted_masses(n: int, mu: int, eps: float, delta: float) -> np.ndarray:
    """Optimal masses ``f_(h) = f(h mu mod (n + 1))`` in assignment order."""
    _check_mu(n, mu)
    _check_eps(eps)
    _check_delta(delta)
    m = lattice_size(n, mu) - 1
    rmap = sd_region_boundaries(n, eps, mu)
    pos, region = rmap.locate(delta)
    k = pos
    h = np.arange(m + 1)
    if region == 'flat':
        if k == m:
            return (h == 0).astype(float)
        head = _sd_flat_value(m, k, eps) * np.exp(-h * eps)
        return np.where(h <= m - k, head, 0.0)
    lower = _sd_lower(m, k, eps)
    head = delta * np.exp((m - k - h) * eps)
    tail = (np.exp((m - h) * eps) * math.expm1(eps) / math.expm1(k * eps)) * (
        1.0 - delta / lower
    )
    return np.where(h <= m - k, head, tail)


def sd_pmf(n: int, mu: int, eps: float, delta: float) -> NoisePmf:
    """Error-rate optimal PMF for offset ``mu`` at leakage ``delta``."""
    return _natural_sd(n, mu, sd_sorted_masses(n, mu, eps, delta))


# ---------------------------------------------------------------- BD


def bd_decompose(n: int, mu_bar: int) -> Tuple[int, int]:
    """``n = b * mu_bar + r`` with ``0 <= r < mu_bar``."""
    _check_mu(n, mu_bar)
    return divmod(n, mu_bar)


def bd_closed_form_supported(n: int, mu_bar: int) -> bool:
    b, r = bd_decompose(n, mu_bar)
    return b + r < mu_bar


def _normalizer(lengths, eps) -> float:
    w = np.exp(-eps * np.arange(len(lengths)))
    return 1.0 / float(np.dot(lengths, w))


def _bd_zero_lengths(b: int, mu_bar: int, r: int) -> List[int]:
    return [1] + [mu_bar] * b + [r]


def bd_pmf_zero_delta(n: int, mu_bar: int, eps: float) -> NoisePmf:
    """Staircase with steps ``(1, mu_bar x b, r)`` decaying by ``e^{-eps}``."""
    _check_eps(eps)
    b, r = bd_decompose(n, mu_bar)
    return _bd_flat_descriptor(b, mu_bar, r, 0, 0, eps).to_pmf()


def _bd_flat_lengths(b, mu_bar, r, h, j) -> List[int]:
    if h == 0:
        return _bd_zero_lengths(b, mu_bar, r)
    lengths = [1] + [mu_bar] * (b - h) + [mu_bar - 1] * h + [0]
    if j != h:
        lengths[b - h + j + 1] = mu_bar
    lengths[b + 1] = r + h - (1 if j != h else 0)
    return lengths


def _bd_flat_descriptor(b, mu_bar, r, h, j, eps) -> StaircaseDescriptor:
    lengths = _bd_flat_lengths(b, mu_bar, r, h, j)
    phi0 = _normalizer(lengths, eps)
    values = phi0 * np.exp(-eps * np.arange(len(lengths)))
    return StaircaseDescriptor(tuple(lengths), tuple(values), (h, j), 'flat')


def _bd_linear_descriptor(b, mu_bar, r, h, j, eps, delta) -> StaircaseDescriptor:
    single = b - h + j + 1
    lengths = [1] + [mu_bar] * (b - h) + [mu_bar - 1] * (h + 1) + [r + h - 1]
    lengths[single] = 1
    x = xi(j, eps)
    values = np.empty(b + 3)
    for i in range(b + 3):
        if i <= b - h + j:
            values[i] = delta * math.exp((b - h - i) * eps) / x
        elif i >= single + 1:
            values[i] = delta * math.exp((b - h - i + 1) * eps) / x
    rest = math.fsum(lengths[i] * values[i] for i in range(b + 3) if i != single)
    values[single] = 1.0 - rest
    return StaircaseDescriptor(tuple(lengths), tuple(values), (h, j), 'linear')


def _bd_sections(b: int) -> List[Tuple[int, int]]:
    return [(0, 0)] + [(h, j) for h in range(1, b) for j in range(1, h + 1)]


def _bd_bounds(b, mu_bar, r, h, j, eps) -> Tuple[float, float, float]:
    """``(phi0, lower, upper)`` of flat section ``(h, j)``."""
    phi0 = _normalizer(_bd_flat_lengths(b, mu_bar, r, h, j), eps)
    if h == 0:
        return phi0, 0.0, phi0 * math.exp(-(b - 1) * eps)
    lower = phi0 * math.exp(-(b - h) * eps) * xi(j, eps)
    if j < h:
        upper = phi0 * math.exp(-(b - h) * eps) * xi(j + 1, eps)
    else:
        upper = phi0 * math.exp(-(b - h - 1) * eps)
    return phi0, lower, upper


def _require_supported(n: int, mu_bar: int) -> None:
    if not bd_closed_form_supported(n, mu_bar):
        b, r = bd_decompose(n, mu_bar)
        raise ClosedFormUnsupported(
            f'no staircase closed form for n={n}, mu_bar={mu_bar} '
            f'(b + r = {b + r} >= mu_bar); use the solver'
        )


def bd_region_boundaries(n: int, mu_bar: int, eps: float) -> RegionMap:
    _check_eps(eps)
    _require_supported(n, mu_bar)
    b, r = bd_decompose(n, mu_bar)
    segments = []
    prev_hi = 0.0
    for h, j in _bd_sections(b):
        phi0, lo, hi = _bd_bounds(b, mu_bar, r, h, j, eps)
        segments.append(Segment((h, j), lo, hi, prev_hi, phi0))
        prev_hi = hi
    segments.append(Segment(('final',), 1.0, 1.0, prev_hi, 1.0))
    return RegionMap('bd', n, eps, mu_bar, tuple(segments))


def _bd_final_pmf(n: int, delta: float) -> NoisePmf:
    masses = np.full(n + 1, (1.0 - delta) / n)
    masses[0] = delta
    return NoisePmf(n, 1, masses)


def bd_final_threshold(n: int, mu_bar: int, eps: float) -> float:
    """Delta above which ``f(0) = delta`` is optimal.

    Exact when the staircase closed form applies. Otherwise this is a safe
    sufficient bound: if f(0) does not leak, ``mu_bar`` other masses are each
    at least ``e^{-eps} f(0)``, so ``f(0) <= 1 / (1 + mu_bar e^{-eps})``.
    """
    _check_eps(eps)
    if bd_closed_form_supported(n, mu_bar):
        return bd_region_boundaries(n, mu_bar, eps).segments[-1].linear_lo
    return 1.0 / (1.0 + mu_bar * math.exp(-eps))


def bd_staircase(n: int, mu_bar: int, eps: float, delta: float) -> StaircaseDescriptor:
    """Group description of the optimal BD PMF (staircase sections only)."""
    _check_eps(eps)
    _check_delta(delta)
    b, r = bd_decompose(n, mu_bar)
    if delta == 0.0:
        return _bd_flat_descriptor(b, mu_bar, r, 0, 0, eps)
    rmap = bd_region_boundaries(n, mu_bar, eps)
    pos, region = rmap.locate(delta)
    seg = rmap.segments[pos]
    if seg.index == ('final',):
        raise ValueError('delta lies in the final section, which is not a staircase')
    h, j = seg.index
    if region == 'flat':
        return _bd_flat_descriptor(b, mu_bar, r, h, j, eps)
    return _bd_linear_descriptor(b, mu_bar, r, h, j, eps, delta)


def bd_pmf(n: int, mu_bar: int, eps: float, delta: float) -> NoisePmf:
    """Error-rate optimal PMF for offsets ``{1..mu_bar}`` at leakage ``delta``.

    Raises:
        ClosedFormUnsupported: when ``b + r >= mu_bar`` and delta lies strictly
            between 0 and the final-section threshold.
    """
    _check_eps(eps)
    _check_delta(delta)
    b, r = bd_decompose(n, mu_bar)
    if delta == 0.0:
        return bd_pmf_zero_delta(n, mu_bar, eps)
    if bd_closed_form_supported(n, mu_bar):
        rmap = bd_region_boundaries(n, mu_bar, eps)
        pos, _ = rmap.locate(delta)
        if rmap.segments[pos].index == ('final',):
            return _bd_final_pmf(n, delta)
        return bd_staircase(n, mu_bar, eps, delta).to_pmf()
    if delta >= bd_final_threshold(n, mu_bar, eps):
        return _bd_final_pmf(n, delta)
    _require_supported(n, mu_bar)
    raise AssertionError('unreachable')  # pragma: no cover


def region_label(rmap: RegionMap, delta: float) -> str:
    pos, region = rmap.locate(delta)
    index = rmap.segments[pos].index
    return f"{region}:{','.join(map(str, index))}"


# ---------------------------------------------------------------- curves


@dataclasses.dataclass(frozen=True)
class TradeoffSegment:
    """On ``eps_lo <= eps < eps_hi``: ``delta = coef(eps) * (1 - rho_star)``."""

    index: tuple
    eps_lo: float
    eps_hi: float
    rho_star: float
    kind: str
    lattice_m: int = 0
    b: int = 0

    def delta(self, eps: float) -> float:
        target = 1.0 - self.rho_star
        if self.index == ('zero',):
            return 0.0
        if self.index == ('final',):
            return target
        if self.kind == 'sd':
            (k,) = self.index
            return math.exp(-(self.lattice_m - k) * eps) * target
        h, j = self.index
        return xi(j, eps) * math.exp(-(self.b - h) * eps) * target


@dataclasses.dataclass(frozen=True)
class TradeoffCurve:
    """Minimum delta as a function of eps at a fixed error rate.

    Segments are ordered by decreasing eps; the first one is the zero-delta
    region ``[eps_0, inf)``.
    """

    segments: Tuple[TradeoffSegment, ...]

    @property
    def breakpoints(self) -> List[float]:
        return [s.eps_lo for s in self.segments if s.eps_lo > 0]

    def segment_at(self, eps: float) -> TradeoffSegment:
        _check_eps(eps)
        for seg in self.segments:
            if seg.eps_lo <= eps < seg.eps_hi:
                return seg
        return self.segments[-1]

    def delta(self, eps: float) -> float:
        return self.segment_at(eps).delta(eps)


def _solve_breakpoint(flat_value: Callable[[float], float], target: float) -> float:
    """Smallest eps with ``flat_value(eps) >= target`` (increasing function)."""
    g = lambda e: flat_value(e) - target
    if g(BISECT_LO) >= 0:
        return 0.0
    if g(BISECT_HI) < 0:
        return math.inf
    return bisect(g, BISECT_LO, BISECT_HI, xtol=BISECT_TOL, maxiter=500)


def _build_curve(kind, sections, flat_value, rho_star, **extra) -> TradeoffCurve:
    target = 1.0 - rho_star
    segments = []
    eps_hi = math.inf
    for pos, index in enumerate(sections):
        eps_lo = _solve_breakpoint(lambda e: flat_value(pos, e), target)
        label = ('zero',) if pos == 0 else index
        if eps_lo < eps_hi:
            segments.append(
                TradeoffSegment(label, eps_lo, eps_hi, rho_star, kind, **extra)
            )
            eps_hi = eps_lo
        if eps_hi == 0.0:
            break
    return TradeoffCurve(tuple(segments))


def sd_tradeoff_curve(n: int, mu: int, rho_star: float) -> TradeoffCurve:
    """Minimum delta versus eps at error rate ``rho_star`` for offset ``mu``."""
    _check_mu(n, mu)
    _check_rho(rho_star)
    m = lattice_size(n, mu) - 1
    sections = [(k,) for k in range(m)] + [('final',)]

    def flat_value(pos, eps):
        return 1.0 if pos == m else _sd_flat_value(m, pos, eps)

    return _build_curve('sd', sections, flat_value, rho_star, lattice_m=m)


def bd_tradeoff_curve(n: int, mu_bar: int, rho_star: float) -> TradeoffCurve:
    """Minimum delta versus eps at error rate ``rho_star`` for offsets ``{1..mu_bar}``."""
    _check_rho(rho_star)
    _require_supported(n, mu_bar)
    b, r = bd_decompose(n, mu_bar)
    sections = _bd_sections(b) + [('final',)]

    def flat_value(pos, eps):
        if pos == len(sections) - 1:
            return 1.0
        h, j = sections[pos]
        return _normalizer(_bd_flat_lengths(b, mu_bar, r, h, j), eps)

    return _build_curve('bd', sections, flat_value, rho_star, b=b)


# ---------------------------------------------------------------- limits


def asymptotic_error_rate(kind: str, eps: float, mu_bar: int = 1) -> float:
    """Limit of the zero-delta optimal error rate as ``n`` grows.

    The value is capped at 0.5: below the threshold no PMF with f(0) > 1/2
    meets the ratio constraints.
    """
    _check_eps(eps)
    if kind == 'sd':
        mu_bar = 1
    elif kind != 'bd':
        raise ValueError(f'unknown kind {kind!r}')
    if mu_bar < 1:
        raise ValueError('mu_bar must be at least 1')
    if eps <= math.log1p(mu_bar):
        return 0.5
    t = mu_bar * math.exp(-eps)
    return t / (t - math.expm1(-eps))


def closed_form_infeasible(pmf: NoisePmf, tol: float = 1e-9) -> bool:
    """True when the optimum violates the f(0) >= 1/2 standing assumption."""
    return float(pmf.masses[0]) < 0.5 - tol
