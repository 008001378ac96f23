"""Baseline noise mechanisms, clamping, and trade-off comparisons.

Baselines add integer noise with unbounded support (two-sided geometric or
discrete Gaussian). Deployed on a bounded query they are either left as is
(``unclamped``: the output may leave ``[0..n]``) or clamped to the nearest end
point, which makes the channel depend on the true answer.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from modnoise.core import (
    NeighborhoodSpec,
    NoisePmf,
    QueryChannel,
    channel_privacy_profile,
    privacy_profile,
    violations,
)
from modnoise.solver import solve_min_delta

TAIL_MASS = 1e-12
CALIBRATION_TOL = 1e-6
GEOMETRIC = 'geometric'
GAUSSIAN = 'gaussian'


class CalibrationError(ValueError):
    """A baseline cannot reach the requested accuracy."""


@dataclasses.dataclass(frozen=True)
class WindowedNoise:
    """Integer noise restricted to ``[-window, window]`` and renormalised."""

    window: int
    masses: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        if masses.shape != (2 * self.window + 1,):
            raise ValueError('masses must cover [-window, window]')
        masses = masses / masses.sum()
        masses.setflags(write=False)
        object.__setattr__(self, 'masses', masses)

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.window, self.window + 1)

    def as_dict(self) -> Dict[int, float]:
        return {int(k): float(v) for k, v in zip(self.support, self.masses)}

    def mass(self, k: int) -> float:
        return float(self.masses[k + self.window]) if abs(k) <= self.window else 0.0

    def cdf(self, k: int) -> float:
        """``P(eta <= k)``."""
        if k < -self.window:
            return 0.0
        if k >= self.window:
            return 1.0
        return float(min(1.0, self.masses[: k + self.window + 1].sum()))

    def error_rate(self) -> float:
        return 1.0 - self.mass(0)

    def mean_squared_error(self) -> float:
        return float(np.dot(self.support.astype(float) ** 2, self.masses))


@dataclasses.dataclass(frozen=True)
class InfiniteNoiseSpec:
    """Two-sided geometric (``param = alpha``) or discrete Gaussian (``sigma^2``)."""

    family: str
    param: float

    def __post_init__(self):
        if self.family == GEOMETRIC:
            if not 0.0 <= self.param < 1.0:
                raise ValueError('alpha must lie in [0, 1)')
        elif self.family == GAUSSIAN:
            if not self.param > 0:
                raise ValueError('sigma^2 must be positive')
        else:
            raise ValueError(f'unknown noise family {self.family!r}')

    @classmethod
    def geometric(cls, alpha: float) -> 'InfiniteNoiseSpec':
        return cls(GEOMETRIC, float(alpha))

    @classmethod
    def gaussian(cls, sigma2: float) -> 'InfiniteNoiseSpec':
        return cls(GAUSSIAN, float(sigma2))

    @property
    def window(self) -> int:
        if self.family == GEOMETRIC:
            return geometric_window(self.param)
        return gaussian_window(self.param)

    def noise(self) -> WindowedNoise:
        if self.family == GEOMETRIC:
            return geometric_masses(self.param)
        return discrete_gaussian_masses(self.param)

    def label(self) -> str:
        name = 'alpha' if self.family == GEOMETRIC else 'sigma2'
        return f'{self.family}({name}={self.param:.6g})'


def geometric_window(alpha: float) -> int:
    """Smallest ``W`` with ``P(|eta| > W) = 2 alpha^{W+1} / (1 + alpha) < 1e-12``."""
    if alpha == 0.0:
        return 0
    w = math.ceil(math.log(TAIL_MASS * (1 + alpha) / 2) / math.log(alpha)) - 1
    w = max(w, 0)
    while 2 * alpha ** (w + 1) / (1 + alpha) >= TAIL_MASS:
        w += 1
    while w > 0 and 2 * alpha**w / (1 + alpha) < TAIL_MASS:
        w -= 1
    return w


def geometric_masses(alpha: float, window: Optional[int] = None) -> WindowedNoise:
    """``(1 - alpha) / (1 + alpha) * alpha^{|k|}`` on ``[-W, W]``, renormalised."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError('alpha must lie in [0, 1)')
    w = geometric_window(alpha) if window is None else int(window)
    k = np.abs(np.arange(-w, w + 1))
    masses = (1 - alpha) / (1 + alpha) * np.power(alpha, k, dtype=float)
    if alpha == 0.0:
        masses = (k == 0).astype(float)
    return WindowedNoise(w, masses)


def _gaussian_weights(sigma2: float, w: int) -> np.ndarray:
    k = np.arange(-w, w + 1, dtype=float)
    return np.exp(-(k**2) / (2 * sigma2))


def gaussian_window(sigma2: float) -> int:
    """Smallest ``W`` whose two-sided tail mass ``P(|eta| > W)`` is below 1e-12."""
    if not sigma2 > 0:
        raise ValueError('sigma^2 must be positive')
    # Beyond sqrt(80 sigma^2) the weights are below e^-40.
    far = int(math.ceil(math.sqrt(80.0 * sigma2))) + 2
    weights = _gaussian_weights(sigma2, far)
    total = weights.sum()
    # beyond[i] = P(|eta| > i) for i = 0..far-1.
    beyond = 2 * np.cumsum(weights[far + 1 :][::-1])[::-1] / total
    below = np.flatnonzero(beyond < TAIL_MASS)
    return int(below[0]) if below.size else far


def discrete_gaussian_masses(
    sigma2: float, window: Optional[int] = None
) -> WindowedNoise:
    """Mass proportional to ``exp(-k^2 / (2 sigma^2))`` on ``[-W, W]``."""
    if not sigma2 > 0:
        raise ValueError('sigma^2 must be positive')
    w = gaussian_window(sigma2) if window is None else int(window)
    return WindowedNoise(w, _gaussian_weights(sigma2, w))


# ------------------------------------------------------------ channels


def clamp_channel(noise, n: int) -> QueryChannel:
    """Channel of ``clip(q + eta, 0, n)``.

    Row ``q``: ``P(0) = P(eta <= -q)``, ``P(k) = f(k - q)`` inside and
    ``P(n) = P(eta >= n - q)``.
    """
    if n < 1:
        raise ValueError('n must be at least 1')
    w = noise.noise() if isinstance(noise, InfiniteNoiseSpec) else noise
    rows = np.zeros((n + 1, n + 1))
    for q in range(n + 1):
        rows[q, 0] = w.cdf(-q)
        for k in range(1, n):
            rows[q, k] = w.mass(k - q)
        rows[q, n] = 1.0 - w.cdf(n - q - 1)
    rows /= rows.sum(axis=1, keepdims=True)
    return QueryChannel(n, rows)


def additive_leakage(
    noise, eps: float, nbhd: NeighborhoodSpec, two_sided: bool = True
) -> float:
    """Leakage of unclamped integer noise (output range unrestricted).

    For an offset ``mu`` the leakage is the mass of noise values with
    ``f(eta) > e^eps f(eta + mu)``; ``-mu`` is included when ``two_sided``.
    """
    w = noise.noise() if isinstance(noise, InfiniteNoiseSpec) else noise
    if not nbhd.is_scalar:
        raise ValueError('scalar neighbourhood required')
    pad = max(nbhd.offsets)
    f = np.concatenate([np.zeros(pad), w.masses, np.zeros(pad)])
    worst = 0.0
    for mu in nbhd.offsets:
        for d in (mu, -mu) if two_sided else (mu,):
            g = np.roll(f, -d)
            u = violations(f, g, eps)
            worst = max(worst, math.fsum(f[u]))
    return min(worst, 1.0)


def clamped_leakage(
    noise, n: int, eps: float, nbhd: NeighborhoodSpec, two_sided: bool = True
) -> float:
    return channel_privacy_profile(
        clamp_channel(noise, n), eps, nbhd, two_sided
    ).delta_actual


def uniform_tail_pmf(n: int, rho: float) -> NoisePmf:
    """``f(0) = 1 - rho`` and ``rho / n`` on every other value."""
    if n < 1:
        raise ValueError('n must be at least 1')
    if not 0.0 < rho < 0.5:
        raise ValueError('rho must lie in (0, 0.5)')
    masses = np.full(n + 1, rho / n)
    masses[0] = 1.0 - rho
    return NoisePmf(n, 1, masses)


# ------------------------------------------------------------ calibration


def _accuracy(noise: WindowedNoise, metric: str) -> float:
    return noise.error_rate() if metric == 'er' else noise.mean_squared_error()


def calibrate(family: str, metric: str, target: float) -> InfiniteNoiseSpec:
    """Parameter at which the noise has error rate or MSE equal to ``target``.

    Both accuracy functionals grow with alpha and sigma^2, so a bracketing
    root finder on the exact (windowed) functional is enough.
    """
    if metric not in ('er', 'mse'):
        raise ValueError(f'unknown metric {metric!r}')
    if not target > 0:
        raise CalibrationError('target must be positive')

    def make(p):
        return (
            InfiniteNoiseSpec.geometric(p)
            if family == GEOMETRIC
            else InfiniteNoiseSpec.gaussian(p)
        )

    def gap(p):
        return _accuracy(make(p).noise(), metric) - target

    if family == GEOMETRIC:
        lo, hi = 1e-12, 0.999
    elif family == GAUSSIAN:
        lo, hi = 1e-3, 1e4
    else:
        raise ValueError(f'unknown noise family {family!r}')
    glo, ghi = gap(lo), gap(hi)
    if glo > 0 or ghi < 0:
        raise CalibrationError(
            f'{family} noise cannot reach {metric}={target} '
            f'(range {glo + target:.6g}..{ghi + target:.6g})'
        )
    p = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    spec = make(p)
    if abs(gap(p)) > CALIBRATION_TOL:
        raise CalibrationError(f'calibration of {family} did not converge')
    return spec


# ------------------------------------------------------------ comparison


@dataclasses.dataclass(frozen=True)
class ComparisonRow:
    mechanism: str
    eps: float
    delta: float


OPTIMAL = 'optimal'
UNIFORM_TAIL = 'uniform_tail'


def optimal_min_delta(
    n: int, nbhd: NeighborhoodSpec, eps: float, metric: str, target: float
) -> float:
    """Smallest leakage of any modular noise meeting the accuracy target."""
    kwargs = {'max_error_rate': target} if metric == 'er' else {'max_mse': target}
    delta, _, _ = solve_min_delta(n, nbhd, eps, **kwargs)
    return delta


def compare_tradeoffs(
    n: int,
    nbhd: NeighborhoodSpec,
    metric: str,
    target: float,
    eps_grid: Iterable[float],
    mechanisms: Optional[Sequence[str]] = None,
    two_sided: bool = False,
    baselines: Optional[Mapping[str, InfiniteNoiseSpec]] = None,
) -> List[ComparisonRow]:
    """Leakage versus eps for every mechanism at matched accuracy.

    ``metric`` is ``'er'`` or ``'mse'``. Mechanism names: ``optimal``,
    ``geometric``, ``gaussian``, their ``_clamped`` variants and (error rate
    only) ``uniform_tail``. The optimal modular mechanism is solved for the
    neighbourhood closed under negation when ``two_sided`` so that every
    mechanism faces the same pairs of neighbouring answers. The default
    checks only the listed offsets, for the baselines as well.

    ``baselines`` maps a family name to a fixed noise spec that is used
    instead of calibrating that family to ``target``.
    """
    eps_grid = [float(e) for e in eps_grid]
    if metric not in ('er', 'mse'):
        raise ValueError(f'unknown metric {metric!r}')
    if mechanisms is None:
        mechanisms = [
            OPTIMAL,
            GEOMETRIC,
            f'{GEOMETRIC}_clamped',
            GAUSSIAN,
            f'{GAUSSIAN}_clamped',
        ]
        if metric == 'er':
            mechanisms.append(UNIFORM_TAIL)
    nbhd.validate(n)
    modular_nbhd = nbhd.mirrored(n) if two_sided else nbhd
    specs = dict(baselines or {})
    for name in mechanisms:
        family = name.replace('_clamped', '')
        if family in (GEOMETRIC, GAUSSIAN) and family not in specs:
            specs[family] = calibrate(family, metric, target)
    tail = uniform_tail_pmf(n, target) if UNIFORM_TAIL in mechanisms else None
    rows = []
    for name in mechanisms:
        for eps in eps_grid:
            if name == OPTIMAL:
                delta = optimal_min_delta(n, modular_nbhd, eps, metric, target)
            elif name == UNIFORM_TAIL:
                if metric != 'er':
                    raise ValueError('uniform_tail is matched on error rate only')
                delta = privacy_profile(tail, eps, modular_nbhd).delta_actual
            elif name.endswith('_clamped'):
                spec = specs[name[: -len('_clamped')]]
                delta = clamped_leakage(spec, n, eps, nbhd, two_sided)
            elif name in specs:
                delta = additive_leakage(specs[name], eps, nbhd, two_sided)
            else:
                raise ValueError(f'unknown mechanism {name!r}')
            rows.append(ComparisonRow(name, eps, delta))
    return rows


def write_comparison_csv(rows: Sequence[ComparisonRow], fh) -> None:
    writer = csv.writer(fh, lineterminator='\n')
    writer.writerow(['mechanism', 'eps', 'delta'])
    for r in rows:
        writer.writerow([r.mechanism, f'{r.eps:.12g}', f'{r.delta:.17g}'])
