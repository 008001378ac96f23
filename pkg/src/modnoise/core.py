"""Domain types and privacy/utility evaluation for modular additive noise.

A query answer ``q`` in ``[0..n]`` (or ``[0..n]^dims`` for vector queries) is
published as ``(q + eta) mod (n + 1)`` with ``eta`` drawn from a finite noise
PMF. Because the mechanism is shift invariant, the privacy profile depends
only on the PMF and on the set of offsets ``Q(X) - Q(X')`` that neighbouring
datasets can produce.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import itertools
import math
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

# Tolerance for the strict ratio test f(eta) > e^eps f(eta + mu).
LEAKAGE_TOL = 1e-9
MASS_SUM_TOL = 1e-9
NEGATIVE_MASS_TOL = 1e-12

Offset = Tuple[int, ...]


class Kind(enum.Enum):
    SINGLE_DISTANCE = 'sd'
    BOUNDED_DIFFERENCE = 'bd'
    ARBITRARY = 'arbitrary'
    VECTOR = 'vector'


def _clean_masses(masses: np.ndarray) -> np.ndarray:
    masses = np.asarray(masses, dtype=float).ravel().copy()
    if not np.all(np.isfinite(masses)):
        raise ValueError('masses must be finite')
    if np.any(masses < -NEGATIVE_MASS_TOL):
        raise ValueError(f'negative mass {masses.min():.3e}')
    masses[masses < 0] = 0.0
    if np.any(masses > 1 + MASS_SUM_TOL):
        raise ValueError('mass above one')
    total = math.fsum(masses)
    if abs(total - 1.0) > MASS_SUM_TOL:
        raise ValueError(f'masses sum to {total!r}, expected 1')
    masses.setflags(write=False)
    return masses


@dataclasses.dataclass(frozen=True)
class NoisePmf:
    """Noise distribution over the grid ``[0..n]^dims``.

    Attributes:
        n: largest noise value per coordinate; the support has ``n + 1`` points
            per coordinate.
        dims: number of query coordinates.
        masses: flat, read-only array of ``(n + 1) ** dims`` probabilities in
            row-major order, so ``masses[0]`` is the mass of the all-zero noise.
    """

    n: int
    dims: int
    masses: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError('n must be at least 1')
        if self.dims < 1:
            raise ValueError('dims must be at least 1')
        masses = _clean_masses(self.masses)
        if masses.size != (self.n + 1) ** self.dims:
            raise ValueError(
                f'expected {(self.n + 1) ** self.dims} masses, got {masses.size}'
            )
        object.__setattr__(self, 'masses', masses)

    @classmethod
    def from_array(cls, values) -> 'NoisePmf':
        """Builds a PMF from a 1-D vector or a ``(n+1, ..., n+1)`` grid."""
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 0 or len(set(arr.shape)) != 1:
            raise ValueError('PMF grid must be a vector or a hypercube')
        return cls(n=arr.shape[0] - 1, dims=arr.ndim, masses=arr.ravel())

    @classmethod
    def uniform(cls, n: int, dims: int = 1) -> 'NoisePmf':
        size = (n + 1) ** dims
        return cls(n, dims, np.full(size, 1.0 / size))

    @classmethod
    def point_mass(
        cls, n: int, eta: Union[int, Sequence[int]] = 0, dims: int = 1
    ) -> 'NoisePmf':
        eta = (
            (eta,) * dims
            if isinstance(eta, (int, np.integer)) and dims > 1
            else _as_tuple(eta)
        )
        masses = np.zeros((n + 1,) * len(eta))
        masses[tuple(e % (n + 1) for e in eta)] = 1.0
        return cls(n, len(eta), masses.ravel())

    @property
    def modulus(self) -> int:
        return self.n + 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n + 1,) * self.dims

    @property
    def support_size(self) -> int:
        return self.masses.size

    def grid(self) -> np.ndarray:
        return self.masses.reshape(self.shape)

    def __getitem__(self, eta) -> float:
        return float(self.grid()[tuple(e % self.modulus for e in _as_tuple(eta))])

    def marginal(self, axis: int) -> 'NoisePmf':
        other = tuple(a for a in range(self.dims) if a != axis)
        return NoisePmf(self.n, 1, self.grid().sum(axis=other))


def _as_tuple(value) -> Offset:
    if isinstance(value, (int, np.integer)):
        return (int(value),)
    return tuple(int(v) for v in value)


@dataclasses.dataclass(frozen=True)
class NeighborhoodSpec:
    """Offsets ``Q(X) - Q(X')`` induced by neighbouring datasets.

    Use the constructors rather than the raw fields. ``param`` holds the
    single distance or the bound for SD/BD neighbourhoods.
    """

    kind: Kind
    offset_set: Tuple[Offset, ...]
    param: Optional[int] = None

    def __post_init__(self):
        if not self.offset_set:
            raise ValueError('neighbourhood needs at least one offset')
        dims = {len(o) for o in self.offset_set}
        if len(dims) != 1:
            raise ValueError('offsets must all have the same dimension')
        for o in self.offset_set:
            if any(c < 0 for c in o):
                raise ValueError(f'offset {o} has a negative coordinate')
            if not any(o):
                raise ValueError('the all-zero offset is not a valid neighbour offset')

    @classmethod
    def single_distance(cls, mu: int) -> 'NeighborhoodSpec':
        if mu < 1:
            raise ValueError('single distance must be at least 1')
        return cls(Kind.SINGLE_DISTANCE, ((int(mu),),), int(mu))

    @classmethod
    def bounded_difference(cls, mu_bar: int) -> 'NeighborhoodSpec':
        if mu_bar < 1:
            raise ValueError('bound must be at least 1')
        return cls(
            Kind.BOUNDED_DIFFERENCE,
            tuple((m,) for m in range(1, mu_bar + 1)),
            int(mu_bar),
        )

    @classmethod
    def arbitrary(cls, offsets: Iterable[int]) -> 'NeighborhoodSpec':
        offs = sorted({int(o) for o in offsets})
        if offs and offs[0] < 1:
            raise ValueError('scalar offsets must be at least 1')
        return cls(Kind.ARBITRARY, tuple((o,) for o in offs))

    @classmethod
    def vector(cls, offsets: Iterable[Sequence[int]]) -> 'NeighborhoodSpec':
        return cls(Kind.VECTOR, tuple(sorted({_as_tuple(o) for o in offsets})))

    @property
    def dims(self) -> int:
        return len(self.offset_set[0])

    @property
    def is_scalar(self) -> bool:
        return self.kind is not Kind.VECTOR

    @property
    def offsets(self) -> Tuple[int, ...]:
        """Scalar offsets in increasing order."""
        if not self.is_scalar:
            raise ValueError('vector neighbourhood has no scalar offsets')
        return tuple(o[0] for o in self.offset_set)

    def validate(self, n: int, dims: Optional[int] = None) -> None:
        if dims is not None and dims != self.dims:
            raise ValueError(f'neighbourhood has {self.dims} dims, PMF has {dims}')
        for o in self.offset_set:
            if any(c > n for c in o):
                raise ValueError(f'offset {o} outside [0..{n}]')

    def mirrored(self, n: int) -> 'NeighborhoodSpec':
        """Adds ``-mu mod (n + 1)`` for every offset (symmetric neighbours)."""
        self.validate(n)
        mod = n + 1
        offs = set(self.offset_set)
        offs |= {tuple((-c) % mod for c in o) for o in self.offset_set}
        if self.is_scalar:
            return NeighborhoodSpec.arbitrary(o[0] for o in offs)
        return NeighborhoodSpec.vector(offs)

    def label(self) -> str:
        if self.kind is Kind.SINGLE_DISTANCE:
            return f'SD({self.param})'
        if self.kind is Kind.BOUNDED_DIFFERENCE:
            return f'BD({self.param})'
        if self.is_scalar:
            return 'Arbitrary({%s})' % ','.join(map(str, self.offsets))
        return 'Vector(%s)' % ','.join(str(o) for o in self.offset_set)


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.eps > 0 or not math.isfinite(self.eps):
            raise ValueError('eps must be a positive finite number')
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError('delta must lie in [0, 1]')


@dataclasses.dataclass(frozen=True)
class QueryChannel:
    """Conditional distributions ``rows[q, k] = P(published = k | true = q)``."""

    n: int
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.shape != (self.n + 1, self.n + 1):
            raise ValueError('channel must be (n+1) x (n+1)')
        rows[(rows < 0) & (rows >= -NEGATIVE_MASS_TOL)] = 0.0
        if np.any(rows < 0):
            raise ValueError('negative channel probability')
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > MASS_SUM_TOL):
            raise ValueError('every channel row must sum to 1')
        rows.setflags(write=False)
        object.__setattr__(self, 'rows', rows)

    @classmethod
    def modular(cls, pmf: NoisePmf) -> 'QueryChannel':
        """Channel of the modular additive mechanism with noise ``pmf``."""
        if pmf.dims != 1:
            raise ValueError('channels are scalar only')
        mod = pmf.modulus
        rows = np.array([np.roll(pmf.masses, q) for q in range(mod)])
        return cls(pmf.n, rows)


@dataclasses.dataclass(frozen=True)
class LeakageReport:
    """Result of a privacy profile evaluation at a fixed eps.

    Attributes:
        delta_actual: smallest delta for which the mechanism is (eps, delta)-DP
            with respect to the evaluated offsets.
        worst_offset: offset attaining ``delta_actual`` (first one on ties).
        per_offset: leakage probability for each offset.
        indicators: for each offset, the boolean violation vector (flat,
            row-major; for channels, the indicator of the worst pair).
    """

    delta_actual: float
    worst_offset: Offset
    per_offset: Mapping[Offset, float]
    indicators: Mapping[Offset, np.ndarray]

    def to_dict(self) -> dict:
        return {
            'delta_actual': self.delta_actual,
            'worst_offset': list(self.worst_offset),
            'per_offset': [
                {'offset': list(o), 'leakage': v} for o, v in self.per_offset.items()
            ],
        }


def _exp(eps: float) -> float:
    if not eps > 0:
        raise ValueError('eps must be positive')
    try:
        return math.exp(eps)
    except OverflowError:
        return math.inf


def violations(f: np.ndarray, g: np.ndarray, eps: float) -> np.ndarray:
    """Elementwise ``f > e^eps * g`` with the leakage tolerance.

    A positive numerator over a zero denominator is a violation; 0/0 is not.
    """
    scale = _exp(eps)
    with np.errstate(invalid='ignore', over='ignore'):
        excess = np.where(g > 0, f - scale * g, f)
    return excess > LEAKAGE_TOL


def circular_shift(pmf: NoisePmf, mu: Union[int, Sequence[int]]) -> NoisePmf:
    """Returns ``g`` with ``g(eta) = f(eta + mu mod (n + 1))`` per coordinate."""
    mu = _as_tuple(mu)
    if len(mu) != pmf.dims:
        raise ValueError('shift dimension does not match PMF')
    grid = np.roll(pmf.grid(), shift=tuple(-m for m in mu), axis=tuple(range(pmf.dims)))
    return NoisePmf(pmf.n, pmf.dims, grid.ravel())


def privacy_profile(pmf: NoisePmf, eps: float, nbhd: NeighborhoodSpec) -> LeakageReport:
    """Leakage ``sup_mu sum_eta 1[f(eta) > e^eps f(eta + mu)] f(eta)``."""
    nbhd.validate(pmf.n, pmf.dims)
    f = pmf.masses
    per_offset: Dict[Offset, float] = {}
    indicators: Dict[Offset, np.ndarray] = {}
    for mu in nbhd.offset_set:
        u = violations(f, circular_shift(pmf, mu).masses, eps)
        u.setflags(write=False)
        indicators[mu] = u
        per_offset[mu] = min(1.0, math.fsum(f[u]))
    worst = max(per_offset, key=lambda o: (per_offset[o], tuple(-c for c in o)))
    return LeakageReport(per_offset[worst], worst, per_offset, indicators)


def channel_privacy_profile(
    channel: QueryChannel, eps: float, nbhd: NeighborhoodSpec, two_sided: bool = True
) -> LeakageReport:
    """Pairwise leakage of a general (not shift invariant) channel.

    Ordered pairs ``(q, q')`` with ``q - q'`` equal to an offset (or its
    negative when ``two_sided``) and both in range are evaluated. Per-offset
    values are the supremum over such pairs.
    """
    if not nbhd.is_scalar:
        raise ValueError('vector neighbourhoods are not supported for channels')
    nbhd.validate(channel.n)
    rows = channel.rows
    per_offset: Dict[Offset, float] = {}
    indicators: Dict[Offset, np.ndarray] = {}
    for mu in nbhd.offsets:
        best, best_u = 0.0, np.zeros(channel.n + 1, dtype=bool)
        diffs = (mu, -mu) if two_sided else (mu,)
        for d in diffs:
            for q in range(channel.n + 1):
                qp = q - d
                if not 0 <= qp <= channel.n:
                    continue
                u = violations(rows[q], rows[qp], eps)
                leak = math.fsum(rows[q][u])
                if leak > best:
                    best, best_u = leak, u
        best_u.setflags(write=False)
        per_offset[(mu,)] = min(1.0, best)
        indicators[(mu,)] = best_u
    worst = max(per_offset, key=lambda o: (per_offset[o], -o[0]))
    return LeakageReport(per_offset[worst], worst, per_offset, indicators)


def error_rate(pmf: NoisePmf) -> float:
    return 1.0 - float(pmf.masses[0])


def mean_squared_error(pmf: NoisePmf) -> float:
    """Literal ``sum_eta eta^2 f(eta)``; no wrap-around distance."""
    if pmf.dims != 1:
        raise ValueError('MSE is defined for scalar PMFs only')
    eta = np.arange(pmf.n + 1)
    return float(np.dot(eta * eta, pmf.masses))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_noise(pmf: NoisePmf, size: int, rng_seed: int) -> np.ndarray:
    """Inverse-CDF draws of flat support indices, ascending index order."""
    cdf = np.cumsum(pmf.masses)
    u = make_rng(rng_seed).random(size)
    idx = np.searchsorted(cdf, u * cdf[-1], side='right')
    return np.minimum(idx, pmf.support_size - 1)


def publish(q, pmf: NoisePmf, rng_seed: int):
    """Publishes ``(q + eta) mod (n + 1)`` per coordinate.

    Returns an int for scalar PMFs and a tuple for vector PMFs.
    """
    qt = _as_tuple(q)
    if len(qt) != pmf.dims:
        raise ValueError('query dimension does not match PMF')
    if any(not 0 <= c <= pmf.n for c in qt):
        raise ValueError(f'query value {q} outside [0..{pmf.n}]')
    flat = int(sample_noise(pmf, 1, rng_seed)[0])
    eta = np.unravel_index(flat, pmf.shape)
    out = tuple((c + int(e)) % pmf.modulus for c, e in zip(qt, eta))
    return out[0] if pmf.dims == 1 else out


def publish_many(q, pmf: NoisePmf, count: int, rng_seed: int) -> np.ndarray:
    """Vectorised ``publish`` for ``count`` independent draws.

    The result has shape ``(count,)`` for scalar PMFs and ``(count, dims)``
    otherwise.
    """
    qt = np.asarray(_as_tuple(q))
    if qt.size != pmf.dims or np.any((qt < 0) | (qt > pmf.n)):
        raise ValueError(f'query value {q} outside [0..{pmf.n}]^{pmf.dims}')
    eta = np.stack(
        np.unravel_index(sample_noise(pmf, count, rng_seed), pmf.shape), axis=-1
    )
    out = (eta + qt) % pmf.modulus
    return out[:, 0] if pmf.dims == 1 else out


def bd_cover(nbhd: NeighborhoodSpec) -> int:
    """Bound of the smallest BD neighbourhood containing ``nbhd``."""
    return max(nbhd.offsets)


# CSV interchange ------------------------------------------------------------


def write_pmf_csv(pmf: NoisePmf, path_or_file) -> None:
    header = (
        ['eta'] if pmf.dims == 1 else [f'eta{i + 1}' for i in range(pmf.dims)]
    ) + ['mass']
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, 'w', newline='') if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for idx, eta in enumerate(
            itertools.product(range(pmf.modulus), repeat=pmf.dims)
        ):
            writer.writerow([*eta, f'{pmf.masses[idx]:.17g}'])
    finally:
        if own:
            fh.close()


def read_pmf_csv(path, sum_tol: float = 1e-6) -> NoisePmf:
    """Reads an ``eta,mass`` (or ``eta1,...,mass``) file.

    Masses summing to one within ``sum_tol`` are renormalised when needed.
    """
    with open(path, newline='') as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError('empty PMF file')
    header = [h.strip() for h in rows[0]]
    if (
        header[-1] != 'mass'
        or not header[:-1]
        or not all(h.startswith('eta') for h in header[:-1])
    ):
        raise ValueError(f'unexpected PMF header {header}')
    dims = len(header) - 1
    entries = {}
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dims + 1:
            raise ValueError(f'line {line_no}: expected {dims + 1} fields')
        try:
            eta = tuple(int(v) for v in row[:dims])
            entries[eta] = float(row[dims])
        except ValueError as err:
            raise ValueError(f'line {line_no}: {err}') from None
    n = max(max(e) for e in entries)
    grid = np.zeros((n + 1,) * dims)
    for eta, mass in entries.items():
        if min(eta) < 0:
            raise ValueError(f'negative noise index {eta}')
        grid[eta] = mass
    total = math.fsum(grid.ravel())
    if abs(total - 1.0) > sum_tol:
        raise ValueError(f'masses sum to {total!r}')
    # Leave exact files untouched so that write/read round-trips bit for bit.
    if abs(total - 1.0) > MASS_SUM_TOL:
        grid = grid / total
    return NoisePmf.from_array(grid)
