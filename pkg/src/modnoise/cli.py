"""Command-line front end.

Subcommands write CSV tables (or JSON for ``eval`` and ``dataset``) and a
summary JSON. Exit codes: 0 success, 1 verification mismatch, 2 infeasible
instance, 3 closed form unsupported, 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import contextlib
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from modnoise import closedform as cf
from modnoise.core import (
    NeighborhoodSpec,
    NoisePmf,
    error_rate,
    mean_squared_error,
    privacy_profile,
    read_pmf_csv,
    write_pmf_csv,
)
from modnoise.mechanisms import (
    CalibrationError,
    InfiniteNoiseSpec,
    compare_tradeoffs,
    write_comparison_csv,
)
from modnoise.solver import (
    InfeasibleError,
    IterationLimitError,
    solve_min_delta,
    solve_min_error,
)

log = logging.getLogger('modnoise')

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INFEASIBLE = 2
EXIT_UNSUPPORTED = 3
EXIT_IO = 4

GRID_TOL = 1e-12
VERIFY_TOL = 1e-6
SLOPE_TOL = 1e-4
CLOSED, MILP, AUTO = 'closed', 'milp', 'auto'


class UsageError(ValueError):
    """Bad command-line input; reported with exit code 4."""


# ---------------------------------------------------------------- parsing


def parse_grid(text: str) -> List[float]:
    """``start:stop:step`` (stop kept when on the lattice), a list or a value."""
    text = text.strip()
    if ':' in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise UsageError(f'grid {text!r} is not start:stop:step')
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise UsageError('grid step must be positive')
        count = math.floor((stop - start) / step + GRID_TOL / step) + 1
        if count < 1:
            raise UsageError(f'grid {text!r} is empty')
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise UsageError(f'cannot parse grid {text!r}') from None


def parse_offsets(text: str) -> List[Tuple[int, ...]]:
    """``1,2,3`` for scalar offsets or ``0,1;1,0;1,1`` for vectors."""
    try:
        if ';' in text:
            return [tuple(int(c) for c in item.split(',')) for item in text.split(';')]
        return [(int(v),) for v in text.split(',') if v.strip()]
    except ValueError:
        raise UsageError(f'cannot parse offsets {text!r}') from None


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Resolved problem description shared by the subcommands."""

    n: int
    nbhd: NeighborhoodSpec
    mode: str
    dims: int = 1
    method: str = AUTO
    objective: str = 'er'

    @property
    def mu(self) -> int:
        return self.nbhd.param

    def closed_form_kind(self) -> Optional[str]:
        """``'sd'``/``'bd'`` when a closed form can apply, else None."""
        if self.objective == 'er' and self.mode in ('sd', 'bd'):
            return self.mode
        return None


def config_from_args(args) -> RunConfig:
    mode = args.mode
    n = args.n
    dims = getattr(args, 'dims', 1) or 1
    if args.nbhd_file:
        try:
            data = json.loads(Path(args.nbhd_file).read_text())
            offsets = [int(o) for o in data['offsets']]
            n = n if n is not None else int(data['n'])
        except (OSError, KeyError, TypeError, ValueError) as err:
            raise UsageError(f'cannot read neighbourhood file: {err}') from None
        if mode is None:
            mode = 'arbitrary'
        if mode != 'arbitrary':
            raise UsageError('--nbhd-file implies --mode arbitrary')
        if not offsets:
            raise UsageError('neighbourhood file lists no offsets')
        nbhd = NeighborhoodSpec.arbitrary(offsets)
    elif mode in ('sd', 'bd'):
        if args.mu is None:
            raise UsageError(f'--mode {mode} needs --mu')
        nbhd = (
            NeighborhoodSpec.single_distance(args.mu)
            if mode == 'sd'
            else NeighborhoodSpec.bounded_difference(args.mu)
        )
    elif mode in ('arbitrary', 'vector'):
        if not args.offsets:
            raise UsageError(f'--mode {mode} needs --offsets')
        offs = parse_offsets(args.offsets)
        if mode == 'arbitrary':
            if any(len(o) != 1 for o in offs):
                raise UsageError('arbitrary offsets are scalars')
            nbhd = NeighborhoodSpec.arbitrary(o[0] for o in offs)
        else:
            nbhd = NeighborhoodSpec.vector(offs)
            dims = nbhd.dims
    else:
        raise UsageError('choose --mode or --nbhd-file')
    if n is None or n < 1:
        raise UsageError('--n must be a positive integer')
    nbhd.validate(n)
    objective = getattr(args, 'objective', 'er')
    if objective == 'mse' and dims != 1:
        raise UsageError('MSE is defined for scalar queries only')
    return RunConfig(n, nbhd, mode, dims, getattr(args, 'method', AUTO), objective)


# ---------------------------------------------------------------- solving


@dataclasses.dataclass(frozen=True)
class PmfResult:
    pmf: NoisePmf
    method: str
    region: Optional[str] = None
    flags: Tuple[str, ...] = ()


def _closed_region(cfg: RunConfig, eps: float, delta: float) -> str:
    if cfg.mode == 'sd':
        return cf.region_label(cf.sd_region_boundaries(cfg.n, eps, cfg.mu), delta)
    if cf.bd_closed_form_supported(cfg.n, cfg.mu):
        return cf.region_label(cf.bd_region_boundaries(cfg.n, cfg.mu, eps), delta)
    return 'flat:zero' if delta == 0 else 'flat:final'


def closed_pmf(cfg: RunConfig, eps: float, delta: float) -> PmfResult:
    """Closed-form optimum; raises ClosedFormUnsupported or InfeasibleError."""
    kind = cfg.closed_form_kind()
    if kind is None:
        raise cf.ClosedFormUnsupported(
            f'no closed form for {cfg.nbhd.label()} with objective {cfg.objective}'
        )
    if kind == 'sd':
        pmf = cf.sd_pmf(cfg.n, cfg.mu, eps, delta)
    else:
        pmf = cf.bd_pmf(cfg.n, cfg.mu, eps, delta)
    if cf.closed_form_infeasible(pmf):
        raise InfeasibleError('optimal f(0) falls below 1/2')
    return PmfResult(pmf, CLOSED, _closed_region(cfg, eps, delta))


def milp_pmf(cfg: RunConfig, eps: float, delta: float) -> PmfResult:
    pmf, res = solve_min_error(
        cfg.n, cfg.nbhd, eps, delta, dims=cfg.dims, objective=cfg.objective
    )
    return PmfResult(pmf, MILP, flags=res.flags)


def optimal_pmf(cfg: RunConfig, eps: float, delta: float) -> PmfResult:
    if cfg.method == CLOSED:
        return closed_pmf(cfg, eps, delta)
    if cfg.method == AUTO:
        with contextlib.suppress(cf.ClosedFormUnsupported):
            return closed_pmf(cfg, eps, delta)
    return milp_pmf(cfg, eps, delta)


def accuracy(pmf: NoisePmf, objective: str) -> float:
    return error_rate(pmf) if objective == 'er' else mean_squared_error(pmf)


def pmf_summary(cfg: RunConfig, eps: float, delta: float, result: PmfResult) -> dict:
    pmf = result.pmf
    report = privacy_profile(pmf, eps, cfg.nbhd)
    out = {
        'n': cfg.n,
        'dims': cfg.dims,
        'neighborhood': cfg.nbhd.label(),
        'eps': eps,
        'delta': delta,
        'f0': float(pmf.masses[0]),
        'rho_er': error_rate(pmf),
        'rho_mse': mean_squared_error(pmf) if pmf.dims == 1 else None,
        'delta_actual': report.delta_actual,
        'method': result.method,
        'region': result.region,
        'flags': list(result.flags),
    }
    return out


def min_delta(cfg: RunConfig, eps: float, target: float) -> Tuple[float, str]:
    """Smallest delta meeting the accuracy target at ``eps``."""
    kind = cfg.closed_form_kind()
    use_closed = cfg.method == CLOSED or (cfg.method == AUTO and kind is not None)
    if use_closed:
        try:
            if kind is None:
                raise cf.ClosedFormUnsupported('no closed-form trade-off curve')
            curve = _curve(cfg, target)
            return curve.delta(eps), CLOSED
        except cf.ClosedFormUnsupported:
            if cfg.method == CLOSED:
                raise
    kwargs = {'max_error_rate': target} if cfg.objective == 'er' else {}
    if cfg.objective == 'mse':
        kwargs['max_mse'] = target
    delta, _, _ = solve_min_delta(cfg.n, cfg.nbhd, eps, dims=cfg.dims, **kwargs)
    return delta, MILP


def _curve(cfg: RunConfig, rho_star: float) -> cf.TradeoffCurve:
    if cfg.mode == 'sd':
        return cf.sd_tradeoff_curve(cfg.n, cfg.mu, rho_star)
    return cf.bd_tradeoff_curve(cfg.n, cfg.mu, rho_star)


def run_grid(fn: Callable, items: Sequence, jobs: int) -> list:
    """Maps ``fn`` over ``items``; results come back in input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- breakpoints


def detect_breakpoints(x: Sequence[float], y: Sequence[float]) -> List[float]:
    """Locates slope changes and jumps of a sampled piecewise-linear function.

    Consecutive intervals with matching slope form a piece; pieces spanning
    at least two intervals are extended as lines and neighbouring lines are
    intersected. An interval that straddles a breakpoint has a blended slope
    and is skipped. A jump, or an intersection outside the gap between two
    pieces, is reported at the middle of the gap.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return []
    slopes = np.diff(y) / np.diff(x)
    runs = [[0, 0]]
    for i in range(1, slopes.size):
        ref = slopes[runs[-1][0]]
        if abs(slopes[i] - ref) <= SLOPE_TOL * max(1.0, abs(ref)):
            runs[-1][1] = i
        else:
            runs.append([i, i])
    solid = [r for r in runs if r[1] > r[0]]
    points = []
    for a, b in zip(solid, solid[1:]):
        sa = np.mean(slopes[a[0] : a[1] + 1])
        sb = np.mean(slopes[b[0] : b[1] + 1])
        # Last point of piece a and first point of piece b.
        xa, ya = x[a[1] + 1], y[a[1] + 1]
        xb, yb = x[b[0]], y[b[0]]
        gap = abs(yb - (ya + sa * (xb - xa)))
        if abs(sa - sb) <= SLOPE_TOL * max(1.0, abs(sa)):
            if gap > SLOPE_TOL * (xb - xa) + GRID_TOL:
                points.append(float(0.5 * (xa + xb)))
            continue
        t = ((yb - sb * xb) - (ya - sa * xa)) / (sa - sb)
        if xa - GRID_TOL <= t <= xb + GRID_TOL:
            points.append(float(t))
        else:
            points.append(float(0.5 * (xa + xb)))
    return points


# ---------------------------------------------------------------- commands


@contextlib.contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == '-':
        yield sys.stdout
        return
    try:
        fh = open(path, 'w', newline='')
    except OSError as err:
        raise UsageError(f'cannot write {path}: {err}') from None
    with fh:
        yield fh


def _write_summary(args, summary: dict) -> None:
    text = json.dumps(summary, indent=2, sort_keys=True)
    if getattr(args, 'summary', None):
        try:
            Path(args.summary).write_text(text + '\n')
        except OSError as err:
            raise UsageError(f'cannot write {args.summary}: {err}') from None
    else:
        print(text, file=sys.stderr)


def cmd_pmf(args) -> int:
    cfg = config_from_args(args)
    result = optimal_pmf(cfg, args.eps, args.delta)
    with _open_out(args.out) as fh:
        write_pmf_csv(result.pmf, fh)
    _write_summary(args, pmf_summary(cfg, args.eps, args.delta, result))
    return EXIT_OK


def _sweep_point(task):
    cfg, eps, delta = task
    result = optimal_pmf(cfg, eps, delta)
    return accuracy(result.pmf, cfg.objective), float(result.pmf.masses[0]), result


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    deltas = parse_grid(args.delta_grid)
    results = run_grid(_sweep_point, [(cfg, args.eps, d) for d in deltas], args.jobs)
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['delta', 'rho', 'f0'])
        for d, (rho, f0, _) in zip(deltas, results):
            writer.writerow([f'{d:.12g}', f'{rho:.12g}', f'{f0:.12g}'])
    rhos = [r[0] for r in results]
    regions = [r[2].region for r in results]
    methods = sorted({r[2].method for r in results})
    changes = [
        deltas[i]
        for i in range(1, len(deltas))
        if regions[i] is not None and regions[i] != regions[i - 1]
    ]
    summary = {
        'n': cfg.n,
        'neighborhood': cfg.nbhd.label(),
        'eps': args.eps,
        'objective': cfg.objective,
        'methods': methods,
        'rows': len(deltas),
        'breakpoints': detect_breakpoints(deltas, rhos),
        'region_changes': changes,
    }
    _write_summary(args, summary)
    return EXIT_OK


def _curve_point(task):
    cfg, eps, target = task
    return min_delta(cfg, eps, target)


def _accuracy_target(args) -> Tuple[str, float]:
    given = [(k, v) for k, v in (('er', args.rho), ('mse', args.mse)) if v is not None]
    if len(given) != 1:
        raise UsageError('give exactly one of --rho and --mse')
    return given[0]


def cmd_curve(args) -> int:
    objective, target = _accuracy_target(args)
    args.objective = objective
    cfg = config_from_args(args)
    if objective == 'er' and not 0 < target < 0.5:
        raise UsageError('--rho must lie in (0, 0.5)')
    eps_grid = parse_grid(args.eps_grid)
    results = run_grid(_curve_point, [(cfg, e, target) for e in eps_grid], args.jobs)
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['eps', 'delta'])
        for e, (d, _) in zip(eps_grid, results):
            writer.writerow([f'{e:.12g}', f'{d:.17g}'])
    methods = sorted({m for _, m in results})
    summary = {
        'n': cfg.n,
        'neighborhood': cfg.nbhd.label(),
        'objective': objective,
        'target': target,
        'methods': methods,
    }
    if methods == [CLOSED]:
        curve = _curve(cfg, target)
        summary['breakpoints'] = [b for b in curve.breakpoints if math.isfinite(b)]
    else:
        deltas = [d for d, _ in results]
        summary['breakpoint_intervals'] = _jump_intervals(eps_grid, deltas)
    _write_summary(args, summary)
    return EXIT_OK


def _jump_intervals(eps: Sequence[float], deltas: Sequence[float]) -> List[list]:
    """Grid intervals where ``ln delta`` leaves a straight line."""
    out = []
    logd = [math.log(d) if d > 0 else -math.inf for d in deltas]
    for i in range(1, len(eps) - 1):
        a, b, c = logd[i - 1], logd[i], logd[i + 1]
        if not all(math.isfinite(v) for v in (a, b, c)):
            if (b == -math.inf) != (c == -math.inf):
                out.append([eps[i], eps[i + 1]])
            continue
        s1 = (b - a) / (eps[i] - eps[i - 1])
        s2 = (c - b) / (eps[i + 1] - eps[i])
        if abs(s1 - s2) > SLOPE_TOL * max(1.0, abs(s1)):
            out.append([eps[i], eps[i + 1]])
    return out


def cmd_compare(args) -> int:
    if args.mode not in (None, 'sd', 'bd', 'arbitrary') and not args.nbhd_file:
        raise UsageError('comparisons need a scalar neighbourhood')
    cfg = config_from_args(args)
    baselines = {}
    if args.alpha is not None:
        baselines['geometric'] = InfiniteNoiseSpec.geometric(args.alpha)
    if args.sigma2 is not None:
        baselines['gaussian'] = InfiniteNoiseSpec.gaussian(args.sigma2)
    mechanisms = args.mechanisms.split(',') if args.mechanisms else None
    if args.target is None:
        if mechanisms is None:
            mechanisms = [m for fam in baselines for m in (fam, f'{fam}_clamped')]
        if not mechanisms or any(
            m.replace('_clamped', '') not in baselines for m in mechanisms
        ):
            raise UsageError('--target is needed unless every baseline is fixed')
    rows = compare_tradeoffs(
        cfg.n,
        cfg.nbhd,
        args.metric,
        args.target if args.target is not None else 1.0,
        parse_grid(args.eps_grid),
        mechanisms=mechanisms,
        two_sided=args.two_sided,
        baselines=baselines,
    )
    with _open_out(args.out) as fh:
        write_comparison_csv(rows, fh)
    summary = {
        'n': cfg.n,
        'neighborhood': cfg.nbhd.label(),
        'metric': args.metric,
        'target': args.target,
        'two_sided': args.two_sided,
        'mechanisms': sorted({r.mechanism for r in rows}),
        'baselines': {k: v.label() for k, v in baselines.items()},
    }
    _write_summary(args, summary)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        pmf = read_pmf_csv(args.pmf)
    except OSError as err:
        raise UsageError(f'cannot read {args.pmf}: {err}') from None
    except ValueError as err:
        raise UsageError(f'malformed PMF file: {err}') from None
    if args.n is None:
        args.n = pmf.n
    if args.n != pmf.n:
        raise UsageError(f'file has n={pmf.n}, --n says {args.n}')
    cfg = config_from_args(args)
    report = privacy_profile(pmf, args.eps, cfg.nbhd)
    out = report.to_dict()
    out.update(
        eps=args.eps,
        neighborhood=cfg.nbhd.label(),
        rho_er=error_rate(pmf),
        rho_mse=mean_squared_error(pmf) if pmf.dims == 1 else None,
    )
    with _open_out(args.out) as fh:
        fh.write(json.dumps(out, indent=2, sort_keys=True) + '\n')
    return EXIT_OK


# ---------------------------------------------------------------- dataset


def read_records(path: str, column: Optional[str] = None) -> List[float]:
    """One numeric value per CSV row; a non-numeric first row is a header."""
    try:
        with open(path, newline='') as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as err:
        raise UsageError(f'cannot read {path}: {err}') from None
    if not rows:
        raise UsageError('dataset file is empty')

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    header = None
    if not all(numeric(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise UsageError('dataset file has no records')
    idx = 0
    if column is not None:
        if header is not None and column in header:
            idx = header.index(column)
        else:
            try:
                idx = int(column)
            except ValueError:
                raise UsageError(f'unknown column {column!r}') from None
    values = []
    for line_no, row in enumerate(rows, start=2 if header else 1):
        if idx >= len(row):
            raise UsageError(f'line {line_no}: missing column {idx}')
        try:
            v = float(row[idx])
        except ValueError:
            raise UsageError(
                f'line {line_no}: non-numeric value {row[idx]!r}'
            ) from None
        if not math.isfinite(v):
            raise UsageError(f'line {line_no}: non-finite value')
        values.append(v)
    return values


def _aggregate(values: Sequence[float], aggregation: str) -> float:
    total = math.fsum(values)
    return total if aggregation == 'sum' else total / len(values)


def dataset_neighborhood(
    values: Sequence[float], levels: int, aggregation: str = 'sum'
) -> Tuple[int, List[int]]:
    """Quantised answer offsets between the dataset and its leave-one-out copies.

    The aggregate is binned into ``levels`` uniform bins over
    ``[lowest possible aggregate, highest observed aggregate]`` with bins
    closed on the left (the top edge belongs to the last bin). Returns
    ``(n, offsets)`` with ``n = levels - 1`` and offsets
    ``(q - q') mod levels`` without zero, sorted.
    """
    if levels < 2:
        raise ValueError('need at least two levels')
    if aggregation not in ('sum', 'mean'):
        raise ValueError(f'unknown aggregation {aggregation!r}')
    values = list(values)
    if not values:
        raise ValueError('no records')
    if aggregation == 'mean' and len(values) < 2:
        raise ValueError('mean aggregation needs at least two records')
    full = _aggregate(values, aggregation)
    loo = [
        _aggregate(values[:i] + values[i + 1 :], aggregation)
        for i in range(len(values))
    ]
    if aggregation == 'sum':
        lo = math.fsum(min(v, 0.0) for v in values)
    else:
        lo = min(values)
    hi = max([full] + loo)
    width = (hi - lo) / levels

    def quantise(a):
        if width <= 0:
            return 0
        return min(int(math.floor((a - lo) / width)), levels - 1)

    q = quantise(full)
    offsets = sorted({(q - quantise(a)) % levels for a in loo} - {0})
    return levels - 1, offsets


def cmd_dataset(args) -> int:
    values = read_records(args.csv, args.column)
    try:
        n, offsets = dataset_neighborhood(values, args.levels, args.aggregation)
    except ValueError as err:
        raise UsageError(str(err)) from None
    if not offsets:
        log.warning('no record changes the quantised answer; offset set is empty')
    with _open_out(args.out) as fh:
        fh.write(json.dumps({'n': n, 'offsets': offsets}) + '\n')
    return EXIT_OK


# ---------------------------------------------------------------- verify


@dataclasses.dataclass(frozen=True)
class VerifyCase:
    kind: str
    n: int
    mu: int
    eps: float
    delta: float


def verify_case(case: VerifyCase, perturb: float = 0.0) -> dict:
    """Compares the closed-form error rate with the MILP optimum."""
    if case.kind == 'sd':
        nbhd = NeighborhoodSpec.single_distance(case.mu)
    else:
        nbhd = NeighborhoodSpec.bounded_difference(case.mu)
    cfg = RunConfig(case.n, nbhd, case.kind, method=CLOSED)
    out = dataclasses.asdict(case)
    try:
        closed = closed_pmf(cfg, case.eps, case.delta)
        rho_closed = error_rate(closed.pmf) + perturb
        leak = privacy_profile(closed.pmf, case.eps, nbhd).delta_actual
    except cf.ClosedFormUnsupported:
        out['status'] = 'skipped'
        return out
    except InfeasibleError:
        rho_closed, leak = None, 0.0
    try:
        pmf, _ = solve_min_error(case.n, nbhd, case.eps, case.delta)
        rho_milp = error_rate(pmf)
    except InfeasibleError:
        rho_milp = None
    if rho_closed is None or rho_milp is None:
        ok = rho_closed is None and rho_milp is None
    else:
        ok = abs(rho_closed - rho_milp) <= VERIFY_TOL
    ok = ok and leak <= case.delta + 1e-9
    out.update(rho_closed=rho_closed, rho_milp=rho_milp, leakage=leak)
    out['status'] = 'pass' if ok else 'fail'
    return out


def verify_grid(
    ns: Sequence[int],
    mus: Sequence[int],
    eps_grid: Sequence[float],
    delta_grid: Sequence[float],
    kinds: Sequence[str] = ('sd', 'bd'),
) -> List[VerifyCase]:
    cases = []
    for kind in kinds:
        for n in ns:
            for mu in mus:
                if mu > n:
                    continue
                for e in eps_grid:
                    for d in delta_grid:
                        cases.append(VerifyCase(kind, n, mu, e, d))
    return cases


def _verify_point(task):
    case, perturb = task
    return verify_case(case, perturb)


def run_verify(
    cases: Sequence[VerifyCase], perturb: float = 0.0, jobs: int = 1
) -> dict:
    results = run_grid(_verify_point, [(c, perturb) for c in cases], jobs)
    counts = {
        s: sum(r['status'] == s for r in results) for s in ('pass', 'fail', 'skipped')
    }
    return {
        'cases': len(results),
        **counts,
        'failures': [r for r in results if r['status'] == 'fail'],
    }


def _int_list(text: str) -> List[int]:
    grid = parse_grid(text)
    if any(v != int(v) for v in grid):
        raise UsageError(f'{text!r} is not an integer grid')
    return [int(v) for v in grid]


def cmd_verify(args) -> int:
    cases = verify_grid(
        _int_list(args.n_grid),
        _int_list(args.mu_grid),
        parse_grid(args.eps_grid),
        parse_grid(args.delta_grid),
        kinds=args.kinds.split(','),
    )
    report = run_verify(cases, args.perturb, args.jobs)
    with _open_out(args.out) as fh:
        fh.write(json.dumps(report, indent=2, sort_keys=True) + '\n')
    return EXIT_OK if report['fail'] == 0 else EXIT_MISMATCH


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f'{self.prog}: error: {message}\n')


def _add_nbhd(p, dims=True):
    p.add_argument('--n', type=int, help='largest query answer')
    p.add_argument('--mode', choices=['sd', 'bd', 'arbitrary', 'vector'])
    p.add_argument('--mu', type=int, help='single distance or bound')
    p.add_argument('--offsets', help="'1,2,3' or vectors '0,1;1,0;1,1'")
    p.add_argument('--nbhd-file', help='neighbourhood JSON from the dataset command')
    if dims:
        p.add_argument('--dims', type=int, default=1)


def _add_out(p, summary=True):
    p.add_argument('--out', help='output file (default stdout)')
    if summary:
        p.add_argument('--summary', help='summary JSON file (default stderr)')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='modnoise', description=__doc__.splitlines()[0])
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('pmf', help='optimal noise PMF')
    _add_nbhd(p)
    p.add_argument('--eps', type=float, required=True)
    p.add_argument('--delta', type=float, required=True)
    p.add_argument('--method', choices=[CLOSED, MILP, AUTO], default=AUTO)
    p.add_argument('--objective', choices=['er', 'mse'], default='er')
    _add_out(p)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser('sweep', help='accuracy versus delta at fixed eps')
    _add_nbhd(p)
    p.add_argument('--eps', type=float, required=True)
    p.add_argument('--delta-grid', required=True, help='start:stop:step')
    p.add_argument('--method', choices=[CLOSED, MILP, AUTO], default=AUTO)
    p.add_argument('--objective', choices=['er', 'mse'], default='er')
    p.add_argument('--jobs', type=int, default=1)
    _add_out(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('curve', help='minimum delta versus eps at fixed accuracy')
    _add_nbhd(p)
    p.add_argument('--eps-grid', required=True, help='start:stop:step')
    p.add_argument('--rho', type=float, help='error-rate target')
    p.add_argument('--mse', type=float, help='MSE target')
    p.add_argument('--method', choices=[CLOSED, MILP, AUTO], default=AUTO)
    p.add_argument('--jobs', type=int, default=1)
    _add_out(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser('compare', help='optimal noise against baselines')
    _add_nbhd(p, dims=False)
    p.add_argument('--metric', choices=['er', 'mse'], default='er')
    p.add_argument('--target', type=float, help='matched accuracy')
    p.add_argument('--eps-grid', required=True)
    p.add_argument('--mechanisms', help='comma-separated mechanism names')
    p.add_argument('--alpha', type=float, help='fixed geometric parameter')
    p.add_argument('--sigma2', type=float, help='fixed Gaussian variance')
    p.add_argument(
        '--two-sided', action='store_true', help='also check negated offsets'
    )
    _add_out(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('eval', help='leakage of a PMF file')
    _add_nbhd(p, dims=False)
    p.add_argument('--pmf', required=True)
    p.add_argument('--eps', type=float, required=True)
    _add_out(p, summary=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('dataset', help='neighbourhood offsets from a dataset')
    p.add_argument('--csv', required=True)
    p.add_argument('--levels', type=int, required=True)
    p.add_argument('--aggregation', choices=['sum', 'mean'], default='sum')
    p.add_argument('--column', help='column name or index (default first)')
    _add_out(p, summary=False)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser('verify', help='closed forms against the MILP')
    p.add_argument('--n-grid', default='4:9:1')
    p.add_argument('--mu-grid', default='1:3:1')
    p.add_argument('--eps-grid', default='0.5:2:0.5')
    p.add_argument('--delta-grid', default='0:0.2:0.05')
    p.add_argument('--kinds', default='sd,bd')
    p.add_argument('--perturb', type=float, default=0.0, help=argparse.SUPPRESS)
    p.add_argument('--jobs', type=int, default=1)
    _add_out(p, summary=False)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format='%(levelname)s: %(message)s',
    )
    try:
        return args.func(args)
    except InfeasibleError as err:
        log.error('infeasible: %s', err)
        return EXIT_INFEASIBLE
    except cf.ClosedFormUnsupported as err:
        log.error('closed form unsupported: %s', err)
        return EXIT_UNSUPPORTED
    except (CalibrationError, IterationLimitError) as err:
        # No mechanism meeting the request was found.
        log.error('%s', err)
        return EXIT_INFEASIBLE
    except UsageError as err:
        log.error('%s', err)
        return EXIT_IO
    except ValueError as err:
        log.error('%s', err)
        return EXIT_IO


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
