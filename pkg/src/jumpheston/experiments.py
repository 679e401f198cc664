"""Monte Carlo campaigns: simulate, reduce, estimate and compare with limit laws.

Trajectory ``k`` of a campaign draws from ``substream(master_seed, k)`` and is
simulated inside a fixed-size block, so every per-trajectory record depends
only on ``(config, k)``.  Summaries are reduced in index order.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from . import rng as rng_mod
from .errors import DegenerateStats, NonpositivePath, RegimeError, SingularSecondCoordinate
from .estimator import MleEstimate, Route, mle, scaled_errors
from .model import ModelParams, Regime, sample_limit_mu_critical, sample_tau
from .simulate import SchemeKind, SimGrid, simulate_cir, simulate_jumps, cumulative_log_return, wiener_increments
from .statistics import I3Variant, I45Variant, SuffStats, integrals_core, integrals_price, integrals_wiener

MAX_FAILURE_RATE = 1e-3
RECORD_HEADER = ["index", "theta_hat", "kappa_hat", "mu_hat", "e1", "e2", "e3", "r1", "r2", "r3", "status"]
HISTOGRAM_HEADER = ["bin_left", "bin_right", "density", "reference_density"]


@dataclass(frozen=True)
class KsThresholds:
    """Pass limits for the limit-law checks; loose enough to absorb ``dt > 0`` bias."""

    normal: float = 0.10
    centered: float = 0.12
    mixed: float = 0.10
    hitting_time: float = 0.10
    covariance: float = 0.15


@dataclass(frozen=True)
class CampaignConfig:
    params: ModelParams
    grid: SimGrid
    M: int = 1000
    master_seed: int = 0
    regime: Optional[Regime] = None
    scheme: SchemeKind = SchemeKind.DRIFT_IMPLICIT
    i3_variant: I3Variant = I3Variant.INCREMENT
    i45_variant: I45Variant = I45Variant.WIENER
    route: Route = Route.MATRIX
    block_size: int = 64
    workers: int = 1
    reference_draws: int = 100_000
    thresholds: KsThresholds = field(default_factory=KsThresholds)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        for name, kind in (("regime", Regime), ("scheme", SchemeKind), ("i3_variant", I3Variant),
                           ("i45_variant", I45Variant), ("route", Route)):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, kind(value))
        if self.effective_regime is Regime.INVALID:
            raise RegimeError("theta*kappa < sigma**2/2 is outside the estimator's scope")
        p = self.params
        if self.scheme is SchemeKind.DRIFT_IMPLICIT and not p.theta * p.kappa > 0.25 * p.sigma**2:
            raise ValueError("drift-implicit scheme needs theta*kappa > sigma**2/4")

    @property
    def effective_regime(self) -> Regime:
        return self.regime if self.regime is not None else self.params.regime()

    def with_horizon(self, T: float) -> "CampaignConfig":
        """Same step size, new horizon."""
        from dataclasses import replace

        return replace(self, grid=SimGrid.from_step(T, self.grid.dt))


@dataclass(frozen=True)
class TrajectoryRecord:
    index: int
    status: str  # ok | outside | degenerate | singular | nonpositive
    stats: Optional[SuffStats] = None
    estimate: Optional[MleEstimate] = None
    errors: Optional[np.ndarray] = None
    random_scaled: Optional[np.ndarray] = None

    @property
    def failed(self) -> bool:
        return self.estimate is None


# --------------------------------------------------------------------------
# per-trajectory pipeline
# --------------------------------------------------------------------------


def _estimate_one(config: CampaignConfig, index: int, y, dW, dB, dL, log_s) -> TrajectoryRecord:
    p, grid = config.params, config.grid
    try:
        core = integrals_core(y, grid, p.sigma)
        if config.i45_variant is I45Variant.WIENER:
            i4, i5 = integrals_wiener(p, grid, y, dW, dB, i2=core.i2)
        else:
            i4, i5 = integrals_price(grid, y, dL, log_s=log_s)
    except NonpositivePath:
        return TrajectoryRecord(index, "nonpositive")
    stats = SuffStats(
        T=grid.T, y0=float(y[0]), y_terminal=core.y_terminal, i1=core.i1, i2=core.i2,
        i3=core.i3 if config.i3_variant is I3Variant.INCREMENT else core.i3_tilde,
        i4=i4, i5=i5, i3_variant=config.i3_variant, i45_variant=config.i45_variant,
        i3_increment=core.i3, i3_tilde=core.i3_tilde,
    )
    try:
        est = mle(stats, p.sigma, p.rho, config.route)
    except DegenerateStats:
        return TrajectoryRecord(index, "degenerate", stats)
    except SingularSecondCoordinate:
        return TrajectoryRecord(index, "singular", stats)
    errs = scaled_errors(est, p.psi, stats, config.effective_regime)
    status = "ok" if est.in_parameter_set else "outside"
    return TrajectoryRecord(index, status, stats, est, errs.deterministic, errs.random_scaled)


def run_block(config: CampaignConfig, indices: Sequence[int]) -> list[TrajectoryRecord]:
    """Simulate and estimate a batch of trajectories.

    Each trajectory's random inputs come from its own substream in the order
    ``dW``, ``dB``, jumps, which matches :func:`jumpheston.simulate.simulate_path`.
    """
    p, grid = config.params, config.grid
    m = len(indices)
    dW = np.empty((m, grid.n))
    dB = np.empty((m, grid.n))
    sums = np.empty((m, grid.n))
    dL = np.empty((m, grid.n))
    for row, k in enumerate(indices):
        g = rng_mod.substream(config.master_seed, k, purpose=rng_mod.PATHS)
        dW[row] = wiener_increments(g, grid)
        dB[row] = wiener_increments(g, grid)
        jumps = simulate_jumps(g, grid, p.jump)
        sums[row], dL[row] = jumps.sums, jumps.dL
    y = simulate_cir(p, grid, dW, config.scheme)
    need_price = config.i45_variant is I45Variant.PRICE
    log_s = None
    if need_price:
        with np.errstate(invalid="ignore"):
            log_s = cumulative_log_return(p, grid, y, dW, dB, sums)
    return [
        _estimate_one(config, k, y[row], dW[row], dB[row], dL[row],
                      None if log_s is None else log_s[row])
        for row, k in enumerate(indices)
    ]


def run_trajectory(config: CampaignConfig, index: int) -> TrajectoryRecord:
    """Full pipeline for trajectory ``index``; failures are recorded, not raised."""
    return run_block(config, [index])[0]


# --------------------------------------------------------------------------
# ensembles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleResult:
    config: CampaignConfig
    records: tuple
    mean_relative_error: np.ndarray
    ks: dict
    failures: dict

    @property
    def ok_records(self) -> list[TrajectoryRecord]:
        return [r for r in self.records if not r.failed]

    @property
    def n_failed(self) -> int:
        return sum(self.failures.values())

    @property
    def failure_rate(self) -> float:
        return self.n_failed / len(self.records)

    @property
    def failure_rate_exceeded(self) -> bool:
        return self.failure_rate > MAX_FAILURE_RATE

    def psi_hat(self) -> np.ndarray:
        return np.array([r.estimate.psi_hat for r in self.ok_records]).reshape(-1, 3)

    def errors(self) -> np.ndarray:
        return np.array([r.errors for r in self.ok_records]).reshape(-1, 3)

    def random_scaled(self) -> np.ndarray:
        return np.array([r.random_scaled for r in self.ok_records]).reshape(-1, 3)

    def i2_over_T2(self) -> np.ndarray:
        return np.array([r.stats.i2 for r in self.records if r.stats is not None]) / self.config.grid.T**2


def _blocks(M: int, size: int) -> list[list[int]]:
    return [list(range(a, min(a + size, M))) for a in range(0, M, size)]


def _run_block_args(args):
    return run_block(*args)


def simulate_records(config: CampaignConfig) -> list[TrajectoryRecord]:
    blocks = _blocks(config.M, config.block_size)
    if config.workers == 1 or len(blocks) == 1:
        chunks = [run_block(config, b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            # map preserves submission order, so aggregation never sees completion order
            chunks = list(pool.map(_run_block_args, [(config, b) for b in blocks]))
    return [r for chunk in chunks for r in chunk]


def _mean_relative_error(config: CampaignConfig, records: Iterable[TrajectoryRecord]) -> np.ndarray:
    truth = np.asarray(config.params.psi, dtype=float)
    est = np.array([r.estimate.psi_hat for r in records if not r.failed]).reshape(-1, 3)
    if not est.size:
        return np.full(3, math.nan)
    out = np.full(3, math.nan)  # relative error is undefined for a zero true value
    for j in np.flatnonzero(truth):
        rel = (est[:, j] - truth[j]) / truth[j]
        out[j] = math.fsum(rel.tolist()) / len(rel)
    return out


def reference_sample(config: CampaignConfig, size: Optional[int] = None) -> np.ndarray:
    """Draws of the critical-case limit of ``T (mu_hat - mu)`` from a dedicated substream."""
    g = rng_mod.substream(config.master_seed, 0, purpose=rng_mod.REFERENCE)
    n = config.reference_draws if size is None else size
    return sample_limit_mu_critical(config.params, g, n, regime=Regime.CRITICAL)


def tau_reference_sample(config: CampaignConfig, size: Optional[int] = None) -> np.ndarray:
    """Draws of ``(kappa/sigma)**2 tau``, the limit law of ``i2 / T**2`` at criticality."""
    g = rng_mod.substream(config.master_seed, 1, purpose=rng_mod.REFERENCE)
    n = config.reference_draws if size is None else size
    p = config.params
    return (p.kappa / p.sigma) ** 2 * sample_tau(g, n)


def _ks_table(config: CampaignConfig, records: list[TrajectoryRecord]) -> dict:
    ok = [r for r in records if not r.failed]
    if len(ok) < 2:
        return {}
    e = np.array([r.errors for r in ok])
    rs = np.array([r.random_scaled for r in ok])
    out = {}
    if config.effective_regime is Regime.SUBCRITICAL:
        for j in range(3):
            out[f"e{j + 1}"] = ks_one_sample(e[:, j], ndtr)
            out[f"r{j + 1}"] = ks_one_sample(rs[:, j], ndtr)
    else:
        out["e1"] = ks_one_sample(e[:, 0], ndtr)
        out["e2"] = ks_one_sample(e[:, 1], ndtr)
        out["e2_centered"] = ks_one_sample(e[:, 1] - e[:, 1].mean(), ndtr)
        out["e3"] = ks_two_sample(e[:, 2], reference_sample(config))
        out["r1"] = ks_one_sample(rs[:, 0], ndtr)
        out["r2"] = ks_one_sample(rs[:, 1], ndtr)
        p = config.params
        out["r3"] = ks_two_sample(rs[:, 2], reference_sample(config) * (p.kappa / p.sigma))
        i2 = np.array([r.stats.i2 for r in records if r.stats is not None]) / config.grid.T**2
        out["i2_over_T2"] = ks_two_sample(i2, tau_reference_sample(config))
    return out


def summarize(config: CampaignConfig, records: Sequence[TrajectoryRecord]) -> EnsembleResult:
    records = sorted(records, key=lambda r: r.index)
    failures = {}
    for r in records:
        if r.failed:
            failures[r.status] = failures.get(r.status, 0) + 1
    return EnsembleResult(
        config=config,
        records=tuple(records),
        mean_relative_error=_mean_relative_error(config, records),
        ks=_ks_table(config, records),
        failures=failures,
    )


def monte_carlo(config: CampaignConfig) -> EnsembleResult:
    """Run ``config.M`` trajectories and reduce them to an :class:`EnsembleResult`."""
    return summarize(config, simulate_records(config))


def sweep(config: CampaignConfig, horizons: Sequence[float]) -> dict:
    """One campaign per horizon at the configured step size, keyed by ``T``."""
    return {float(T): monte_carlo(config.with_horizon(T)) for T in horizons}


# --------------------------------------------------------------------------
# goodness of fit
# --------------------------------------------------------------------------


def ks_one_sample(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    """Sup distance between the empirical CDFs of ``a`` and ``b``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass(frozen=True)
class CheckLine:
    name: str
    statistic: float
    threshold: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.statistic < self.threshold)

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tail = f"  ({self.note})" if self.note else ""
        return f"{verdict} {self.name}: {self.statistic:.4f} < {self.threshold:.2f}{tail}"


def limit_checks(result: EnsembleResult, reference: str = "mixed-normal") -> list[CheckLine]:
    """Compare the scaled errors of a campaign with their limit laws.

    ``reference`` picks the law for the critical ``e3``: ``mixed-normal`` uses
    the hitting-time mixture, ``normal`` a plain ``N(0, 1)`` for contrast.
    """
    th = result.config.thresholds
    ks = result.ks
    out = []
    if result.config.effective_regime is Regime.SUBCRITICAL:
        for j in (1, 2, 3):
            out.append(CheckLine(f"e{j}", ks[f"e{j}"], th.normal, "vs N(0,1)"))
        for j in (1, 2, 3):
            out.append(CheckLine(f"r{j}", ks[f"r{j}"], th.normal, "vs N(0,1)"))
        cov = np.cov(result.random_scaled(), rowvar=False)
        out.append(CheckLine("cov(r)", float(np.max(np.abs(cov - np.eye(3)))), th.covariance,
                             "max entrywise distance to identity"))
    else:
        out.append(CheckLine("e1", ks["e1"], th.normal, "vs N(0,1)"))
        e2 = result.errors()[:, 1]
        out.append(CheckLine("e2", ks["e2_centered"], th.centered,
                             f"mean-centered; raw mean bias {e2.mean():+.3f}, raw KS {ks['e2']:.3f}"))
        if reference == "mixed-normal":
            out.append(CheckLine("e3", ks["e3"], th.mixed, "vs hitting-time mixed normal"))
        elif reference == "normal":
            out.append(CheckLine("e3", ks_one_sample(result.errors()[:, 2], ndtr), th.mixed,
                                 "vs N(0,1), contrast only"))
        else:
            raise ValueError(f"unknown reference {reference!r}")
        out.append(CheckLine("i2/T^2", ks["i2_over_T2"], th.hitting_time, "vs (kappa/sigma)^2 tau"))
    return out


# --------------------------------------------------------------------------
# tabular output
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramTable:
    bin_left: np.ndarray
    bin_right: np.ndarray
    density: np.ndarray
    reference_density: Optional[np.ndarray] = None

    def rows(self):
        ref = self.reference_density
        for j in range(self.density.size):
            yield (self.bin_left[j], self.bin_right[j], self.density[j],
                   math.nan if ref is None else ref[j])


def histogram_export(samples, bins: int, overlay: Optional[Callable] = None, range=None) -> HistogramTable:
    """Density-normalised histogram, with ``overlay`` evaluated at bin centres."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    x = np.asarray(samples, dtype=float).ravel()
    counts, edges = np.histogram(x, bins=bins, range=range)
    width = np.diff(edges)
    total = counts.sum()
    density = counts / (total * width) if total else np.zeros(bins)
    centres = 0.5 * (edges[:-1] + edges[1:])
    ref = None if overlay is None else np.asarray(overlay(centres), dtype=float)
    return HistogramTable(edges[:-1], edges[1:], density, ref)


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def write_records_csv(path, records: Iterable[TrajectoryRecord]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for r in records:
            psi = r.estimate.psi_hat if r.estimate is not None else (None,) * 3
            e = r.errors if r.errors is not None else (None,) * 3
            rs = r.random_scaled if r.random_scaled is not None else (None,) * 3
            w.writerow([r.index, *map(_fmt, psi), *map(_fmt, e), *map(_fmt, rs), r.status])
    return path


def _horizon_label(T: float) -> str:
    return f"T{T:g}"


def summary_rows(results: dict) -> tuple[list[str], list[list[str]]]:
    """Rows of the per-horizon summary table; ``results`` maps ``T`` to an ensemble."""
    horizons = list(results)
    header = ["quantity"] + [_horizon_label(T) for T in horizons]
    names = ["relative_error_theta", "relative_error_kappa", "relative_error_mu"]
    rows = [[name] + [_fmt(results[T].mean_relative_error[j]) for T in horizons] for j, name in enumerate(names)]
    keys = []
    for res in results.values():
        keys += [k for k in res.ks if k not in keys]
    for k in keys:
        rows.append([f"ks_{k}"] + [_fmt(results[T].ks.get(k)) for T in horizons])
    rows.append(["trajectories"] + [str(len(results[T].records)) for T in horizons])
    rows.append(["failures"] + [str(results[T].n_failed) for T in horizons])
    return header, rows


def write_summary_csv(path, results: dict) -> Path:
    path = Path(path)
    header, rows = summary_rows(results)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_histogram_csv(path, table: HistogramTable) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_HEADER)
        for row in table.rows():
            w.writerow([_fmt(v) for v in row])
    return path


def standard_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def write_histograms(out_dir, result: EnsembleResult, bins: int = 40) -> list[Path]:
    """One histogram file per scaled coordinate; ``N(0,1)`` overlay where that is the limit."""
    out_dir = Path(out_dir)
    critical = result.config.effective_regime is Regime.CRITICAL
    paths = []
    for name, data in (("e", result.errors()), ("r", result.random_scaled())):
        for j in range(3):
            normal_limit = not (critical and j == 2)
            table = histogram_export(data[:, j], bins, standard_normal_pdf if normal_limit else None)
            paths.append(write_histogram_csv(out_dir / f"hist_{name}{j + 1}.csv", table))
    return paths
