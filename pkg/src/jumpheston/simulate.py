"""Discretised trajectories of the variance/price pair.

All recursions evaluate coefficients at the left grid point.  Functions that
take increment arrays accept either a single path (shape ``(n,)``) or a batch
(shape ``(m, n)``) and step along the last axis; every operation is
elementwise, so a trajectory's values do not depend on the batch it is in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ParameterError, SchemeDomainError
from .model import JumpSpec, ModelParams


class SchemeKind(enum.Enum):
    DRIFT_IMPLICIT = "implicit"
    TRUNCATED_EULER = "truncated"
    SYMMETRIZED_EULER = "symmetrized"


@dataclass(frozen=True)
class SimGrid:
    """Uniform grid ``t_i = i*T/n``, ``i = 0..n``."""

    T: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"horizon must be > 0, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"step count must be a positive integer, got {self.n}")

    @classmethod
    def from_step(cls, T: float, dt: float) -> "SimGrid":
        n = round(T / dt)
        if n < 1 or not math.isclose(n * dt, T, rel_tol=1e-9):
            raise ParameterError(f"T={T} is not an integer multiple of dt={dt}")
        return cls(T, n)

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


class Jumps(NamedTuple):
    sums: np.ndarray  # per-step sum of log-jumps J
    dL: np.ndarray  # per-step sum of exp(J) - 1
    counts: np.ndarray
    sizes: Optional[np.ndarray] = None  # individual J in time order (debug mode)


@dataclass
class PathBundle:
    """One simulated trajectory.

    Prices are kept on the log scale: over long horizons with negative drift
    ``S`` underflows double precision while ``log S`` stays exact.
    """

    grid: SimGrid
    y: np.ndarray
    dW: np.ndarray
    dB: np.ndarray
    jump_sums: np.ndarray
    dL: np.ndarray
    s0: float = 1.0
    log_return: Optional[np.ndarray] = None  # log(S_i / s0), zero at i = 0
    jump_sizes: Optional[np.ndarray] = None
    jump_counts: Optional[np.ndarray] = None

    @property
    def log_s(self) -> Optional[np.ndarray]:
        return None if self.log_return is None else math.log(self.s0) + self.log_return

    @property
    def s(self) -> Optional[np.ndarray]:
        return None if self.log_return is None else self.s0 * np.exp(self.log_return)

    @property
    def L_T(self) -> float:
        return math.fsum(self.dL)


def wiener_increments(rng: np.random.Generator, grid: SimGrid, size=None) -> np.ndarray:
    """i.i.d. ``N(0, dt)`` increments; ``size`` prepends batch dimensions."""
    shape = (grid.n,) if size is None else (*np.atleast_1d(size), grid.n)
    return math.sqrt(grid.dt) * rng.standard_normal(shape)


def _check_implicit(params: ModelParams) -> None:
    if not params.theta * params.kappa > 0.25 * params.sigma**2:
        raise SchemeDomainError(
            "drift-implicit scheme needs theta*kappa > sigma**2/4 "
            f"(theta*kappa={params.theta * params.kappa}, sigma**2/4={0.25 * params.sigma**2})"
        )


def cir_step_implicit(y, dW, params: ModelParams, dt: float):
    """One drift-implicit step for the square root of ``Y``.

    Solves ``(1 + kappa dt/2) x**2 - (sqrt(y) + sigma dW/2) x - (kappa theta/2 - sigma**2/8) dt = 0``
    for its positive root ``x`` and returns ``x**2``.
    """
    _check_implicit(params)
    return _implicit(y, dW, params, dt)


def _implicit(y, dW, params, dt):
    k, s = params.kappa, params.sigma
    c = (1.0 + 0.5 * k * dt) * (2.0 * params.theta * k - 0.5 * s * s) * dt
    b = 0.5 * s * dW + np.sqrt(y)
    x = (b + np.sqrt(b * b + c)) / (2.0 + k * dt)
    return x * x


def _truncated(y, dW, params, dt):
    k = params.kappa
    return y + k * (params.theta - y) * dt + params.sigma * np.sqrt(np.maximum(y, 0.0)) * dW


def _symmetrized(y, dW, params, dt):
    k = params.kappa
    return np.abs(y + k * (params.theta - y) * dt + params.sigma * np.sqrt(y) * dW)


_STEPS = {
    SchemeKind.DRIFT_IMPLICIT: _implicit,
    SchemeKind.TRUNCATED_EULER: _truncated,
    SchemeKind.SYMMETRIZED_EULER: _symmetrized,
}


def simulate_cir(
    params: ModelParams,
    grid: SimGrid,
    dW: np.ndarray,
    scheme: SchemeKind = SchemeKind.DRIFT_IMPLICIT,
    y0=None,
) -> np.ndarray:
    """Variance path(s) on ``grid`` driven by the increments ``dW``.

    Returns an array with last axis of length ``n + 1`` and ``y[..., 0] = y0``.
    """
    scheme = SchemeKind(scheme)
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-1] != grid.n:
        raise ValueError(f"expected {grid.n} increments, got {dW.shape[-1]}")
    if scheme is SchemeKind.DRIFT_IMPLICIT:
        _check_implicit(params)
    step = _STEPS[scheme]
    dt = grid.dt
    y = np.empty(dW.shape[:-1] + (grid.n + 1,))
    y[..., 0] = params.y0 if y0 is None else y0
    # column-wise stepping over a C-ordered batch; transpose view keeps writes contiguous per step
    yt = np.moveaxis(y, -1, 0)
    wt = np.moveaxis(dW, -1, 0)
    cur = yt[0].copy()
    for i in range(grid.n):
        cur = step(cur, wt[i], params, dt)
        yt[i + 1] = cur
    return y


def simulate_jumps(
    rng: np.random.Generator, grid: SimGrid, jump: JumpSpec, keep_individual: bool = False
) -> Jumps:
    """Per-step compound Poisson aggregates.

    Step ``i`` receives ``Poisson(intensity*dt)`` jumps; ``sums[i]`` is the sum
    of their log-sizes ``J`` and ``dL[i]`` the sum of ``exp(J) - 1``.
    """
    n = grid.n
    if not jump.active:
        zeros = np.zeros(n)
        return Jumps(zeros, zeros.copy(), np.zeros(n, dtype=np.int64),
                     np.empty(0) if keep_individual else None)
    counts = rng.poisson(jump.intensity * grid.dt, n)
    sizes = np.asarray(jump.size_law.sample(rng, int(counts.sum())), dtype=float)
    owner = np.repeat(np.arange(n), counts)
    sums = np.bincount(owner, weights=sizes, minlength=n)
    dL = np.bincount(owner, weights=np.expm1(sizes), minlength=n)
    return Jumps(sums, dL, counts, sizes if keep_individual else None)


def log_price_increments(params: ModelParams, grid: SimGrid, y, dW, dB, jump_sums) -> np.ndarray:
    """``mu dt - Y_i dt/2 + sqrt(Y_i) (rho dW + sqrt(1-rho**2) dB) + sum J``, per step."""
    y = np.asarray(y, dtype=float)
    # truncated-Euler paths may dip below zero; the price sees Y+ like the variance step does
    yl = np.maximum(y[..., :-1], 0.0)
    r = params.rho
    dt = grid.dt
    noise = r * np.asarray(dW) + math.sqrt(1.0 - r * r) * np.asarray(dB)
    return params.mu * dt - 0.5 * dt * yl + np.sqrt(yl) * noise + np.asarray(jump_sums)


def cumulative_log_return(params: ModelParams, grid: SimGrid, y, dW, dB, jump_sums) -> np.ndarray:
    """``log(S_i / s0)`` for ``i = 0..n``."""
    inc = log_price_increments(params, grid, y, dW, dB, jump_sums)
    out = np.empty(inc.shape[:-1] + (grid.n + 1,))
    out[..., 0] = 0.0
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def simulate_log_price(params: ModelParams, grid: SimGrid, y, dW, dB, jump_sums) -> np.ndarray:
    return math.log(params.s0) + cumulative_log_return(params, grid, y, dW, dB, jump_sums)


def simulate_price(params: ModelParams, grid: SimGrid, y, dW, dB, jump_sums) -> np.ndarray:
    """Price path ``S_{i+1} = S_i exp(log-increment_i)`` with ``S_0 = s0``."""
    return params.s0 * np.exp(cumulative_log_return(params, grid, y, dW, dB, jump_sums))


def simulate_path(
    params: ModelParams,
    grid: SimGrid,
    rng: np.random.Generator,
    scheme: SchemeKind = SchemeKind.DRIFT_IMPLICIT,
    with_price: bool = True,
    keep_jumps: bool = False,
) -> PathBundle:
    """Draw one full trajectory.

    Draw order is fixed (``dW``, ``dB``, jump counts, jump sizes) so the
    bundle is a pure function of the generator state.
    """
    dW = wiener_increments(rng, grid)
    dB = wiener_increments(rng, grid)
    jumps = simulate_jumps(rng, grid, params.jump, keep_individual=keep_jumps)
    y = simulate_cir(params, grid, dW, scheme)
    log_ret = cumulative_log_return(params, grid, y, dW, dB, jumps.sums) if with_price else None
    return PathBundle(
        grid=grid, y=y, dW=dW, dB=dB, jump_sums=jumps.sums, dL=jumps.dL, s0=params.s0, log_return=log_ret,
        jump_sizes=jumps.sizes, jump_counts=jumps.counts if keep_jumps else None,
    )


def exact_cir_terminal(params: ModelParams, T: float, rng: np.random.Generator, size=None, y0=None):
    """Exact draw(s) of ``Y_T`` from the scaled noncentral chi-squared law."""
    k, s = params.kappa, params.sigma
    start = params.y0 if y0 is None else y0
    c = s * s * (-math.expm1(-k * T)) / (4.0 * k)
    df = 4.0 * k * params.theta / (s * s)
    nc = start * math.exp(-k * T) / c
    return c * rng.noncentral_chisquare(df, nc, size)
