"""Reduce a trajectory to the path functionals entering the likelihood.

With left-point evaluation on the grid ``t_i = i*dt``:

* ``i1 = dt * sum Y_i``                       approximates  int Y du
* ``i2 = dt * sum 1/Y_i``                     approximates  int du / Y
* ``i3 = sum (Y_{i+1} - Y_i) / Y_i``          approximates  int dY / Y
* ``i3_tilde = log(Y_n / y0) + sigma**2/2 * i2``  (Ito form of the same integral)
* ``i4``, ``i5``  approximate ``int (dS - S_- dL)/S_-`` and ``int (dS - S_- dL)/(Y S_-)``,
  either from the driving Wiener increments or from the simulated price.

Every sum is taken with :func:`math.fsum`, which is exactly rounded and hence
independent of summation order, chunking, or thread count.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import NonpositivePath
from .model import ModelParams
from .simulate import PathBundle, SimGrid


class I3Variant(enum.Enum):
    INCREMENT = "i3"
    ITO_LOG = "i3-tilde"


class I45Variant(enum.Enum):
    WIENER = "wiener"
    PRICE = "price"


@dataclass(frozen=True)
class SuffStats:
    """Sufficient statistics of one trajectory on ``[0, T]``.

    ``i3``, ``i4`` and ``i5`` hold the variants selected by the flags; the
    alternative constructions are kept alongside when they were computed.
    """

    T: float
    y0: float
    y_terminal: float
    i1: float
    i2: float
    i3: float
    i4: float
    i5: float
    i3_variant: I3Variant = I3Variant.INCREMENT
    i45_variant: I45Variant = I45Variant.WIENER
    i3_increment: float = math.nan
    i3_tilde: float = math.nan

    @property
    def dY(self) -> float:
        """``int_0^T dY = Y_T - y0``."""
        return self.y_terminal - self.y0

    @property
    def cs_gap(self) -> float:
        """``i1*i2 - T**2``; strictly positive for non-constant paths."""
        return self.i1 * self.i2 - self.T * self.T

    def with_i3(self, variant: I3Variant) -> "SuffStats":
        variant = I3Variant(variant)
        value = self.i3_increment if variant is I3Variant.INCREMENT else self.i3_tilde
        if math.isnan(value):
            raise ValueError(f"{variant.value} was not computed for these statistics")
        return replace(self, i3=value, i3_variant=variant)


class CoreIntegrals(NamedTuple):
    i1: float
    i2: float
    i3: float
    i3_tilde: float
    y_terminal: float


def _fsum(a) -> float:
    return math.fsum(np.asarray(a, dtype=float).tolist())


def _check_positive(name: str, a: np.ndarray) -> None:
    if not np.all(a > 0):
        bad = int(np.argmin(a > 0))
        raise NonpositivePath(f"{name}[{bad}] = {a[bad]!r} is not strictly positive")


def integrals_core(y, grid: SimGrid, sigma: float) -> CoreIntegrals:
    """``i1``, ``i2``, ``i3``, ``i3_tilde`` and ``Y_T`` of a variance path.

    ``sigma`` is needed only for the Ito-corrected ``i3_tilde``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != grid.n + 1:
        raise ValueError(f"expected a 1-d path of length {grid.n + 1}")
    _check_positive("y", y)
    dt = grid.dt
    left = y[:-1]
    i1 = dt * _fsum(left)
    i2 = dt * _fsum(1.0 / left)
    i3 = _fsum(np.diff(y) / left)
    i3_tilde = math.log(y[-1]) - math.log(y[0]) + 0.5 * sigma * sigma * i2
    return CoreIntegrals(i1, i2, i3, i3_tilde, float(y[-1]))


def integrals_wiener(params: ModelParams, grid: SimGrid, y, dW, dB, i2=None) -> tuple[float, float]:
    """``i4``, ``i5`` from the driving Brownian increments.

    ``i4 = mu T + sum sqrt(Y_i) xi_i`` and ``i5 = mu i2 + sum xi_i / sqrt(Y_i)``
    with ``xi_i = rho dW_i + sqrt(1 - rho**2) dB_i``.
    """
    y = np.asarray(y, dtype=float)
    _check_positive("y", y)
    left = y[:-1]
    r = params.rho
    xi = r * np.asarray(dW, dtype=float) + math.sqrt(1.0 - r * r) * np.asarray(dB, dtype=float)
    root = np.sqrt(left)
    if i2 is None:
        i2 = grid.dt * _fsum(1.0 / left)
    i4 = params.mu * grid.T + _fsum(root * xi)
    i5 = params.mu * i2 + _fsum(xi / root)
    return i4, i5


def integrals_price(grid: SimGrid, y, dL, *, s=None, log_s=None) -> tuple[float, float]:
    """``i4_tilde``, ``i5_tilde`` from the simulated price and the Levy increments.

    ``i4_tilde = sum (S_{i+1}-S_i)/S_i - L_T`` and
    ``i5_tilde = sum (S_{i+1}-S_i)/(Y_i S_i) - sum dL_i / Y_i``.
    Either ``s`` or ``log_s`` may be given; the log form avoids underflow and
    may be offset by any constant, e.g. ``log(S_i / s0)``.
    """
    y = np.asarray(y, dtype=float)
    _check_positive("y", y)
    if log_s is not None:
        ret = np.expm1(np.diff(np.asarray(log_s, dtype=float)))
    elif s is not None:
        s = np.asarray(s, dtype=float)
        _check_positive("s", s)
        ret = np.diff(s) / s[:-1]
    else:
        raise ValueError("need s or log_s")
    left = y[:-1]
    dL = np.asarray(dL, dtype=float)
    # single exactly rounded sum, so jump returns cancel against dL without loss
    i4 = _fsum(np.concatenate([ret, -dL]))
    i5 = _fsum(np.concatenate([ret / left, -dL / left]))
    return i4, i5


def realized_sigma_rho(grid: SimGrid, y, log_s, log_jump_sums) -> np.ndarray:
    """Realised-covariation estimate of ``[[sigma**2, rho*sigma], [rho*sigma, 1]]``.

    Sum of outer products of ``(dY, dlog S)`` over the grid, minus the squared
    log-jumps on the lower-right entry, divided by ``dt * sum Y_i``.
    """
    y = np.asarray(y, dtype=float)
    _check_positive("y", y)
    dy = np.diff(y)
    dls = np.diff(np.asarray(log_s, dtype=float))
    jumps = np.asarray(log_jump_sums, dtype=float)
    scale = grid.dt * _fsum(y[:-1])
    a = _fsum(dy * dy)
    b = _fsum(dy * dls)
    c = _fsum(dls * dls) - _fsum(jumps * jumps)
    return np.array([[a, b], [b, c]]) / scale


def suff_stats(
    params: ModelParams,
    bundle: PathBundle,
    i3_variant: I3Variant = I3Variant.INCREMENT,
    i45_variant: I45Variant = I45Variant.WIENER,
) -> SuffStats:
    """Assemble :class:`SuffStats` for one simulated trajectory."""
    i3_variant, i45_variant = I3Variant(i3_variant), I45Variant(i45_variant)
    grid = bundle.grid
    core = integrals_core(bundle.y, grid, params.sigma)
    if i45_variant is I45Variant.WIENER:
        i4, i5 = integrals_wiener(params, grid, bundle.y, bundle.dW, bundle.dB, i2=core.i2)
    else:
        if bundle.log_return is None:
            raise ValueError("price-based i4/i5 need a simulated price path")
        i4, i5 = integrals_price(grid, bundle.y, bundle.dL, log_s=bundle.log_return)
    return SuffStats(
        T=grid.T,
        y0=float(bundle.y[0]),
        y_terminal=core.y_terminal,
        i1=core.i1,
        i2=core.i2,
        i3=core.i3 if i3_variant is I3Variant.INCREMENT else core.i3_tilde,
        i4=i4,
        i5=i5,
        i3_variant=i3_variant,
        i45_variant=i45_variant,
        i3_increment=core.i3,
        i3_tilde=core.i3_tilde,
    )
