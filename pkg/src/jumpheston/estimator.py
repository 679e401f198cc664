"""Closed-form maximum likelihood estimation of ``psi = (theta, kappa, mu)``.

The log-likelihood ratio is a quadratic form in ``H(psi) = (theta*kappa,
kappa, mu)`` with information matrix ``G_T`` and score vector ``f_T``, both
linear in the path functionals of :mod:`jumpheston.statistics`.  Its maximiser
is ``H^{-1}(G_T^{-1} f_T)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateStats, RegimeError, SingularSecondCoordinate
from .model import Psi, Regime, h_inverse, h_map, q_matrix
from .statistics import SuffStats

SINGULAR_RTOL = 1e-14
# constant paths reach i1*i2 = T**2 only up to rounding; anything this close is degenerate
DEGENERATE_RTOL = 1e-12


class Route(enum.Enum):
    MATRIX = "matrix"
    COORDINATEWISE = "coordinatewise"


@dataclass(frozen=True)
class InformationMatrix:
    g: np.ndarray
    T: float
    sigma: float
    rho: float


@dataclass(frozen=True)
class ScoreVector:
    f: np.ndarray


@dataclass(frozen=True)
class MleEstimate:
    psi_hat: Psi
    g: InformationMatrix
    f: ScoreVector
    route: Route

    @property
    def in_parameter_set(self) -> bool:
        """Whether ``theta_hat > 0`` and ``kappa_hat > 0``; estimates are never clamped."""
        return self.psi_hat.theta > 0 and self.psi_hat.kappa > 0


def _check_gap(stats: SuffStats) -> None:
    if not (stats.i2 > 0 and stats.i1 > 0):
        raise DegenerateStats(f"i1={stats.i1}, i2={stats.i2} must be positive")
    t2 = stats.T * stats.T
    if not stats.i1 * stats.i2 - t2 > DEGENERATE_RTOL * t2:
        raise DegenerateStats(
            f"i1*i2 = {stats.i1 * stats.i2!r} does not exceed T**2 = {t2!r}"
        )


def build_G(stats: SuffStats, sigma: float, rho: float) -> InformationMatrix:
    _check_gap(stats)
    T, i1, i2 = stats.T, stats.i1, stats.i2
    rs = rho * sigma
    g = np.array(
        [
            [i2, -T, -rs * i2],
            [-T, i1, rs * T],
            [-rs * i2, rs * T, sigma * sigma * i2],
        ]
    ) / ((1.0 - rho * rho) * sigma * sigma)
    return InformationMatrix(g, T, sigma, rho)


def build_f(stats: SuffStats, sigma: float, rho: float) -> ScoreVector:
    rs = rho * sigma
    f = np.array(
        [
            stats.i3 - rs * stats.i5,
            -stats.dY + rs * stats.i4,
            -rs * stats.i3 + sigma * sigma * stats.i5,
        ]
    ) / ((1.0 - rho * rho) * sigma * sigma)
    return ScoreVector(f)


def g_inverse_closed_form(g: InformationMatrix, stats: SuffStats) -> np.ndarray:
    """Explicit inverse of ``G_T`` in terms of ``i1``, ``i2`` and ``T``."""
    _check_gap(stats)
    T, i1, i2 = stats.T, stats.i1, stats.i2
    s, r = g.sigma, g.rho
    p = i1 * i2
    gap = p - T * T
    q = 1.0 - r * r
    a13 = r * s * p - r * s * T * T
    m = np.array(
        [
            [s * s * p - r * r * s * s * T * T, q * s * s * T * i2, a13],
            [q * s * s * T * i2, q * s * s * i2 * i2, 0.0],
            [a13, 0.0, gap],
        ]
    )
    return m / (gap * i2)


def g_inverse_solve(g: InformationMatrix) -> np.ndarray:
    """Generic inverse, kept only as a cross-check of the closed form."""
    return np.linalg.solve(g.g, np.eye(3))


def _kappa_parts(stats: SuffStats, sigma: float, rho: float):
    T, i2 = stats.T, stats.i2
    rs = rho * sigma
    terms = (T * stats.i3, -i2 * stats.dY, rs * i2 * stats.i4, -rs * T * stats.i5)
    return math.fsum(terms), math.fsum(abs(t) for t in terms)


def _coordinatewise(stats: SuffStats, sigma: float, rho: float) -> Psi:
    T, i1, i2 = stats.T, stats.i1, stats.i2
    rs = rho * sigma
    k_num, scale = _kappa_parts(stats, sigma, rho)
    if abs(k_num) <= SINGULAR_RTOL * scale:
        raise SingularSecondCoordinate(f"kappa numerator {k_num!r} vanishes at scale {scale!r}")
    th_num = math.fsum(
        (i1 * stats.i3, -T * stats.dY, rs * T * stats.i4, -rs * T * T * stats.i5 / i2)
    )
    theta = th_num / k_num
    kappa = k_num / (i1 * i2 - T * T)
    mu = stats.i5 / i2
    return Psi(theta, kappa, mu)


def mle(stats: SuffStats, sigma: float, rho: float, route: Route = Route.MATRIX) -> MleEstimate:
    """Maximum likelihood estimate of ``(theta, kappa, mu)``.

    ``Route.MATRIX`` evaluates ``H^{-1}(G^{-1} f)`` with the closed-form inverse;
    ``Route.COORDINATEWISE`` uses the explicit ratio formulas.  Both give
    ``mu_hat = i5 / i2`` exactly.
    """
    route = Route(route)
    g = build_G(stats, sigma, rho)
    f = build_f(stats, sigma, rho)
    if route is Route.MATRIX:
        _, scale = _kappa_parts(stats, sigma, rho)
        v = g_inverse_closed_form(g, stats) @ f.f
        if abs(v[1]) * (stats.i1 * stats.i2 - stats.T**2) <= SINGULAR_RTOL * scale:
            raise SingularSecondCoordinate(f"(G^-1 f)_2 = {v[1]!r} vanishes")
        theta, kappa, _ = h_inverse(v)
        psi = Psi(theta, kappa, stats.i5 / stats.i2)
    else:
        psi = _coordinatewise(stats, sigma, rho)
    return MleEstimate(psi, g, f, route)


def log_likelihood_ratio(psi, psi_ref, f: ScoreVector, g: InformationMatrix) -> float:
    """``(H(psi)-H(psi_ref))' f - 1/2 (H(psi)-H(psi_ref))' G (H(psi)+H(psi_ref))``."""
    a, b = h_map(psi), h_map(psi_ref)
    d = a - b
    return float(d @ f.f - 0.5 * d @ (g.g @ (a + b)))


def score(psi, f: ScoreVector, g: InformationMatrix) -> np.ndarray:
    """Gradient of the log-likelihood ratio in ``psi``: ``Q(psi)' (f - G H(psi))``."""
    return q_matrix(psi).T @ (f.f - g.g @ h_map(psi))


def random_scaling(stats: SuffStats, sigma: float, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Observable normalisers ``(R_T, Q_T)`` with ``R_T' R_T = G_T`` and ``Q_T -> Q``."""
    _check_gap(stats)
    T, i1, i2 = stats.T, stats.i1, stats.i2
    sq = math.sqrt(1.0 - rho * rho)
    r = np.array(
        [
            [i2, -T, -rho * sigma * i2],
            [0.0, math.sqrt(i1 * i2 - T * T), 0.0],
            [0.0, 0.0, sigma * sq * i2],
        ]
    ) / (sigma * sq * math.sqrt(i2))
    q11 = (0.5 * sigma * sigma * i2 / T) / ((i1 / T) * (i2 / T) - 1.0)
    q = np.array([[q11, i1 / T, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return r, q


class ScaledErrors(NamedTuple):
    deterministic: np.ndarray
    random_scaled: np.ndarray


def deterministic_scales(truth, sigma: float, rho: float, T: float, regime: Regime) -> np.ndarray:
    """Per-coordinate factors turning ``psi_hat - psi`` into the normalised errors."""
    theta, kappa, _ = truth
    q = 1.0 - rho * rho
    if regime is Regime.SUBCRITICAL:
        return np.array(
            [
                math.sqrt(2.0 * kappa**3 * T / (sigma**2 * (2.0 * theta * kappa - rho**2 * sigma**2))),
                math.sqrt(T / (2.0 * kappa * q)),
                math.sqrt(2.0 * kappa * T / (2.0 * theta * kappa - sigma**2)),
            ]
        )
    if regime is Regime.CRITICAL:
        return np.array(
            [
                math.sqrt(2.0 * kappa**3 * T / (sigma**4 * q)),
                math.sqrt(T / (2.0 * kappa * q)),
                T,
            ]
        )
    raise RegimeError("scaled errors are undefined when theta*kappa < sigma**2/2")


def scaled_errors(est: MleEstimate, truth, stats: SuffStats, regime: Regime) -> ScaledErrors:
    """Normalised estimation errors with deterministic and with random scaling.

    Subcritical: ``sqrt(T)``-type factors (standard normal limits) and
    ``R_T Q_T (psi_hat - psi)``.  Critical: ``T`` scaling for ``mu`` and the
    diagonal random scaling built from ``i1``.
    """
    regime = Regime(regime)
    sigma, rho = est.g.sigma, est.g.rho
    err = np.asarray(est.psi_hat, dtype=float) - np.asarray(truth, dtype=float)
    det = deterministic_scales(truth, sigma, rho, stats.T, regime) * err
    if regime is Regime.SUBCRITICAL:
        r, q = random_scaling(stats, sigma, rho)
        rnd = r @ (q @ err)
    else:
        T, i1 = stats.T, stats.i1
        sq = math.sqrt(1.0 - rho * rho)
        diag = np.array(
            [
                sigma * T * T / (2.0 * sq * i1**1.5),
                math.sqrt(i1) / (sigma * sq),
                sigma * T * T / (2.0 * i1),
            ]
        )
        rnd = diag * err
    return ScaledErrors(det, rnd)


def condition_number(g: InformationMatrix) -> float:
    return float(np.linalg.cond(g.g))


def estimate(stats: SuffStats, sigma: float, rho: float, route: Optional[Route] = None) -> MleEstimate:
    """Convenience wrapper defaulting to the matrix route."""
    return mle(stats, sigma, rho, Route.MATRIX if route is None else route)
