"""Model parameters, regime logic and closed-form reference quantities.

The jump-type Heston model couples a CIR variance ``Y`` with a price ``S``::

    dY = kappa (theta - Y) dt + sigma sqrt(Y) dW
    dS = mu S dt + S sqrt(Y) (rho dW + sqrt(1 - rho**2) dB) + S_- dL

where ``L`` is a compound Poisson process with jumps ``exp(J) - 1``.  The
drift triple ``psi = (theta, kappa, mu)`` is the estimation target; ``sigma``
and ``rho`` are treated as known.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.special import gammaln

from .errors import MomentUndefined, ParameterError, RegimeError, SingularSecondCoordinate

REGIME_RTOL = 1e-9


# --------------------------------------------------------------------------
# jump-size laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalJumps:
    """Log-jump sizes ``J ~ N(mean, sd**2)``."""

    mean: float = -0.05
    sd: float = 0.1

    def __post_init__(self):
        if not self.sd > 0:
            raise ParameterError(f"normal jump sd must be > 0, got {self.sd}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.sd, size)


@dataclass(frozen=True)
class OneSidedExponentialJumps:
    """Positive log-jumps ``J ~ Exp(rate)``."""

    rate: float = 10.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError(f"exponential jump rate must be > 0, got {self.rate}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class TwoSidedExponentialJumps:
    """Double-exponential log-jumps: ``+Exp(rate_plus)`` w.p. ``p_plus``, else ``-Exp(rate_minus)``."""

    rate_plus: float = 10.0
    rate_minus: float = 10.0
    p_plus: float = 0.5

    def __post_init__(self):
        if not (self.rate_plus > 0 and self.rate_minus > 0):
            raise ParameterError("two-sided exponential rates must be > 0")
        if not 0.0 <= self.p_plus <= 1.0:
            raise ParameterError(f"p_plus must lie in [0, 1], got {self.p_plus}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        up = rng.random(size) < self.p_plus
        mag = rng.exponential(1.0, size)
        return np.where(up, mag / self.rate_plus, -mag / self.rate_minus)


SizeLaw = Union[NormalJumps, OneSidedExponentialJumps, TwoSidedExponentialJumps, None]


@dataclass(frozen=True)
class JumpSpec:
    """Compound Poisson specification: arrival intensity and log-jump law.

    ``size_law=None`` (or ``intensity=0``) switches jumps off.
    """

    intensity: float = 1.0
    size_law: SizeLaw = field(default_factory=NormalJumps)

    def __post_init__(self):
        if not self.intensity >= 0:
            raise ParameterError(f"jump intensity must be >= 0, got {self.intensity}")

    @property
    def active(self) -> bool:
        return self.intensity > 0 and self.size_law is not None


# --------------------------------------------------------------------------
# parameters and regimes
# --------------------------------------------------------------------------


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    INVALID = "invalid"


class Psi(NamedTuple):
    """Drift-parameter triple ``(theta, kappa, mu)``."""

    theta: float
    kappa: float
    mu: float


@dataclass(frozen=True)
class ModelParams:
    theta: float
    kappa: float
    mu: float
    sigma: float
    rho: float
    y0: float = 1.0
    s0: float = 100.0
    jump: JumpSpec = field(default_factory=JumpSpec)

    def __post_init__(self):
        for name in ("theta", "kappa", "sigma", "y0", "s0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value}")
        if not -1.0 < self.rho < 1.0:
            raise ParameterError(f"rho must lie in (-1, 1), got {self.rho}")
        if not math.isfinite(self.mu):
            raise ParameterError(f"mu must be finite, got {self.mu}")

    @property
    def psi(self) -> Psi:
        return Psi(self.theta, self.kappa, self.mu)

    @property
    def feller_gap(self) -> float:
        """``theta*kappa - sigma**2/2``; zero in the critical case."""
        return self.theta * self.kappa - 0.5 * self.sigma**2

    def regime(self, rtol: float = REGIME_RTOL) -> Regime:
        a, b = self.theta * self.kappa, 0.5 * self.sigma**2
        if abs(a - b) <= rtol * max(a, b):
            return Regime.CRITICAL
        return Regime.SUBCRITICAL if a > b else Regime.INVALID

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


def reference_params(critical: bool = False, **overrides) -> ModelParams:
    """Reference parameter sets for the subcritical and the critical regime.

    ``theta=2, kappa=0.5, mu=1-sqrt(e), rho=0.5, y0=1, s0=100`` with
    ``sigma=0.2`` (subcritical) or ``sigma=sqrt(2)`` (critical).
    """
    base = dict(
        theta=2.0,
        kappa=0.5,
        mu=1.0 - math.sqrt(math.e),
        sigma=math.sqrt(2.0) if critical else 0.2,
        rho=0.5,
        y0=1.0,
        s0=100.0,
    )
    base.update(overrides)
    return ModelParams(**base)


def _require(params: ModelParams, regime: Regime, forced: Optional[Regime]) -> None:
    actual = forced if forced is not None else params.regime()
    if actual is not regime:
        raise RegimeError(f"requires {regime.value} regime, parameters are {actual.value}")


# --------------------------------------------------------------------------
# reparameterisation
# --------------------------------------------------------------------------


def h_map(psi) -> np.ndarray:
    """``(theta, kappa, mu) -> (theta*kappa, kappa, mu)``."""
    theta, kappa, mu = psi
    return np.array([theta * kappa, kappa, mu], dtype=float)


def h_inverse(v) -> Psi:
    v1, v2, v3 = (float(x) for x in v)
    if v2 == 0.0:
        raise SingularSecondCoordinate("second coordinate is zero; H is not invertible there")
    return Psi(v1 / v2, v2, v3)


# --------------------------------------------------------------------------
# stationary law of Y and asymptotic covariances
# --------------------------------------------------------------------------


def gamma_shape_rate(params: ModelParams) -> tuple[float, float]:
    """Shape ``2 theta kappa / sigma**2`` and rate ``2 kappa / sigma**2`` of the stationary law."""
    s2 = params.sigma**2
    return 2.0 * params.theta * params.kappa / s2, 2.0 * params.kappa / s2


def stationary_moment(params: ModelParams, K: float) -> float:
    """``E(Y_inf**K)`` for the stationary Gamma law; ``K=1`` returns ``theta`` exactly."""
    if K == 1:
        return params.theta
    shape, rate = gamma_shape_rate(params)
    if K == -1:
        # shape - 1 is the exact finiteness boundary; avoid trusting a rounded comparison
        if params.regime() is not Regime.SUBCRITICAL:
            raise MomentUndefined("E(1/Y_inf) is infinite unless theta*kappa > sigma**2/2")
        return 2.0 * params.kappa / (2.0 * params.theta * params.kappa - params.sigma**2)
    if not K > -shape:
        raise MomentUndefined(f"E(Y_inf**{K}) is infinite for shape {shape}")
    return math.exp(gammaln(shape + K) - gammaln(shape) - K * math.log(rate))


def stationary_information(params: ModelParams) -> np.ndarray:
    """Limit of ``G_T / T``, assembled from the stationary moments of ``Y``."""
    _require(params, Regime.SUBCRITICAL, None)
    s, r = params.sigma, params.rho
    m1 = stationary_moment(params, 1)
    mi = stationary_moment(params, -1)
    g = np.array(
        [
            [mi, -1.0, -r * s * mi],
            [-1.0, m1, r * s],
            [-r * s * mi, r * s, s * s * mi],
        ]
    )
    return g / ((1.0 - r * r) * s * s)


def asym_cov_V0(params: ModelParams, regime: Optional[Regime] = None) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(T) (G_T^{-1} f_T - H(psi))``."""
    _require(params, Regime.SUBCRITICAL, regime)
    th, k, s, r = params.theta, params.kappa, params.sigma, params.rho
    d = 2.0 * th * k - s * s
    q = 1.0 - r * r
    m = np.array(
        [
            [s * s + q * d, 2.0 * k * q, r * s],
            [2.0 * k * q, 4.0 * k * k * q / d, 0.0],
            [r * s, 0.0, 1.0],
        ]
    )
    return d / (2.0 * k) * m


def asym_cov_V(params: ModelParams, regime: Optional[Regime] = None) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(T) (psi_hat - psi)`` in the subcritical regime."""
    _require(params, Regime.SUBCRITICAL, regime)
    th, k, s, r = params.theta, params.kappa, params.sigma, params.rho
    d = 2.0 * th * k - s * s
    q = 1.0 - r * r
    m = np.array(
        [
            [s * s * (2.0 * th * k - r * r * s * s), -2.0 * q * s * s * k * k, r * s * k * d],
            [-2.0 * q * s * s * k * k, 4.0 * k**4 * q, 0.0],
            [r * s * k * d, 0.0, k * k * d],
        ]
    )
    return m / (2.0 * k**3)


def q_matrix(psi) -> np.ndarray:
    """Jacobian of ``H``: ``[[kappa, theta, 0], [0, 1, 0], [0, 0, 1]]``."""
    theta, kappa, _ = psi
    return np.array([[kappa, theta, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


# --------------------------------------------------------------------------
# limit-law samplers
# --------------------------------------------------------------------------


def sample_tau(rng: np.random.Generator, size=None):
    """First time a standard Brownian motion hits level 1.

    Uses ``tau = 1/Z**2`` with ``Z`` standard normal, which has the
    reflection-principle CDF ``P(tau <= t) = 2 (1 - Phi(1/sqrt(t)))``.
    """
    z = rng.standard_normal(size)
    return 1.0 / (z * z)


def _mixed_normal(rho, tau, z2):
    return rho / tau + math.sqrt(1.0 - rho * rho) * z2 / np.sqrt(tau)


def sample_limit_random_scaled_mu_critical(
    params: ModelParams, rng: np.random.Generator, size=None, *, tau=None, z2=None, regime=None
):
    """Draws of ``rho/tau + sqrt(1-rho**2) Z2 / sqrt(tau)``."""
    _require(params, Regime.CRITICAL, regime)
    if tau is None:
        tau = sample_tau(rng, size)
    if z2 is None:
        z2 = rng.standard_normal(np.shape(tau) if size is None else size)
    return _mixed_normal(params.rho, tau, z2)


def sample_limit_mu_critical(
    params: ModelParams, rng: np.random.Generator, size=None, *, tau=None, z2=None, regime=None
):
    """Limit law of ``T (mu_hat - mu)`` when ``theta*kappa = sigma**2/2``.

    ``rho sigma / (kappa tau) + sigma sqrt(1-rho**2) Z2 / (kappa sqrt(tau))``
    with ``Z2`` independent of ``tau``. Pass ``tau`` and ``z2`` to reuse draws.
    """
    base = sample_limit_random_scaled_mu_critical(params, rng, size, tau=tau, z2=z2, regime=regime)
    return params.sigma / params.kappa * base
