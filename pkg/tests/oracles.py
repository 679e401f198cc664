"""Independent reference computations used only by the tests.

These deliberately avoid the package's code paths: high-precision mpmath
arithmetic, exact rational sums, and direct Brownian simulation.
"""

from __future__ import annotations

from fractions import Fraction

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def implicit_step_root(y, dW, theta, kappa, sigma, dt):
    """Positive root of the quadratic solved by one drift-implicit step, squared."""
    y, dW, theta, kappa, sigma, dt = map(mp.mpf, (y, dW, theta, kappa, sigma, dt))
    a = 1 + kappa * dt / 2
    b = -(mp.sqrt(y) + sigma * dW / 2)
    c = -(kappa * theta / 2 - sigma**2 / 8) * dt
    x = (-b + mp.sqrt(b * b - 4 * a * c)) / (2 * a)
    return x * x


def quadratic_residual(x, y, dW, theta, kappa, sigma, dt):
    x, y, dW, theta, kappa, sigma, dt = map(mp.mpf, (x, y, dW, theta, kappa, sigma, dt))
    return (1 + kappa * dt / 2) * x * x - (mp.sqrt(y) + sigma * dW / 2) * x - (kappa * theta / 2 - sigma**2 / 8) * dt


def exact_core_sums(y, dt):
    """``i1``, ``i2``, ``i3`` with every float term summed exactly as a Fraction."""
    y = [float(v) for v in y]
    left = y[:-1]
    i1 = Fraction(dt) * sum(Fraction(v) for v in left)
    i2 = Fraction(dt) * sum(Fraction(1.0 / v) for v in left)
    i3 = sum(Fraction((b - a) / a) for a, b in zip(y[:-1], y[1:]))
    return float(i1), float(i2), float(i3)


def information_matrix(T, i1, i2, sigma, rho):
    T, i1, i2, s, r = map(mp.mpf, (T, i1, i2, sigma, rho))
    g = mp.matrix([[i2, -T, -r * s * i2], [-T, i1, r * s * T], [-r * s * i2, r * s * T, s * s * i2]])
    return g / ((1 - r * r) * s * s)


def score_vector(i3, dY, i4, i5, sigma, rho):
    i3, dY, i4, i5, s, r = map(mp.mpf, (i3, dY, i4, i5, sigma, rho))
    f = mp.matrix([i3 - r * s * i5, -dY + r * s * i4, -r * s * i3 + s * s * i5])
    return f / ((1 - r * r) * s * s)


def mle_by_solve(T, i1, i2, i3, dY, i4, i5, sigma, rho):
    """``H^{-1}(G^{-1} f)`` by a 40-digit LU solve."""
    v = mp.lu_solve(information_matrix(T, i1, i2, sigma, rho), score_vector(i3, dY, i4, i5, sigma, rho))
    return float(v[0] / v[1]), float(v[1]), float(v[2])


def random_valid_stats(rng: np.random.Generator):
    """Random statistics satisfying ``i1*i2 > T**2``."""
    T = float(rng.uniform(0.5, 500.0))
    a = float(rng.uniform(0.05, 5.0))
    b = (1.0 + float(rng.uniform(1e-3, 3.0))) / a
    return dict(
        T=T, i1=T * a, i2=T * b,
        i3=float(rng.normal(0, 3)) * T ** 0.5,
        dY=float(rng.normal(0, 1)),
        i4=float(rng.normal(0, 3)) * T ** 0.5,
        i5=float(rng.normal(0, 3)) * T ** 0.5,
    )


def brownian_first_passage(rng: np.random.Generator, paths: int, dt: float, horizon: float,
                           level: float = 1.0, block: int = 4000, chunk: int = 2000) -> np.ndarray:
    """First grid time a discretely simulated Brownian path reaches ``level``.

    Paths that do not cross before ``horizon`` get ``inf``.  Work proceeds
    in time chunks and drops paths once they have crossed.
    """
    out = np.full(paths, np.inf)
    n_steps = int(round(horizon / dt))
    sd = np.sqrt(dt)
    for start in range(0, paths, block):
        idx = np.arange(start, min(start + block, paths))
        pos = np.zeros(idx.size)
        done = 0
        while done < n_steps and idx.size:
            m = min(chunk, n_steps - done)
            walk = pos[:, None] + np.cumsum(sd * rng.standard_normal((idx.size, m)), axis=1)
            hit = walk >= level
            crossed = hit.any(axis=1)
            first = hit.argmax(axis=1)
            out[idx[crossed]] = (done + first[crossed] + 1) * dt
            keep = ~crossed
            idx, pos = idx[keep], walk[keep, -1]
            done += m
    return out
