"""Small numerical helpers shared across modules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def gauss_legendre(fun_array, a: float, b: float, n: int = 8) -> float:
    x, w = (_GL_X, _GL_W) if n == 8 else np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return float(half * np.dot(w, fun_array(a + half * (x + 1.0))))


def cell_integrals(fun_array, grid) -> np.ndarray:
    """8-point Gauss-Legendre integral of ``fun_array`` over each grid cell."""
    grid = np.asarray(grid, dtype=float)
    a, b = grid[:-1], grid[1:]
    half = 0.5 * (b - a)
    nodes = a[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
    vals = fun_array(nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ _GL_W)


def integrate_endpoint_singular(fun, a: float, b: float, tol: float = 1e-10):
    """Integrate a scalar function that may be singular at ``a`` and ``b``.

    Each half is mapped through t = a + s^2 (resp. t = b - s^2), which removes
    inverse square-root type singularities and tames weaker ones.
    Returns ``(value, error_estimate, ok)``.
    """
    if b <= a:
        return 0.0, 0.0, True
    mid = 0.5 * (a + b)
    w = math.sqrt(mid - a)
    total, err, ok = 0.0, 0.0, True
    halves = ((lambda s: 2.0 * s * fun(a + s * s)), (lambda s: 2.0 * s * fun(b - s * s)))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for g in halves:
            try:
                val, e = integrate.quad(g, 0.0, w, epsabs=0.5 * tol, epsrel=1e-12, limit=200)
            except integrate.IntegrationWarning:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    val, e = integrate.quad(g, 0.0, w, epsabs=0.5 * tol, epsrel=1e-12, limit=200)
                ok = False
            total += val
            err += e
    return total, err, ok and math.isfinite(total)


@dataclass(frozen=True)
class TailLimit:
    """Heuristic limit of a sequence sampled at distances 2^-k from a point.

    ``behaviour`` is one of ``finite``, ``zero``, ``+inf``, ``-inf`` or
    ``unknown``; ``converged`` is False only for ``unknown``.
    """

    value: float
    behaviour: str
    converged: bool
    exponent: float
    samples: tuple

    @property
    def lower(self) -> float:
        """Value to use for a liminf."""
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "behaviour": self.behaviour, "converged": self.converged,
                "exponent": self.exponent}


DYADIC_K = tuple(range(8, 41))


def dyadic_offsets(ks=DYADIC_K) -> np.ndarray:
    return np.array([2.0 ** -k for k in ks])


def _fit_window(dist, vals):
    if np.all(vals == 0.0):
        return 0.0, "zero", 0.0
    sign = np.sign(vals)
    if not (np.all(sign > 0) or np.all(sign < 0)):
        return math.nan, "unknown", math.nan
    x, y = np.log(dist), np.log(np.abs(vals))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    if np.max(np.abs(resid)) > 0.05 * max(1.0, abs(slope) * (x.max() - x.min())):
        return math.nan, "unknown", slope
    s = float(sign[0])
    if slope < -0.05:
        return s * math.inf, "+inf" if s > 0 else "-inf", slope
    if slope > 0.05:
        return 0.0, "zero", slope
    rel = abs(vals[-1] - vals[-4]) / max(abs(vals[-1]), 1e-300)
    if rel <= 1e-3:
        return float(vals[-1]), "finite", slope
    return math.nan, "unknown", slope


def tail_limit(dist, values, mode: str = "inf", window: int = 12, blowup: float = 1e12) -> TailLimit:
    """Classify the tail of ``values`` sampled at decreasing ``dist``.

    The last ``window`` points are fitted by a power law in the distance; if
    that fit is noisy the previous window is tried.  ``mode`` picks which tail
    statistic is reported for finite limits (``inf`` -> minimum, ``sup`` ->
    maximum), matching liminf/limsup.
    """
    dist = np.asarray(dist, dtype=float)
    values = np.asarray(values, dtype=float)
    samples = tuple(zip(dist.tolist(), values.tolist()))
    finite = np.isfinite(values)
    if not np.all(finite):
        bad = values[~finite]
        if np.all(np.isinf(bad)) and np.all(np.sign(bad) == np.sign(bad[0])) and not finite[-1]:
            s = float(np.sign(bad[0]))
            return TailLimit(s * math.inf, "+inf" if s > 0 else "-inf", True, math.nan, samples)
        return TailLimit(math.nan, "unknown", False, math.nan, samples)
    if np.max(np.abs(values[-window:])) > blowup:
        s = float(np.sign(values[-1]))
        return TailLimit(s * math.inf, "+inf" if s > 0 else "-inf", True, math.nan, samples)
    for end in (len(values), len(values) - window):
        start = end - window
        if start < 0:
            break
        value, behaviour, slope = _fit_window(dist[start:end], values[start:end])
        if behaviour != "unknown":
            if behaviour == "finite":
                tail = values[start:end][-6:]
                value = float(tail.min() if mode == "inf" else tail.max())
            return TailLimit(value, behaviour, True, float(slope), samples)
    return TailLimit(float(values[-window:].min() if mode == "inf" else values[-window:].max()),
                     "unknown", False, math.nan, samples)


def extended(x: float) -> float | str:
    """JSON-friendly rendering of an extended real."""
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x
