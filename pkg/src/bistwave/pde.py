"""Explicit finite-volume solver for u_t + h(u) u_x = [d(u)|u_x|^(p-2) u_x]_x + g(u).

Used only to cross-check the wave speed: a smoothed step is evolved and the
level-1/2 crossing is tracked.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .problem import ProblemSpec

BOUND_EPS = 1e-6
TABLE_POINTS = 4097
SLOPE_FLOOR = 1e-3  # regularizes the effective diffusivity |u_x|^(p-2) for p < 2


class CFLViolation(ArithmeticError):
    """The explicit update left [0, 1] by more than BOUND_EPS."""


@dataclass
class SpaceTimeField:
    x: np.ndarray
    times: np.ndarray
    u: np.ndarray  # shape (len(times), len(x))
    dx: float
    steps: int
    max_overshoot: float = 0.0
    params: dict = field(default_factory=dict)

    def to_csv(self, stride: int = 1) -> str:
        """Long-format snapshots: t, x, u."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u"])
        for k, t in enumerate(self.times):
            for xi, ui in zip(self.x[::stride], self.u[k, ::stride]):
                w.writerow([f"{t:.12e}", f"{xi:.12e}", f"{ui:.12e}"])
        return buf.getvalue()


class _Tables:
    """Engquist-Osher pieces of H on a fine u table."""

    def __init__(self, spec: ProblemSpec):
        u = np.union1d(np.linspace(0.0, 1.0, TABLE_POINTS), spec.breakpoints)
        hv = spec.h.evaluate_array(u)
        mid = spec.h.evaluate_array(0.5 * (u[:-1] + u[1:]))
        du = np.diff(u)
        # Simpson on each table cell
        pos = du * (np.maximum(hv[:-1], 0) + 4 * np.maximum(mid, 0) + np.maximum(hv[1:], 0)) / 6.0
        neg = du * (np.minimum(hv[:-1], 0) + 4 * np.minimum(mid, 0) + np.minimum(hv[1:], 0)) / 6.0
        self.u = u
        self.plus = np.concatenate([[0.0], np.cumsum(pos)])
        self.minus = np.concatenate([[0.0], np.cumsum(neg)])
        self.max_speed = float(np.max(np.abs(np.concatenate([hv, mid]))))

    def flux(self, ul, ur):
        return np.interp(ul, self.u, self.plus) + np.interp(ur, self.u, self.minus)


class _Coefficient:
    """Table lookup for a piecewise coefficient; jumps are kept as vertical steps."""

    def __init__(self, pw):
        xs, ys = [], []
        bps = pw.breakpoints
        for k, seg in enumerate(pw.segments):
            a, b = bps[k], bps[k + 1]
            n = max(9, int(round((b - a) * TABLE_POINTS)))
            grid = np.linspace(a, b, n)
            xs.append(grid)
            ys.append(seg.evaluate_array(grid))
        self.x, self.y = np.concatenate(xs), np.concatenate(ys)
        self.breakpoints = np.asarray(bps)
        self.is_constant = len(pw.segments) == 1 and bool(np.all(self.y == self.y[0]))

    def __call__(self, u):
        if self.is_constant:
            return np.full(np.shape(u), self.y[0])
        return np.interp(u, self.x, self.y)


def _face_diffusivity(d: _Coefficient, ul, ur):
    """Arithmetic mean within one d segment, harmonic mean across a jump."""
    dl, dr = d(ul), d(ur)
    if len(d.breakpoints) == 2:
        return 0.5 * (dl + dr)
    same = (np.searchsorted(d.breakpoints, ul, side="right")
            == np.searchsorted(d.breakpoints, ur, side="right"))
    arith = 0.5 * (dl + dr)
    with np.errstate(divide="ignore", invalid="ignore"):
        harm = np.where(dl + dr > 0, 2.0 * dl * dr / (dl + dr), 0.0)
    return np.where(same, arith, harm)


def step_initial(x, width: float = 1.0, center: float = 0.0):
    """Smoothed step from 1 (left) to 0 (right)."""
    return 0.5 * (1.0 - np.tanh((x - center) / width))


def simulate(spec: ProblemSpec, L: float = 40.0, n_cells: int = 2048, t_max: float = 30.0,
             cfl_safety: float = 0.8, n_snapshots: int = 121, u0=None) -> SpaceTimeField:
    """Forward Euler in time, Engquist-Osher convection, centered p-Laplacian faces.

    Neumann boundaries.  The time step is the smallest of the advective,
    diffusive and reaction limits times ``cfl_safety``, recomputed every step.
    """
    if n_cells < 128:
        raise ValueError("n_cells must be at least 128")
    if not 0.0 < cfl_safety < 1.0:
        raise ValueError("cfl_safety must lie in (0, 1)")
    p = spec.p
    dx = 2.0 * L / n_cells
    x = -L + (np.arange(n_cells) + 0.5) * dx
    u = step_initial(x) if u0 is None else np.asarray(u0(x), dtype=float)
    tab = _Tables(spec)
    dcoef, gcoef = _Coefficient(spec.d), _Coefficient(spec.g)
    ug = np.linspace(0.0, 1.0, 2049)
    gv = spec.g.evaluate_array(ug)
    g_lip = float(np.max(np.abs(np.diff(gv)) / np.diff(ug)))
    dmax = float(np.max(spec.d.evaluate_array(np.union1d(ug, spec.breakpoints))))
    snap_times = np.linspace(0.0, t_max, n_snapshots)
    snaps = [u.copy()]
    t, k_snap, steps, overshoot = 0.0, 1, 0, 0.0
    flux = np.zeros(n_cells + 1)
    while k_snap < n_snapshots:
        ul, ur = u[:-1], u[1:]
        s = (ur - ul) / dx
        dface = _face_diffusivity(dcoef, ul, ur)
        if p == 2.0:
            diff_flux = dface * s
            eff = dmax
        else:
            mag = np.abs(s)
            diff_flux = dface * mag ** (p - 2.0) * s
            diff_flux[mag == 0.0] = 0.0
            eff = (p - 1.0) * float(np.max(dface * np.maximum(mag, SLOPE_FLOOR) ** (p - 2.0)))
        flux[1:-1] = tab.flux(ul, ur) - diff_flux
        limits = [0.5 * dx * dx / eff if eff > 0 else math.inf,
                  dx / tab.max_speed if tab.max_speed > 0 else math.inf,
                  1.0 / g_lip if g_lip > 0 else math.inf]
        dt = cfl_safety * min(limits)
        dt = min(dt, snap_times[k_snap] - t)
        u = u - dt / dx * (flux[1:] - flux[:-1]) + dt * gcoef(u)
        steps += 1
        lo, hi = float(u.min()), float(u.max())
        overshoot = max(overshoot, -lo, hi - 1.0)
        if lo < -BOUND_EPS or hi > 1.0 + BOUND_EPS:
            raise CFLViolation(f"u left [0, 1] at t={t + dt:.6g}: range [{lo:.3e}, {hi:.3e}]")
        np.clip(u, 0.0, 1.0, out=u)
        t += dt
        if t >= snap_times[k_snap] - 1e-12 * max(1.0, t_max):
            t = snap_times[k_snap]
            snaps.append(u.copy())
            k_snap += 1
    return SpaceTimeField(x, snap_times, np.array(snaps), dx, steps, max(overshoot, 0.0),
                          {"L": L, "n_cells": n_cells, "t_max": t_max, "cfl_safety": cfl_safety})


def front_positions(fld: SpaceTimeField, level: float = 0.5) -> np.ndarray:
    """First crossing of ``level`` from above, linearly interpolated, per snapshot."""
    out = np.full(len(fld.times), np.nan)
    for k, row in enumerate(fld.u):
        below = np.nonzero(row < level)[0]
        if len(below) == 0 or below[0] == 0:
            continue
        j = below[0]
        x0, x1, u0, u1 = fld.x[j - 1], fld.x[j], row[j - 1], row[j]
        out[k] = x0 + (u0 - level) * (x1 - x0) / (u0 - u1)
    return out


def measure_front_speed(fld: SpaceTimeField, level: float = 0.5, window: float | None = None) -> float:
    """Least-squares slope of the level crossing over the trailing time window.

    The default window is the second half of the run.
    """
    times = fld.times
    if window is None:
        window = 0.5 * (times[-1] - times[0])
    pos = front_positions(fld, level)
    mask = (times >= times[-1] - window) & np.isfinite(pos)
    if np.count_nonzero(mask) < 4:
        raise ValueError("fewer than 4 snapshots with a level crossing in the window")
    slope, _ = np.polyfit(times[mask], pos[mask], 1)
    return float(slope)


__all__ = ["SpaceTimeField", "CFLViolation", "simulate", "measure_front_speed", "front_positions",
           "step_initial"]
