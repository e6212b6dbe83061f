"""Wave profile U(z) from a critical trajectory, front classification and residuals.

With y the critical trajectory, the profile inverse satisfies

    dz/dU = -d(U)^(1/(p-1)) / y(U)^(1/p),   z(1/2) = 0,

so z is a quadrature in U.  The flux is v = -y^(1/p').
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._numeric import _GL_W, _GL_X, cell_integrals, extended, integrate_endpoint_singular
from .problem import ProblemSpec
from .quantities import h_integral
from .shooting import CriticalTrajectory, IntegratorOptions

U_MIN = 1e-6
FINITE_RATIO = 0.9


class ProfileError(ArithmeticError):
    pass


def _integrand_factory(spec: ProblemSpec, traj):
    """Vectorized d(U)^(1/(p-1)) / y(U)^(1/p) on the open segments of d."""
    q, ip = 1.0 / (spec.p - 1.0), 1.0 / spec.p
    d = spec.d

    def fn(u):
        u = np.asarray(u, dtype=float)
        dv = d.evaluate_array(u)
        yv = np.asarray(traj(u), dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(yv > 0, dv ** q / yv ** ip, np.inf)

    return fn


def _resolved_kmax(traj, end: str, cap: int = 40) -> int:
    """Deepest dyadic level whose shell lies outside the bootstrap lead step."""
    half = traj.forward if end == "zero" else traj.backward
    off = getattr(half, "seed_offset", 0.0)
    if off <= 0.0:
        return cap
    return max(12, min(cap, int(math.floor(-math.log2(2.0 * off)))))


def _tail_pieces(fn, end: str, kmax: int = 40):
    """Integrals over dyadic shells [2^-k, 2^-k+1] next to U = 0 or U = 1."""
    pieces = []
    for k in range(2, kmax + 1):
        a, b = 2.0 ** -k, 2.0 ** (-k + 1)
        if end == "one":
            a, b = 1.0 - b, 1.0 - a
        half = 0.5 * (b - a)
        pieces.append(float(half * np.dot(_GL_W, fn(a + half * (_GL_X + 1.0)))))
    return np.array(pieces)


def _y_exponent(traj, end: str, kmax: int) -> float:
    ks = np.arange(kmax - 11, kmax + 1)
    off = 2.0 ** -ks.astype(float)
    u = off if end == "zero" else 1.0 - off
    yv = np.asarray(traj(u), dtype=float)
    if np.any(yv <= 0):
        return math.nan
    return float(np.polyfit(np.log(off), np.log(yv), 1)[0])


def classify_fronts(spec: ProblemSpec, traj) -> dict:
    """Finite or infinite front at each equilibrium.

    The dyadic shell integrals of d^(1/(p-1))/y^(1/p) towards U = 0 (right
    front, z1) and U = 1 (left front, z0) are finite iff they shrink
    geometrically with ratio below 0.9.
    """
    fn = _integrand_factory(spec, traj)
    out = {}
    for name, end in (("rightFront", "zero"), ("leftFront", "one")):
        kmax = _resolved_kmax(traj, end)
        pieces = _tail_pieces(fn, end, kmax)
        tail = pieces[-10:]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = tail[1:] / tail[:-1]
        finite_vals = np.all(np.isfinite(tail)) and np.all(tail > 0)
        ratio = float(np.median(ratios)) if finite_vals else math.inf
        finite = finite_vals and ratio < FINITE_RATIO
        out[name] = {"finite": bool(finite), "shell_ratio": ratio, "deepest_level": kmax,
                     "y_exponent": _y_exponent(traj, end, kmax)}
    return out


@dataclass
class WaveProfile:
    z: np.ndarray
    U: np.ndarray
    Uprime_left: np.ndarray
    Uprime_right: np.ndarray
    z0: float
    z1: float
    zetas: list
    fronts: dict
    c: float
    p: float
    truncated: tuple = (False, False)
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        order = np.argsort(self.z)
        zz, uu, du = self.z[order], self.U[order], self.Uprime_right[order]
        keep = np.concatenate([[True], np.diff(zz) > 0])
        self._spline = CubicHermiteSpline(zz[keep], uu[keep], du[keep], extrapolate=False)

    def U_at(self, z):
        """Profile value by cubic Hermite interpolation with exact slopes."""
        z = np.asarray(z, dtype=float)
        lo, hi = self.z[0], self.z[-1]
        out = self._spline(np.clip(z, lo, hi))
        out = np.where(z < lo, self.U[0] if self.truncated[0] or not math.isfinite(self.z0) else 1.0, out)
        out = np.where(z > hi, self.U[-1] if self.truncated[1] or not math.isfinite(self.z1) else 0.0, out)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "U", "Uprime_left", "Uprime_right"])
        for row in zip(self.z, self.U, self.Uprime_left, self.Uprime_right):
            w.writerow([f"{v:.12e}" for v in row])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"c": self.c, "z0": extended(self.z0), "z1": extended(self.z1),
                "sharp_left": math.isfinite(self.z0), "sharp_right": math.isfinite(self.z1),
                "zetas": [{"U": m, "z": z} for m, z in self.zetas], "fronts": self.fronts,
                "samples": int(len(self.z)), "truncated": list(self.truncated)}

    def to_json(self) -> str:
        return json.dumps(self.metadata(), indent=2)


def _u_grid(spec: ProblemSpec, lo: float, hi: float, n: int) -> np.ndarray:
    """Grid on [lo, hi] clustered at 0, 1, s*, 1/2 and every breakpoint."""
    marks = sorted({lo, hi, 0.5, *[b for b in spec.breakpoints if lo < b < hi]})
    per = max(16, n // (len(marks) - 1))
    pts = []
    for a, b in zip(marks, marks[1:]):
        th = 0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, per))
        pts.append(a + (b - a) * th)
    pts.append(np.geomspace(max(lo, 1e-300), 0.05, per) if lo < 0.05 else np.array([lo]))
    pts.append(1.0 - np.geomspace(max(1.0 - hi, 1e-300), 0.05, per) if hi > 0.95 else np.array([hi]))
    g = np.unique(np.concatenate(pts))
    return g[(g >= lo) & (g <= hi)]


def reconstruct_profile(spec: ProblemSpec, traj: CriticalTrajectory, n_samples: int = 4000,
                        opts: IntegratorOptions | None = None, u_min: float = U_MIN) -> WaveProfile:
    """Sample (z, U) from the critical trajectory by quadrature in U."""
    opts = opts or traj.forward.opts
    if abs(traj.mismatch) > opts.match_tol:
        raise ProfileError(f"trajectory is not critical: halves differ by {traj.mismatch:.3e} at s_star")
    fn = _integrand_factory(spec, traj)
    fronts = classify_fronts(spec, traj)
    lo_u = 0.0 if fronts["rightFront"]["finite"] else u_min
    hi_u = 1.0 if fronts["leftFront"]["finite"] else 1.0 - u_min
    # interior grid avoids the exact endpoints; finite ends are added after
    grid = _u_grid(spec, max(lo_u, u_min), min(hi_u, 1.0 - u_min), n_samples)
    cells = cell_integrals(fn, grid)
    if not np.all(np.isfinite(cells)):
        bad = int(np.nonzero(~np.isfinite(cells))[0][0])
        raise ProfileError(f"quadrature failed on [{grid[bad]}, {grid[bad + 1]}]")
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    k_half = int(np.searchsorted(grid, 0.5))
    z = cum[k_half] - cum           # z(U) = integral from U to 1/2
    z[k_half] = 0.0
    U = grid.copy()

    def end_integral(a, b):
        scalar = lambda u: float(fn(np.array([u]))[0])
        val, _, ok = integrate_endpoint_singular(scalar, a, b, tol=1e-10)
        if not ok:
            raise ProfileError(f"endpoint quadrature failed on [{a}, {b}]")
        return val

    z1 = z[0] + end_integral(0.0, grid[0]) if fronts["rightFront"]["finite"] else math.inf
    z0 = z[-1] - end_integral(grid[-1], 1.0) if fronts["leftFront"]["finite"] else -math.inf
    if math.isfinite(z1):
        z, U = np.concatenate([[z1], z]), np.concatenate([[0.0], U])
    if math.isfinite(z0):
        z, U = np.concatenate([z, [z0]]), np.concatenate([U, [1.0]])

    q, ip = 1.0 / (spec.p - 1.0), 1.0 / spec.p
    yv = np.asarray(traj(U), dtype=float)
    d = spec.d
    # U' at z from the left in z uses d just above U, from the right d just below
    d_above = np.array([_d_side(d, u, "right") for u in U])
    d_below = np.array([_d_side(d, u, "left") for u in U])
    with np.errstate(divide="ignore", invalid="ignore"):
        up_left = -np.where(d_above > 0, yv ** ip / d_above ** q, np.inf)
        up_right = -np.where(d_below > 0, yv ** ip / d_below ** q, np.inf)
    up_left = np.where(np.isfinite(up_left), up_left, 0.0)
    up_right = np.where(np.isfinite(up_right), up_right, 0.0)

    zetas = []
    for m in d.interior_breakpoints:
        if U.min() <= m <= U.max():
            zetas.append((m, float(np.interp(m, U, z))))
    order = np.argsort(z)
    return WaveProfile(z[order], U[order], up_left[order], up_right[order], z0, z1, zetas, fronts,
                       traj.c, spec.p, truncated=(not math.isfinite(z0), not math.isfinite(z1)))


def _d_side(d, u: float, side: str) -> float:
    if u <= 0.0:
        side = "right"
    if u >= 1.0:
        side = "left"
    k = d.breakpoint_index(u)
    if k is None:
        return d(u)
    return d.limit(k, side)


# -- residuals -----------------------------------------------------------

def _richardson_slope(fn, m: float, sign: float, deltas=(1e-4, 5e-5, 2.5e-5)):
    """Slope dU/dz at U = m from the side U = m + sign*delta.

    The inverse difference quotient delta / (z(m + sign delta) - z(m)) is
    extrapolated linearly to delta -> 0.
    """
    vals = []
    for dlt in deltas:
        a, b = (m, m + dlt) if sign > 0 else (m - dlt, m)
        half = 0.5 * (b - a)
        integral = float(half * np.dot(_GL_W, fn(a + half * (_GL_X + 1.0))))
        dz = -integral if sign > 0 else integral
        vals.append(sign * dlt / dz)
    d1, d2 = deltas[-2], deltas[-1]
    return vals[-1] + (vals[-1] - vals[-2]) * d2 / (d1 - d2)


@dataclass
class ResidualReport:
    max_residual: float
    pairs: int
    transitions: list

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "pairs": self.pairs, "transitions": self.transitions}


def profile_residual(spec: ProblemSpec, profile: WaveProfile, c: float, traj=None,
                     mesh: int = 16) -> ResidualReport:
    """Integrated wave equation over a mesh of (z, z_hat) pairs.

    v(zh) - v(z) + c (U(zh) - U(z)) - (H(U(zh)) - H(U(z))) + int_z^zh g(U) = 0,
    v = -y(U)^(1/p').  The g integral is taken in z over the sampled profile.
    """
    pp = spec.p_prime
    z, U = profile.z, profile.U
    # cumulative integral of g(U(z)) in z via Gauss-Legendre on each sample interval
    zz = z
    a, b = zz[:-1], zz[1:]
    half = 0.5 * (b - a)
    nodes = a[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
    Un = profile.U_at(nodes.ravel())
    gv = spec.g.evaluate_array(np.clip(Un, 0.0, 1.0)).reshape(nodes.shape)
    G = np.concatenate([[0.0], np.cumsum(half * (gv @ _GL_W))])

    idx = np.unique(np.linspace(0, len(z) - 1, mesh).round().astype(int))
    for m, zeta in profile.zetas:
        idx = np.unique(np.concatenate([idx, [int(np.argmin(np.abs(z - zeta)))]]))
    yv = np.asarray(traj(U[idx]), dtype=float) if traj is not None else None
    if yv is None:
        # recover y from the slope: y = (d^(1/(p-1)) |U'|)^p
        q = 1.0 / (spec.p - 1.0)
        dv = np.array([_d_side(spec.d, u, "left") for u in U[idx]])
        yv = (dv ** q * np.abs(profile.Uprime_right[idx])) ** spec.p
    v = -np.maximum(yv, 0.0) ** (1.0 / pp)
    Hv = np.array([h_integral(spec, float(u)) for u in U[idx]])
    res = (v[None, :] - v[:, None] + c * (U[idx][None, :] - U[idx][:, None])
           - (Hv[None, :] - Hv[:, None]) + (G[idx][None, :] - G[idx][:, None]))

    transitions = []
    if traj is not None:
        fn = _integrand_factory(spec, traj)
        q = 1.0 / (spec.p - 1.0)
        for m, zeta in profile.zetas:
            k = spec.d.breakpoint_index(m)
            d_minus, d_plus = spec.d.limit(k, "right"), spec.d.limit(k, "left")
            # z slightly below zeta has U slightly above m
            up_minus = _richardson_slope(fn, m, +1.0)
            up_plus = _richardson_slope(fn, m, -1.0)
            flux = lambda dd, up: dd * abs(up) ** (spec.p - 2.0) * up
            transitions.append({"U": m, "zeta": zeta, "Uprime_minus": up_minus, "Uprime_plus": up_plus,
                                "flux_minus": flux(d_minus, up_minus), "flux_plus": flux(d_plus, up_plus),
                                "flux_mismatch": abs(flux(d_minus, up_minus) - flux(d_plus, up_plus)),
                                "derivative_jump": abs(up_minus - up_plus)})
    return ResidualReport(float(np.max(np.abs(res))), int(len(idx) ** 2), transitions)


__all__ = ["WaveProfile", "ProfileError", "ResidualReport", "reconstruct_profile", "classify_fronts",
           "profile_residual"]
