"""Forward and backward shooting for y' = p'[(c - h)(y+)^(1/p) - f].

The forward solve starts at y(0) = 0 and runs left to right.  Where f < 0
(left of s_star) the state is z = y^(1/p'), which obeys

    z' = (c - h) - f / z^(1/(p-1)),

a forward-stable equation that cannot collapse onto the spurious branch
y = 0.  Right of s_star the state is y itself and the solve stops when y
returns to zero.  The backward solve is the forward solve of the mirrored
problem (t -> 1 - t, h -> -h, g -> -g, c -> -c) read in reverse.

The stepper is a Dormand-Prince 5(4) pair with its free quartic dense output.
Every breakpoint of d, g, h and s_star itself is a step endpoint.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ._numeric import _GL_W, _GL_X
from .problem import ProblemSpec

__all__ = [
    "IntegratorOptions", "Trajectory", "Exit", "Classification", "CriticalTrajectory",
    "IntegrationError", "StepUnderflowError", "AmbiguousClassificationError",
    "solve_forward", "solve_backward", "classify_speed", "critical_trajectory",
    "A0", "A1", "CRITICAL",
]

A0, A1, CRITICAL = "A0", "A1", "CriticalCandidate"
HIT_ZERO, REACHED_END = "hitZero", "reachedEnd"
_Y, _Z = 0, 1

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (-71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200,
                                -22 / 525, 1 / 40)
# dense output: x(t + th*h) = x + h * sum_j q_j th^(j+1), q = K^T P
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)
_EPS = np.finfo(float).eps


class IntegrationError(ArithmeticError):
    """The shooting integration could not proceed."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (at t={t:.17g})")
        self.t = t


class StepUnderflowError(IntegrationError):
    pass


class AmbiguousClassificationError(IntegrationError):
    """Both trajectories leave the strip; tolerances are too loose."""

    def __init__(self, message: str, evidence: dict):
        super().__init__(message)
        self.evidence = evidence


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.05
    bootstrap_width: float = 1e-3
    zero_threshold: float = 1e-11
    match_tol: float = 1e-7
    delta_t: float = 1e-9
    max_steps: int = 200_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "bootstrap_width", "zero_threshold",
                     "match_tol", "delta_t"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.zero_threshold < 10 * self.abs_tol:
            raise ValueError("zero_threshold must be at least 10 * abs_tol")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Exit:
    t: float
    kind: str


class _Steps:
    """Growable record of accepted steps with dense-output coefficients."""

    __slots__ = ("t0", "h", "x0", "q", "mode")

    def __init__(self):
        self.t0, self.h, self.x0, self.q, self.mode = [], [], [], [], []

    def add(self, t0, h, x0, q, mode):
        self.t0.append(t0)
        self.h.append(h)
        self.x0.append(x0)
        self.q.append(q)
        self.mode.append(mode)

    def extend(self, other: "_Steps"):
        for name in self.__slots__:
            getattr(self, name).extend(getattr(other, name))


_Z_FLOOR = 1e-280
_Z_ABS_SCALE = 1e-6
BOOTSTRAP_TRIAL_STEPS = 4000
STIFF_START = 50.0


def _snap_width(t, t_end):
    """Distance below which the remainder of a run is skipped."""
    if t_end <= t:
        return 0.0
    return max(16.0 * _EPS * abs(t_end), min(1e-12, 1e-3 * (t_end - t)))


def _hermite(steps: _Steps, t, h, x0, x1, k0, k1):
    delta = (x1 - x0) / h
    steps.add(t, h, x0, (k0, 3.0 * delta - 2.0 * k0 - k1, k0 + k1 - 2.0 * delta, 0.0), _Z)


def _dense(x0, h, q, th):
    return x0 + h * th * (q[0] + th * (q[1] + th * (q[2] + th * q[3])))


class _Solver:
    """One forward shot at fixed speed c."""

    def __init__(self, spec: ProblemSpec, c: float, opts: IntegratorOptions):
        self.spec, self.c, self.opts = spec, float(c), opts
        self.pp = spec.p_prime
        self.q = 1.0 / (spec.p - 1.0)
        self.inv_p = 1.0 / spec.p
        self.nsteps = 0
        self.diagnostics = []
        self.seed_offset = 0.0
        self.step_cap = math.inf

    # right-hand sides ---------------------------------------------------

    def _zrhs(self, seg):
        c, fk, hk, q = self.c, seg.f, seg.h, self.q
        if q == 1.0:
            return lambda t, z: (c - hk(t)) - fk(t) / z
        return lambda t, z: (c - hk(t)) - fk(t) / z ** q

    def _yrhs(self, seg):
        c, fk, hk, pp, ip = self.c, seg.f, seg.h, self.pp, self.inv_p
        if ip == 0.5:
            return lambda t, y: pp * ((c - hk(t)) * (math.sqrt(y) if y > 0.0 else 0.0) - fk(t))
        return lambda t, y: pp * ((c - hk(t)) * (y ** ip if y > 0.0 else 0.0) - fk(t))

    # core stepper -------------------------------------------------------

    def _zjac(self, seg):
        fk, q = seg.f, self.q
        if q == 1.0:
            return lambda t, z: fk(t) / (z * z)
        return lambda t, z: q * fk(t) / z ** (q + 1.0)

    def _dopri(self, rhs, t, x, t_end, h, mode, steps, watch_zero=False, stiff_check=False, atol=None):
        """Integrate from t to t_end.

        Returns (t, x, h_next, t_zero or None, stiff).  With ``stiff_check``
        the run stops early once the stability bound has limited the step
        size for 15 net steps.
        """
        o = self.opts
        stiff_count = 0
        positive = mode == _Z
        rtol = o.rel_tol
        if atol is None:
            atol = o.abs_tol
        snap = _snap_width(t, t_end)
        try:
            k1 = rhs(t, x)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise IntegrationError(f"right-hand side undefined: {exc}", t) from None
        h = min(h, o.max_step)
        while t < t_end:
            remaining = t_end - t
            if remaining <= snap:
                t = t_end
                break
            if h >= remaining or t + h >= t_end:
                h = remaining
            if h <= 4.0 * _EPS * abs(t) or h < 1e-300:
                raise StepUnderflowError("step size underflow", t)
            self.nsteps += 1
            if self.nsteps > min(o.max_steps, self.step_cap):
                raise IntegrationError("step limit exceeded", t)
            try:
                ok = True
                x2 = x + h * _A21 * k1
                if positive and x2 <= 0.0:
                    ok = False
                else:
                    k2 = rhs(t + _C2 * h, x2)
                    x3 = x + h * (_A31 * k1 + _A32 * k2)
                    if positive and x3 <= 0.0:
                        ok = False
                    else:
                        k3 = rhs(t + _C3 * h, x3)
                        x4 = x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3)
                        if positive and x4 <= 0.0:
                            ok = False
                        else:
                            k4 = rhs(t + _C4 * h, x4)
                            x5 = x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
                            if positive and x5 <= 0.0:
                                ok = False
                            else:
                                k5 = rhs(t + _C5 * h, x5)
                                x6 = x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)
                                if positive and x6 <= 0.0:
                                    ok = False
                                else:
                                    k6 = rhs(t + h, x6)
                                    xn = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
                                    if (positive and xn <= 0.0) or not math.isfinite(xn):
                                        ok = False
                                    else:
                                        k7 = rhs(t + h, xn)
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise IntegrationError(f"right-hand side undefined: {exc}", t) from None
            if not ok:
                # repeated positivity rejections signal a stiff decay towards z = 0
                if stiff_check:
                    stiff_count += 1
                    if stiff_count >= 15:
                        return t, x, h, None, True
                h *= 0.5
                continue
            if stiff_check and xn != x6:
                if h * abs((k7 - k6) / (xn - x6)) > 3.25:
                    stiff_count += 1
                    if stiff_count >= 15:
                        return t, x, h, None, True
                elif stiff_count > 0:
                    stiff_count -= 1
            err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
            scale = atol + rtol * max(abs(x), abs(xn))
            en = abs(err) / scale
            if not math.isfinite(en):
                h *= 0.2
                continue
            if en > 1.0:
                h *= max(0.2, 0.9 * en ** -0.2)
                continue
            ks = (k1, k2, k3, k4, k5, k6, k7)
            q = tuple(sum(ks[i] * _P[i][j] for i in (0, 2, 3, 4, 5, 6)) for j in range(4))
            steps.add(t, h, x, q, mode)
            if watch_zero:
                tz = self._zero_in_step(t, h, x, q, xn)
                if tz is not None:
                    return tz, 0.0, h, tz, False
            t_next = t + h
            t = t_end if h == remaining else t_next
            x = xn
            k1 = k7
            h *= 10.0 if en == 0.0 else min(10.0, max(0.2, 0.9 * en ** -0.2))
        return t, x, h, None, False

    def _implicit(self, rhs, jac, t, x, t_end, h, steps, atol):
        """Stiff fallback for the z equation: 2-stage Radau IIA (order 3).

        Error is estimated by step doubling; each half step is stored with a
        cubic Hermite interpolant.
        """
        o = self.opts
        rtol = o.rel_tol
        snap = _snap_width(t, t_end)
        try:
            while t < t_end:
                remaining = t_end - t
                if remaining <= snap:
                    t = t_end
                    break
                if h >= remaining:
                    h = remaining
                if h <= 4.0 * _EPS * abs(t) or h < 1e-300:
                    raise StepUnderflowError("step size underflow (implicit)", t)
                self.nsteps += 1
                if self.nsteps > min(o.max_steps, self.step_cap):
                    raise IntegrationError("step limit exceeded", t)
                full = self._radau_step(rhs, jac, t, x, h, atol)
                half = full is not None and self._radau_step(rhs, jac, t, x, 0.5 * h, atol)
                both = half and self._radau_step(rhs, jac, t + 0.5 * h, half, 0.5 * h, atol)
                if not both:
                    h *= 0.5
                    continue
                en = abs(both - full) / 7.0 / (atol + rtol * max(abs(x), abs(both)))
                if en > 1.0:
                    h *= max(0.2, 0.9 * en ** -0.25)
                    continue
                k0, km, k1 = rhs(t, x), rhs(t + 0.5 * h, half), rhs(t + h, both)
                _hermite(steps, t, 0.5 * h, x, half, k0, km)
                _hermite(steps, t + 0.5 * h, 0.5 * h, half, both, km, k1)
                t = t_end if h == remaining else t + h
                x = both
                h *= 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.25))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise IntegrationError(f"right-hand side undefined: {exc}", t) from None
        return t, x, h

    def _radau_step(self, rhs, jac, t, x, h, atol):
        """One Radau IIA step by damped Newton; None if it fails or leaves z > 0."""
        t1, t2 = t + h / 3.0, t + h
        X1 = X2 = x
        tol = 1e-3 * (atol + self.opts.rel_tol * abs(x))
        for _ in range(25):
            F1, F2 = rhs(t1, X1), rhs(t2, X2)
            J1, J2 = jac(t1, X1), jac(t2, X2)
            R1 = X1 - x - h * (5.0 / 12.0 * F1 - 1.0 / 12.0 * F2)
            R2 = X2 - x - h * (0.75 * F1 + 0.25 * F2)
            m11, m12 = 1.0 - h * 5.0 / 12.0 * J1, h / 12.0 * J2
            m21, m22 = -0.75 * h * J1, 1.0 - 0.25 * h * J2
            det = m11 * m22 - m12 * m21
            if det == 0.0 or not math.isfinite(det):
                return None
            d1 = (R1 * m22 - m12 * R2) / det
            d2 = (m11 * R2 - m21 * R1) / det
            lam = 1.0
            while X1 - lam * d1 <= 0.0 or X2 - lam * d2 <= 0.0:
                lam *= 0.5
                if lam < 1e-6:
                    return None
            X1, X2 = X1 - lam * d1, X2 - lam * d2
            if abs(d1) + abs(d2) <= tol and lam == 1.0:
                # the 1/z term admits spurious roots near zero; cap the change per step
                if not (0.25 * x <= X2 <= 4.0 * x and 0.25 * x <= X1 <= 4.0 * x):
                    return None
                return X2
        return None

    def _integrate_z(self, seg, t, z, t_end, h, steps, atol=None):
        """z-mode run; ``atol`` defaults to a floor well below the y tolerance."""
        atol = self.opts.abs_tol * _Z_ABS_SCALE if atol is None else atol
        rhs = self._zrhs(seg)
        jac = self._zjac(seg)
        if abs(jac(t, z)) * (t - seg.a) > STIFF_START:
            # already stiff at the start: the explicit pair would crawl at h|J| << 1
            return self._implicit(rhs, jac, t, z, t_end, h, steps, atol)
        t, z, h, _, stiff = self._dopri(rhs, t, z, t_end, h, _Z, steps, stiff_check=True, atol=atol)
        if stiff:
            self.diagnostics.append(f"stiff near t={t:.6g}: switched to implicit steps")
            t, z, h = self._implicit(rhs, self._zjac(seg), t, z, t_end, h, steps, atol)
        return t, z, h

    @staticmethod
    def _zero_in_step(t, h, x0, q, xn):
        ths = (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)
        prev = 0.0
        for th in ths:
            v = xn if th == 1.0 else _dense(x0, h, q, th)
            if v <= 0.0:
                if v == 0.0 and th == 1.0:
                    return float(t + h)
                fn = lambda s: _dense(x0, h, q, s)
                try:
                    root = optimize.brentq(fn, prev, th, xtol=1e-12 / h if h > 0 else 1e-12,
                                           rtol=4 * _EPS)
                except ValueError:
                    root = th
                return float(t + root * h)
            prev = th
        return None

    # segment drivers ----------------------------------------------------

    def _vanishes(self, seg) -> bool:
        ts = np.linspace(seg.a, seg.b, 17)
        return all(seg.f(float(t)) == 0.0 for t in ts)

    def _lead_integral(self, seg, a, b):
        half = 0.5 * (b - a)
        return half * sum(w * seg.f(a + half * (x + 1.0)) for x, w in zip(_GL_X, _GL_W))

    def _seed(self, seg, a, t0):
        """Starting z at t0 from the local balance z/s = kappa + F / z^q.

        s = t0 - a, kappa = c - h and F the mean of -f over [a, t0].  The left
        side grows and the right side shrinks in z, so the positive root is
        unique; it lands on the slow branch when kappa < 0 and on the linear
        branch when kappa > 0.
        """
        s = t0 - a
        F = -self._lead_integral(seg, a, t0) / s
        if not F > 0.0:
            return None
        kappa = self.c - seg.h(t0)
        if self.q == 1.0:
            disc = math.sqrt(kappa * kappa * s * s + 4.0 * F * s)
            if kappa >= 0.0:
                return 0.5 * (kappa * s + disc)
            return 2.0 * F * s / (disc - kappa * s)
        g = lambda lz: math.exp(lz) / s - kappa - F * math.exp(-self.q * lz)
        lo = hi = math.log(max(F * s, 1e-300)) / (1.0 + self.q)
        while g(lo) > 0.0:
            lo -= 4.0
        while g(hi) < 0.0:
            hi += 4.0
        return math.exp(optimize.brentq(g, lo, hi, xtol=1e-14))

    def _bootstrap(self, seg, b, steps: _Steps):
        """Leave y = 0 at seg.a along the positive branch; returns (t, z, h)."""
        a, o = seg.a, self.opts
        width = min(o.bootstrap_width, 0.25 * (b - a))
        t_h = a + width
        prev, best = None, None
        for k in (10, 20, 30, 40, 50):
            t0 = a + width * 2.0 ** -k
            if t0 <= a:
                break
            z0 = self._seed(seg, a, t0)
            if z0 is None:
                continue
            trial = _Steps()
            trial.add(a, t0 - a, 0.0, (z0 / (t0 - a), 0.0, 0.0, 0.0), _Z)
            # relative control only: z is tiny but strictly positive here
            self.step_cap = self.nsteps + BOOTSTRAP_TRIAL_STEPS
            try:
                t1, z1, hn = self._integrate_z(seg, t0, z0, t_h, 0.1 * (t0 - a), trial, atol=_Z_FLOOR)
            except IntegrationError:
                if best is None:
                    raise
                # deeper seeds drown in roundoff of the coefficients; keep the last handoff
                self.diagnostics.append(f"bootstrap stopped at seed offset {t0 - a:.3e}")
                break
            finally:
                self.step_cap = math.inf
            best = (t1, z1, hn, trial)
            if prev is not None and abs(z1 - prev) <= o.rel_tol * abs(z1) + o.abs_tol:
                break
            prev = z1
        else:
            self.diagnostics.append("bootstrap handoff did not settle to rel_tol")
        if best is None:
            raise IntegrationError("cannot leave zero: f does not become negative", a)
        t1, z1, hn, trial = best
        if a == 0.0:
            self.seed_offset = trial.t0[1] - a if len(trial.t0) > 1 else width
        steps.extend(trial)
        return t1, z1, hn

    def run(self, t_stop: float = 1.0):
        spec, o = self.spec, self.opts
        s = spec.s_star
        steps = _Steps()
        t, y, h = 0.0, 0.0, o.max_step
        exit_ = None
        for seg in spec.segments:
            if seg.a >= t_stop:
                break
            b = min(seg.b, t_stop)
            t = seg.a
            if seg.b <= s:
                if y <= 0.0:
                    if self._vanishes(seg):
                        if any(self.c > seg.h(float(u)) for u in np.linspace(seg.a, seg.b, 9)):
                            self.diagnostics.append(
                                f"f vanishes on [{seg.a}, {seg.b}] with c > h: zero branch selected")
                        steps.add(seg.a, b - seg.a, 0.0, (0.0, 0.0, 0.0, 0.0), _Y)
                        y = 0.0
                        continue
                    t, z, h = self._bootstrap(seg, b, steps)
                else:
                    z = y ** (1.0 / self.pp)
                t, z, h = self._integrate_z(seg, t, z, b, h, steps)
                y = z ** self.pp
            else:
                if y <= 0.0:
                    exit_ = Exit(seg.a, HIT_ZERO)
                    y = 0.0
                    break
                t, y, h, tz, _ = self._dopri(self._yrhs(seg), t, y, b, h, _Y, steps, watch_zero=True)
                if tz is not None:
                    exit_ = Exit(tz, HIT_ZERO)
                    y = 0.0
                    break
            h = max(h, 1e-6)
        if exit_ is None:
            exit_ = Exit(t_stop, REACHED_END)
        return steps, exit_, y


class Trajectory:
    """A forward or backward shooting solution with dense output.

    All public coordinates are in the original t variable.  ``exit`` holds
    the stopping time and whether y returned to zero or the end was reached.
    """

    def __init__(self, spec: ProblemSpec, c: float, direction: str, steps: _Steps, exit_: Exit,
                 terminal: float, opts: IntegratorOptions, diagnostics=(), mirrored=False):
        self.spec, self.c, self.direction, self.opts = spec, float(c), direction, opts
        self.exit = exit_
        self.seed_offset = 0.0  # below this distance from the start y is the bootstrap lead
        self.terminal_value = float(terminal)
        self.diagnostics = tuple(diagnostics)
        self._mirror = mirrored
        self._t0 = np.asarray(steps.t0, dtype=float)
        self._h = np.asarray(steps.h, dtype=float)
        self._x0 = np.asarray(steps.x0, dtype=float)
        self._q = np.asarray(steps.q, dtype=float).reshape(-1, 4)
        self._mode = np.asarray(steps.mode, dtype=int)
        self._pp = spec.p_prime
        self._s_end = (1.0 - exit_.t) if mirrored else exit_.t

    # internal coordinate (s = 1 - t for backward)
    def _eval_internal(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros(s.shape)
        if len(self._t0) == 0:
            return out
        idx = np.clip(np.searchsorted(self._t0, s, side="right") - 1, 0, len(self._t0) - 1)
        h = self._h[idx]
        th = np.where(h > 0, (s - self._t0[idx]) / np.where(h > 0, h, 1.0), 0.0)
        th = np.clip(th, 0.0, 1.0)
        q = self._q[idx]
        x = self._x0[idx] + h * th * (q[:, 0] + th * (q[:, 1] + th * (q[:, 2] + th * q[:, 3])))
        zmode = self._mode[idx] == _Z
        out = np.where(zmode, np.maximum(x, 0.0) ** self._pp, np.maximum(x, 0.0))
        out = np.where((s > self._s_end) | (s < 0.0), 0.0, out)
        return out

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = 1.0 - t if self._mirror else t
        out = self._eval_internal(s)
        return out if t.ndim else float(out[0])

    @property
    def nodes(self):
        """(t, y) at step endpoints, sorted by t."""
        s = np.concatenate([self._t0, [self._s_end]])
        s = s[s <= self._s_end]
        y = self._eval_internal(s)
        t = 1.0 - s if self._mirror else s
        order = np.argsort(t, kind="stable")
        return t[order], y[order]

    @property
    def positivity_interval(self) -> tuple:
        if self.direction == "forward":
            return (0.0, self.exit.t)
        return (self.exit.t, 1.0)

    @property
    def exited(self) -> bool:
        return self.exit.kind == HIT_ZERO

    @property
    def step_count(self) -> int:
        return len(self._t0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "y"])
        for t, y in zip(*self.nodes):
            w.writerow([f"{t:.12e}", f"{y:.12e}"])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"direction": self.direction, "c": self.c, "exit": {"t": self.exit.t, "kind": self.exit.kind},
                "terminal_value": self.terminal_value, "positivity_interval": list(self.positivity_interval),
                "steps": self.step_count, "diagnostics": list(self.diagnostics)}

    def to_json(self) -> str:
        return json.dumps(self.metadata(), indent=2)


def solve_forward(spec: ProblemSpec, c: float, opts: IntegratorOptions | None = None,
                  t_stop: float = 1.0) -> Trajectory:
    """Forward shot from y(0) = 0, stopping early if y returns to zero."""
    opts = opts or IntegratorOptions()
    solver = _Solver(spec, c, opts)
    steps, exit_, terminal = solver.run(t_stop)
    traj = Trajectory(spec, c, "forward", steps, exit_, terminal, opts, solver.diagnostics)
    traj.seed_offset = solver.seed_offset
    return traj


def solve_backward(spec: ProblemSpec, c: float, opts: IntegratorOptions | None = None,
                   t_stop: float = 0.0) -> Trajectory:
    """Backward shot from y(1) = 0, computed on the mirrored problem."""
    opts = opts or IntegratorOptions()
    solver = _Solver(spec.mirrored, -c, opts)
    steps, exit_, terminal = solver.run(1.0 - t_stop)
    back_exit = Exit(1.0 - exit_.t, exit_.kind)
    traj = Trajectory(spec, c, "backward", steps, back_exit, terminal, opts, solver.diagnostics,
                      mirrored=True)
    traj.seed_offset = solver.seed_offset
    return traj


@dataclass(frozen=True)
class Classification:
    c: float
    label: str
    forward_exit: Exit
    backward_exit: Exit
    forward_terminal: float
    backward_terminal: float
    gap: float
    notes: tuple = field(default=())

    def to_dict(self) -> dict:
        return {"c": self.c, "label": self.label,
                "forward_exit": {"t": self.forward_exit.t, "kind": self.forward_exit.kind},
                "backward_exit": {"t": self.backward_exit.t, "kind": self.backward_exit.kind},
                "forward_terminal": self.forward_terminal, "backward_terminal": self.backward_terminal,
                "gap_at_s_star": self.gap, "notes": list(self.notes)}


def classify_speed(spec: ProblemSpec, c: float, opts: IntegratorOptions | None = None) -> Classification:
    """Sort c into A0 (forward dies early), A1 (backward dies early) or critical.

    ``gap`` is y_forward(s*) - y_backward(s*), which increases with c and
    vanishes at the wave speed.  It breaks ties when both shots behave alike.
    """
    opts = opts or IntegratorOptions()
    fw = solve_forward(spec, c, opts)
    bw = solve_backward(spec, c, opts)
    s = spec.s_star
    gap = fw(s) - bw(s)
    fw_in = fw.exited and fw.exit.t < 1.0 - opts.delta_t
    bw_in = bw.exited and bw.exit.t > opts.delta_t
    notes = []
    evidence = dict(c=c, forward_exit=fw.exit, backward_exit=bw.exit,
                    forward_terminal=fw.terminal_value, backward_terminal=bw.terminal_value, gap=gap)
    if abs(gap) <= opts.match_tol:
        label = CRITICAL
        if fw_in or bw_in:
            notes.append("halves meet at s_star; an unstable continuation left the strip near an end")
    elif fw_in and bw_in:
        raise AmbiguousClassificationError(
            f"both shots leave the strip at c={c} (forward t={fw.exit.t}, backward t={bw.exit.t}) "
            f"although the halves differ by {gap:.3e} at s_star", evidence)
    elif fw_in:
        label = A0
    elif bw_in:
        label = A1
    else:
        notes.append("neither shot exited; classified by the gap at s_star")
        label = A0 if gap < 0 else A1
    return Classification(c, label, fw.exit, bw.exit, fw.terminal_value, bw.terminal_value, gap,
                          tuple(notes))


class CriticalTrajectory:
    """Forward shot on [0, s*] joined to the backward shot on [s*, 1]."""

    def __init__(self, forward: Trajectory, backward: Trajectory):
        self.forward, self.backward = forward, backward
        self.spec, self.c = forward.spec, forward.c
        s = self.spec.s_star
        self.mismatch = forward(s) - backward(s)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = self.spec.s_star
        out = np.where(t <= s, self.forward(np.minimum(t, s)), self.backward(np.maximum(t, s)))
        return out if t.ndim else float(out)

    @property
    def terminal_values(self) -> tuple:
        return self.forward.terminal_value, self.backward.terminal_value

    @property
    def nodes(self):
        s = self.spec.s_star
        tf, yf = self.forward.nodes
        tb, yb = self.backward.nodes
        keep_b = tb > s
        return np.concatenate([tf, tb[keep_b]]), np.concatenate([yf, yb[keep_b]])


def critical_trajectory(spec: ProblemSpec, c: float, opts: IntegratorOptions | None = None) -> CriticalTrajectory:
    """Both stable halves at speed c; near the wave speed they meet at s*."""
    opts = opts or IntegratorOptions()
    s = spec.s_star
    fw = solve_forward(spec, c, opts, t_stop=s)
    bw = solve_backward(spec, c, opts, t_stop=s)
    return CriticalTrajectory(fw, bw)
