"""Hypothesis checks and the scalar quantities that feed the speed brackets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ._numeric import (TailLimit, cell_integrals, dyadic_offsets, extended,
                       integrate_endpoint_singular, tail_limit)
from .expr import ExpressionError
from .problem import ProblemSpec

SATISFIED, VIOLATED, INCONCLUSIVE = "satisfied", "violated", "inconclusive"

SAMPLES_PER_SEGMENT = 4096
SUP_GRID = 8192
ZERO_TOL = 1e-12
CONTINUITY_TOL = 1e-10


def speed_constant(p: float) -> float:
    """(p')^(1/p') p^(1/p), which equals 2 for p = 2."""
    if p == 2.0:
        return 2.0
    pp = p / (p - 1.0)
    return pp ** (1.0 / pp) * p ** (1.0 / p)


def eval_f(spec: ProblemSpec, t: float, side: str = "point") -> float:
    """f(t) = d(t)^(1/(p-1)) g(t)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    return spec.f(t, side)


def f_integral(spec: ProblemSpec, tol: float = 1e-10):
    """Integral of f over [0, 1] with endpoint substitutions on every segment.

    Returns ``(value, error_estimate, ok)``.
    """
    total, err, ok = 0.0, 0.0, True
    per = tol / len(spec.segments)
    for seg in spec.segments:
        try:
            v, e, good = integrate_endpoint_singular(seg.f, seg.a, seg.b, per)
        except (ArithmeticError, ValueError):
            return math.nan, math.inf, False
        total += v
        err += e
        ok = ok and good
    return total, err, ok


def h_integral(spec: ProblemSpec, t: float) -> float:
    """H(t), the integral of h from 0 to t."""
    total = 0.0
    for seg in spec.segments:
        if seg.a >= t:
            break
        b = min(seg.b, t)
        total += _gl_composite(seg.h_array, seg.a, b)
    return total


def _gl_composite(fun_array, a: float, b: float, pieces: int = 16) -> float:
    if b <= a:
        return 0.0
    return float(np.sum(cell_integrals(fun_array, np.linspace(a, b, pieces + 1))))


def h_integral_array(spec: ProblemSpec, ts) -> np.ndarray:
    """H evaluated on a sorted grid; exact composite Gauss-Legendre per cell."""
    ts = np.asarray(ts, dtype=float)
    grid = np.union1d(np.union1d(ts, spec.breakpoints), [0.0])
    cells = np.zeros(len(grid) - 1)
    mids = 0.5 * (grid[:-1] + grid[1:])
    for seg in spec.segments:
        mask = (mids > seg.a) & (mids < seg.b)
        if np.any(mask):
            idx = np.nonzero(mask)[0]
            sub = np.concatenate([grid[idx], [grid[idx[-1] + 1]]])
            cells[idx] = cell_integrals(seg.h_array, sub)
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    return np.interp(ts, grid, cum)


# -- extremes of h --------------------------------------------------------

def _segment_samples(a: float, b: float, n: int = SAMPLES_PER_SEGMENT) -> np.ndarray:
    """Closed-interval samples, clustered near both ends."""
    base = np.linspace(a, b, n)
    w = b - a
    tails = w * np.logspace(-12, -2, 64)
    return np.unique(np.concatenate([base, a + tails, b - tails]))


def h_extremes(spec: ProblemSpec, lo: float, hi: float):
    """(inf, sup) of h over [lo, hi], including breakpoint point values."""
    best_lo, best_hi = math.inf, -math.inf
    for seg in spec.segments:
        a, b = max(seg.a, lo), min(seg.b, hi)
        if b < a or (b == a and not (seg.a < a < seg.b)):
            continue
        ts = _segment_samples(a, b) if b > a else np.array([a])
        vals = seg.h_array(ts)
        for sign, k in ((1.0, int(np.argmin(vals))), (-1.0, int(np.argmax(vals)))):
            v = vals[k]
            l, r = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
            if r > l:
                res = optimize.minimize_scalar(lambda x: sign * seg.h(x), bounds=(l, r),
                                               method="bounded", options={"xatol": 1e-13})
                v = min(sign * v, res.fun) * sign
            if sign > 0:
                best_lo = min(best_lo, v)
            else:
                best_hi = max(best_hi, v)
    for k, b in enumerate(spec.h.breakpoints):
        if lo <= b <= hi:
            v = spec.h.point_value(k)
            best_lo, best_hi = min(best_lo, v), max(best_hi, v)
    return float(best_lo), float(best_hi)


# -- ratio suprema and tail limits ----------------------------------------

def _ratio_side(spec: ProblemSpec, side: str):
    """Ratio function on one side of s_star and its segments."""
    s, q = spec.s_star, spec.p_prime - 1.0
    if side == "left":
        segs = [g for g in spec.segments if g.b <= s]
        fn = lambda seg, t: -seg.f_array(t) / (s - t) ** q
        pt = lambda t: -spec.f(t) / (s - t) ** q
    else:
        segs = [g for g in spec.segments if g.a >= s]
        fn = lambda seg, t: seg.f_array(t) / (t - s) ** q
        pt = lambda t: spec.f(t) / (t - s) ** q
    return segs, fn, pt


def ratio_tail(spec: ProblemSpec, side: str, at: str = "s_star") -> TailLimit:
    """Tail of the ratio along t_k = s_star -+ 2^-k (or towards 0 / 1)."""
    segs, fn, _ = _ratio_side(spec, side)
    off = dyadic_offsets()
    if at == "s_star":
        seg = segs[-1] if side == "left" else segs[0]
        ts = spec.s_star - off if side == "left" else spec.s_star + off
    else:
        seg = segs[0] if side == "left" else segs[-1]
        ts = off if side == "left" else 1.0 - off
    with np.errstate(all="ignore"):
        try:
            vals = fn(seg, ts)
        except ExpressionError:
            vals = np.full(len(ts), np.nan)
    return tail_limit(off, vals, mode="inf")


@dataclass(frozen=True)
class RatioSup:
    value: float
    argmax: float
    limit_probe: TailLimit


def _sup_ratio(spec: ProblemSpec, side: str) -> RatioSup:
    segs, fn, pt = _ratio_side(spec, side)
    best, arg = -math.inf, math.nan
    for seg in segs:
        a, b = seg.a, seg.b
        w = b - a
        ts = np.unique(np.concatenate([
            np.linspace(a, b, SUP_GRID + 2)[1:-1],
            a + w * np.logspace(-12, -1, 512),
            b - w * np.logspace(-12, -1, 512)]))
        ts = ts[(ts > a) & (ts < b)]
        with np.errstate(all="ignore"):
            vals = fn(seg, ts)
        vals = np.where(np.isfinite(vals), vals, -np.inf)
        k = int(np.argmax(vals))
        v, x = float(vals[k]), float(ts[k])
        l, r = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
        if r > l:
            res = optimize.minimize_scalar(lambda u: -float(fn(seg, np.array([u]))[0]), bounds=(l, r),
                                           method="bounded", options={"xatol": 1e-14})
            if -res.fun > v:
                v, x = float(-res.fun), float(res.x)
        if v > best:
            best, arg = v, x
    s = spec.s_star
    lo, hi = (0.0, s) if side == "left" else (s, 1.0)
    for b in spec.breakpoints:
        if lo < b < hi:
            try:
                v = pt(b)
            except ExpressionError:
                continue
            if v > best:
                best, arg = v, b
    probe = ratio_tail(spec, side, "s_star")
    edge = ratio_tail(spec, side, "edge")
    for tl in (probe, edge):
        if tl.behaviour == "+inf":
            best, arg = math.inf, s if tl is probe else lo if side == "left" else hi
    return RatioSup(best, arg, probe)


def sup_ratios(spec: ProblemSpec) -> dict:
    """Suprema of -f/(s*-t)^(p'-1) on (0, s*) and f/(t-s*)^(p'-1) on (s*, 1)."""
    left, right = _sup_ratio(spec, "left"), _sup_ratio(spec, "right")
    return {"mu_tilde": left.value, "mu_hat": right.value, "left": left, "right": right}


def _liminf_value(tl: TailLimit) -> float:
    if tl.behaviour == "zero":
        return 0.0
    if tl.behaviour == "-inf":
        return 0.0  # a nonnegative ratio cannot go to -inf; treat as degenerate
    return tl.value


@dataclass(frozen=True)
class DerivedQuantities:
    hm: float
    hM: float
    h_star: float
    h_inf: float
    h_sup: float
    mu_tilde: float
    mu_hat: float
    nu_tilde: float
    nu_hat: float
    nu_tilde_tail: TailLimit = field(repr=False)
    nu_hat_tail: TailLimit = field(repr=False)
    H_star: float
    H_one: float
    f_integral: float
    f_integral_ok: bool
    s_star: float
    p: float

    @property
    def constant(self) -> float:
        return speed_constant(self.p)

    @property
    def limits_converged(self) -> bool:
        return self.nu_tilde_tail.converged and self.nu_hat_tail.converged

    def to_dict(self) -> dict:
        return {
            "h_m": self.hm, "h_M": self.hM, "h_star": self.h_star,
            "h_inf": self.h_inf, "h_sup": self.h_sup,
            "mu_tilde": extended(self.mu_tilde), "mu_hat": extended(self.mu_hat),
            "nu_tilde": extended(self.nu_tilde), "nu_hat": extended(self.nu_hat),
            "nu_tilde_tail": self.nu_tilde_tail.to_dict(), "nu_hat_tail": self.nu_hat_tail.to_dict(),
            "H_star": self.H_star, "H_one": self.H_one,
            "f_integral": self.f_integral, "f_integral_ok": self.f_integral_ok,
        }


def derive_quantities(spec: ProblemSpec) -> DerivedQuantities:
    s = spec.s_star
    hm, _ = h_extremes(spec, 0.0, s)
    _, hM = h_extremes(spec, s, 1.0)
    h_inf, h_sup = h_extremes(spec, 0.0, 1.0)
    sups = sup_ratios(spec)
    nt, nh = sups["left"].limit_probe, sups["right"].limit_probe
    nu_t, nu_h = _liminf_value(nt), _liminf_value(nh)
    if math.isnan(nu_t):
        nu_t = nt.value
    fi, _, ok = f_integral(spec)
    return DerivedQuantities(
        hm=hm, hM=hM, h_star=spec.h(s), h_inf=h_inf, h_sup=h_sup,
        mu_tilde=max(sups["mu_tilde"], nu_t), mu_hat=max(sups["mu_hat"], nu_h),
        nu_tilde=nu_t, nu_hat=nu_h, nu_tilde_tail=nt, nu_hat_tail=nh,
        H_star=h_integral(spec, s), H_one=h_integral(spec, 1.0),
        f_integral=fi, f_integral_ok=ok, s_star=s, p=spec.p)


@dataclass(frozen=True)
class SpeedBrackets:
    """Analytic brackets for the two threshold speeds and the wave speed."""

    cF: tuple
    cB: tuple
    cstar: tuple
    necessary_lower: float

    def to_dict(self) -> dict:
        pair = lambda x: [extended(x[0]), extended(x[1])]
        return {"cF": pair(self.cF), "cB": pair(self.cB), "cstar": pair(self.cstar),
                "necessary_lower": self.necessary_lower}


def _scaled_root(C: float, mu: float, pp: float) -> float:
    if math.isinf(mu):
        return math.inf
    return C * max(mu, 0.0) ** (1.0 / pp)


def speed_bounds(spec: ProblemSpec, dq: DerivedQuantities | None = None) -> SpeedBrackets:
    dq = dq or derive_quantities(spec)
    C, pp, s = speed_constant(spec.p), spec.p_prime, spec.s_star
    lo_F = dq.hm - _scaled_root(C, dq.mu_tilde, pp)
    hi_F = min(dq.h_star - _scaled_root(C, dq.nu_tilde, pp), dq.H_star / s)
    lo_B = max(dq.h_star + _scaled_root(C, dq.nu_hat, pp), (dq.H_one - dq.H_star) / (1.0 - s))
    hi_B = dq.hM + _scaled_root(C, dq.mu_hat, pp)
    return SpeedBrackets(cF=(lo_F, max(hi_F, lo_F)), cB=(min(lo_B, hi_B), hi_B),
                         cstar=(lo_F, hi_B), necessary_lower=dq.h_inf)


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    verdict: str
    witness: dict = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict, "witness": self.witness, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    f_integral: float

    @property
    def ok(self) -> bool:
        return all(c.verdict == SATISFIED for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "f_integral": self.f_integral, "checks": [c.to_dict() for c in self.checks]}


def _sign_violation(ts, vals, want: float):
    """First run of samples whose sign is not ``want``; returns witness or None."""
    bad = ~(np.sign(vals) == want)
    if not np.any(bad):
        return None
    idx = np.nonzero(bad)[0]
    return {"interval": [float(ts[idx[0]]), float(ts[idx[-1]])],
            "t": float(ts[idx[0]]), "value": float(vals[idx[0]]), "count": int(len(idx))}


def _sign_change_root(fun, ts, vals):
    """Refine the first sign change inside the samples with brentq."""
    s = np.sign(vals)
    flips = np.nonzero(s[:-1] * s[1:] < 0)[0]
    if len(flips) == 0:
        return None
    k = flips[0]
    try:
        return float(optimize.brentq(fun, ts[k], ts[k + 1], xtol=1e-14))
    except ValueError:
        return float(ts[k])


def _check_reaction(spec: ProblemSpec) -> HypothesisCheck:
    s = spec.s_star
    g = spec.g
    for k in range(1, len(g.breakpoints) - 1):
        l, r = g.limit(k, "left"), g.limit(k, "right")
        if abs(l - r) > CONTINUITY_TOL * max(1.0, abs(l)):
            return HypothesisCheck("reaction_bistable", VIOLATED,
                                   {"t": g.breakpoints[k], "left": l, "right": r}, "g jumps")
    for t in (0.0, s, 1.0):
        v = g(t, "point") if t in (0.0, 1.0) else g(t, "left")
        if abs(v) > ZERO_TOL:
            return HypothesisCheck("reaction_bistable", VIOLATED, {"t": t, "value": v},
                                   "g must vanish at 0, s_star and 1")
    for seg in spec.segments:
        ts = _segment_samples(seg.a, seg.b)[1:-1]
        vals = seg.g_expr.evaluate_array(ts)
        want = -1.0 if seg.b <= s else 1.0
        w = _sign_violation(ts, vals, want)
        if w is not None:
            root = _sign_change_root(seg.g_expr.scalar, ts, vals)
            if root is not None:
                w["sign_change"] = root
            return HypothesisCheck("reaction_bistable", VIOLATED, w,
                                   f"g must be {'negative' if want < 0 else 'positive'} on this side of s_star")
    return HypothesisCheck("reaction_bistable", SATISFIED)


def _check_diffusion(spec: ProblemSpec) -> HypothesisCheck:
    d = spec.d
    for k, b in enumerate(d.breakpoints):
        v = d.point_value(k)
        if v < 0 or (0 < k < len(d.breakpoints) - 1 and v <= 0):
            return HypothesisCheck("diffusion", VIOLATED, {"t": b, "value": v},
                                   "d must be nonnegative on [0,1] and positive inside")
        if 0 < k < len(d.breakpoints) - 1:
            low = min(d.limit(k, "left"), d.limit(k, "right"))
            if v > low + CONTINUITY_TOL:
                return HypothesisCheck("diffusion", VIOLATED, {"t": b, "value": v, "min_limit": low},
                                       "d is not lower semicontinuous")
    for k, expr in enumerate(d.segments):
        a, b = d.breakpoints[k], d.breakpoints[k + 1]
        ts = _segment_samples(a, b)[1:-1]
        vals = expr.evaluate_array(ts)
        w = _sign_violation(ts, vals, 1.0)
        if w is not None:
            return HypothesisCheck("diffusion", VIOLATED, w, "d must be positive inside (0,1)")
    return HypothesisCheck("diffusion", SATISFIED)


def _check_convection(spec: ProblemSpec) -> HypothesisCheck:
    h, s = spec.h, spec.s_star
    k = h.breakpoint_index(s)
    if k is not None:
        l, r = h.limit(k, "left"), h.limit(k, "right")
        if abs(l - r) > CONTINUITY_TOL * max(1.0, abs(l)):
            return HypothesisCheck("convection", VIOLATED, {"t": s, "left": l, "right": r},
                                   "h must be continuous at s_star")
    for j, expr in enumerate(h.segments):
        ts = _segment_samples(h.breakpoints[j], h.breakpoints[j + 1])
        vals = expr.evaluate_array(ts)
        if np.max(np.abs(vals)) > 1e12:
            i = int(np.argmax(np.abs(vals)))
            return HypothesisCheck("convection", VIOLATED, {"t": float(ts[i]), "value": float(vals[i])},
                                   "h must be bounded")
    return HypothesisCheck("convection", SATISFIED)


def _check_balance(spec: ProblemSpec, value: float, ok: bool) -> HypothesisCheck:
    w = {"integral": value}
    if not ok or not math.isfinite(value):
        return HypothesisCheck("integral_balance", INCONCLUSIVE, w, "quadrature of f did not converge")
    if value < -1e-10:
        return HypothesisCheck("integral_balance", VIOLATED, w, "integral of f is negative")
    return HypothesisCheck("integral_balance", SATISFIED, w)


def validate_problem(spec: ProblemSpec) -> ValidationReport:
    checks = []
    for fn in (_check_reaction, _check_diffusion, _check_convection):
        try:
            checks.append(fn(spec))
        except ExpressionError as exc:
            name = fn.__name__.removeprefix("_check_")
            name = {"reaction": "reaction_bistable"}.get(name, name)
            checks.append(HypothesisCheck(name, INCONCLUSIVE, {}, f"evaluation failed: {exc}"))
    value, _, ok = f_integral(spec)
    checks.append(_check_balance(spec, value, ok))
    return ValidationReport(tuple(checks), value)
