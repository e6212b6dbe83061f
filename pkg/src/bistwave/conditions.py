"""Tri-state checks of the existence, nonexistence and necessary-speed conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numeric import dyadic_offsets, extended, tail_limit
from .problem import ProblemSpec
from .quantities import (INCONCLUSIVE, SATISFIED, VIOLATED, DerivedQuantities,
                         derive_quantities, h_integral_array)

MARGIN = 1e-12
GRID_PER_UNIT = 10_000
EXCLUDE = 1e-4        # neighbourhood of s_star left out of the integral grids
NECESSARY_SLACK = 1e-6
BETA_MARGIN = 0.05


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    verdict: str
    witnesses: dict = field(default_factory=dict)
    limit_diagnostics: dict = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict:
        return {"condition": self.condition, "verdict": self.verdict, "detail": self.detail,
                "witnesses": _jsonable(self.witnesses), "limit_diagnostics": _jsonable(self.limit_diagnostics)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return extended(float(obj)) if not math.isnan(obj) else "nan"
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# -- grids ------------------------------------------------------------------

def condition_grid(spec: ProblemSpec) -> np.ndarray:
    """Uniform 1e4-per-unit grid plus breakpoints and geometric refinement at s*,
    with the EXCLUDE-neighbourhood of s* removed."""
    s = spec.s_star
    base = np.linspace(0.0, 1.0, GRID_PER_UNIT + 1)
    ref = np.geomspace(EXCLUDE, 0.1, 400)
    pts = np.concatenate([base, s - ref, s + ref, spec.breakpoints])
    pts = pts[(pts >= 0.0) & (pts <= 1.0) & (np.abs(pts - s) >= EXCLUDE)]
    return np.unique(pts)


def balance_integral(spec: ProblemSpec, ts) -> np.ndarray:
    """I(t) = integral from s* to t of (h(s*) - h)."""
    s = spec.s_star
    hs = spec.h(s)
    Hs = h_integral_array(spec, [s])[0]
    return hs * (np.asarray(ts) - s) - (h_integral_array(spec, ts) - Hs)


def _h_one_sided(spec: ProblemSpec, ts):
    """h on a grid using segment expressions (breakpoints get point values)."""
    return spec.h.evaluate_array(ts)


# -- ratio existence condition --------------------------------------------

def check_ratio_existence(spec: ProblemSpec) -> ConditionReport:
    """Either the left ratio's liminf is > -inf or the right ratio's limsup is < inf.

    left:  (s*-t)^(p'-1) (h(s*)-h(t)) / (-f(t)),  t -> s*-
    right: (t-s*)^(p'-1) (h(s*)-h(t)) / f(t),     t -> s*+
    """
    s, q = spec.s_star, spec.p_prime - 1.0
    hs = spec.h(s)
    off = dyadic_offsets()
    left_seg = [g for g in spec.segments if g.b <= s][-1]
    right_seg = [g for g in spec.segments if g.a >= s][0]
    with np.errstate(all="ignore"):
        tl = s - off
        rl = off ** q * (hs - left_seg.h_array(tl)) / (-left_seg.f_array(tl))
        tr = s + off
        rr = off ** q * (hs - right_seg.h_array(tr)) / right_seg.f_array(tr)
    left = tail_limit(off, rl, mode="inf")
    right = tail_limit(off, rr, mode="sup")

    def side_verdict(tl, bad):
        if not tl.converged:
            return INCONCLUSIVE
        return VIOLATED if tl.behaviour == bad else SATISFIED

    vl, vr = side_verdict(left, "-inf"), side_verdict(right, "+inf")
    if SATISFIED in (vl, vr):
        verdict = SATISFIED
    elif vl == VIOLATED and vr == VIOLATED:
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return ConditionReport(
        "ratio_existence", verdict,
        witnesses={"left": vl, "right": vr, "left_liminf": left.value, "right_limsup": right.value},
        limit_diagnostics={"left": left.to_dict(), "right": right.to_dict(),
                           "offsets": off.tolist(), "left_tail": rl.tolist(), "right_tail": rr.tolist()},
        detail="liminf of the left ratio > -inf or limsup of the right ratio < +inf")


# -- integral existence condition --------------------------------------------

def check_integral_existence(spec: ProblemSpec) -> ConditionReport:
    """Some t != s* with I(t) <= 0 (margin 1e-12)."""
    ts = condition_grid(spec)
    I = balance_integral(spec, ts)
    k = int(np.argmin(I))
    verdict = SATISFIED if I[k] <= MARGIN else VIOLATED
    left, right = ts < spec.s_star, ts > spec.s_star
    wit = {"t_min": float(ts[k]), "min_integral": float(I[k])}
    if np.any(left):
        wit["left_min"] = float(I[left].min())
    if np.any(right):
        wit["right_min"] = float(I[right].min())
    return ConditionReport("integral_existence", verdict, witnesses=wit,
                           detail="integral of h(s*)-h from s* to some t is <= 0")


# -- nonexistence ---------------------------------------------------------

def _nonexistence_rhs(spec: ProblemSpec, hs, h, I):
    p, pp = spec.p, spec.p_prime
    coef = 1.0 / (pp * p ** (pp / p))
    return coef * (hs - h) * np.maximum(I, 0.0) ** (pp / p)


def check_barrier_nonexistence(spec: ProblemSpec) -> ConditionReport:
    """I > 0 away from s*, the two f-inequalities, and the barrier K = [I/p]^p'."""
    s, p, pp = spec.s_star, spec.p, spec.p_prime
    ts = condition_grid(spec)
    I = balance_integral(spec, ts)
    hs = spec.h(s)
    h = _h_one_sided(spec, ts)
    f = spec.f_array(ts)
    rhs = _nonexistence_rhs(spec, hs, h, I)
    left, right = ts < s, ts > s
    rel = lambda a, b: MARGIN * np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    checks, wit = {}, {}

    kmin = int(np.argmin(I))
    checks["positive_integral"] = bool(I[kmin] > MARGIN)
    wit["positive_integral"] = {"t": float(ts[kmin]), "min": float(I[kmin])}

    both_zero = (f == 0.0) & (rhs == 0.0)
    okR = (rhs - f > rel(f, rhs)) | both_zero
    okL = (f - rhs > rel(f, rhs)) | both_zero
    for name, mask, ok in (("upper_f_bound", right, okR), ("lower_f_bound", left, okL)):
        bad = mask & ~ok
        checks[name] = not np.any(bad)
        if np.any(bad):
            i = int(np.nonzero(bad)[0][0])
            wit[name] = {"t": float(ts[i]), "f": float(f[i]), "bound": float(rhs[i])}
        else:
            gap = np.where(mask, np.abs(rhs - f), np.inf)
            i = int(np.argmin(gap))
            wit[name] = {"t": float(ts[i]), "min_gap": float(gap[i])}

    # barrier: K' > Gamma(t, K) left of s*, K' < Gamma(t, K) right of it
    base = np.maximum(I, 0.0) / p
    K = base ** pp
    dK = (pp / p) * (hs - h) * base ** (pp - 1.0)
    gamma = pp * ((hs - h) * K ** (1.0 / p) - f)
    okB = np.where(left, dK - gamma > rel(dK, gamma), gamma - dK > rel(dK, gamma)) | ((dK == 0) & (gamma == 0))
    checks["barrier"] = bool(np.all(okB))
    if not checks["barrier"]:
        i = int(np.nonzero(~okB)[0][0])
        wit["barrier"] = {"t": float(ts[i]), "K_prime": float(dK[i]), "rhs": float(gamma[i])}

    primary = ("positive_integral", "upper_f_bound", "lower_f_bound")
    if all(checks[k] for k in primary):
        verdict = SATISFIED
        detail = "all three inequalities hold on the grid"
        if not checks["barrier"]:
            verdict = INCONCLUSIVE
            detail = "inequalities hold but the barrier cross-check failed"
    else:
        verdict = VIOLATED
        detail = "failed: " + ", ".join(k for k in primary if not checks[k])
    wit["checks"] = checks
    return ConditionReport("barrier_nonexistence", verdict, witnesses=wit, detail=detail)


# -- necessary speed --------------------------------------------------------

def check_necessary_speed(spec: ProblemSpec, c: float, role: str = "wave",
                          dq: DerivedQuantities | None = None,
                          slack: float = NECESSARY_SLACK) -> ConditionReport:
    """Necessary bounds for a wave speed (role='wave') or a threshold ('cF', 'cB')."""
    if not math.isfinite(c):
        raise ValueError("c must be finite")
    dq = dq or derive_quantities(spec)
    s = spec.s_star
    rows = []

    def need(label, holds_strict, holds_loose, bound):
        rows.append({"condition": label, "bound": bound,
                     "status": SATISFIED if holds_strict else INCONCLUSIVE if holds_loose else VIOLATED})

    if role == "wave":
        need("c >= inf h", c >= dq.h_inf - slack, c >= dq.h_inf - slack, dq.h_inf)
        if abs(dq.f_integral) <= 1e-10:
            need("c <= sup h", c <= dq.h_sup + slack, c <= dq.h_sup + slack, dq.h_sup)
        elif dq.f_integral > 0:
            need("c > inf h", c > dq.h_inf + slack, c > dq.h_inf - slack, dq.h_inf)
    elif role == "cF":
        need("c <= h(s*)", c <= dq.h_star + slack, c <= dq.h_star + slack, dq.h_star)
        b = dq.H_star / s
        need("c < H(s*)/s*", c < b - slack, c < b + slack, b)
    elif role == "cB":
        need("c >= h(s*)", c >= dq.h_star - slack, c >= dq.h_star - slack, dq.h_star)
        b = (dq.H_one - dq.H_star) / (1.0 - s)
        need("c > (H(1)-H(s*))/(1-s*)", c > b + slack, c > b - slack, b)
    else:
        raise ValueError(f"unknown role {role!r}")
    status = [r["status"] for r in rows]
    verdict = VIOLATED if VIOLATED in status else INCONCLUSIVE if INCONCLUSIVE in status else SATISFIED
    failed = [r["condition"] for r in rows if r["status"] != SATISFIED]
    return ConditionReport("necessary_speed", verdict,
                           witnesses={"c": c, "role": role, "rows": rows, "integral_f": dq.f_integral},
                           detail=("not met: " + ", ".join(failed)) if failed else "all necessary bounds hold")


# -- derivative nonvanishing --------------------------------------------------

def check_derivative_nonvanishing(spec: ProblemSpec, window: int = 12) -> ConditionReport:
    """U' cannot vanish where U = s*: automatic for p <= 2, power-law test otherwise."""
    p = spec.p
    if p <= 2.0:
        return ConditionReport("derivative_nonvanishing", SATISFIED, detail="p <= 2")
    s = spec.s_star
    seg = [g for g in spec.segments if g.b <= s][-1]
    off = dyadic_offsets()[-window:]
    with np.errstate(all="ignore"):
        mf = -seg.f_array(s - off)
    limit = 1.0 / (p - 1.0)
    diag = {"offsets": off.tolist(), "minus_f": mf.tolist(), "threshold": limit - BETA_MARGIN}
    if not np.all(np.isfinite(mf)) or np.any(mf <= 0):
        return ConditionReport("derivative_nonvanishing", INCONCLUSIVE, limit_diagnostics=diag,
                               detail="-f is not positive along the tail")
    x, y = np.log(off), np.log(mf)
    fit = np.polyfit(x, y, 1)
    beta, logk = float(fit[0]), float(fit[1])
    resid = float(np.max(np.abs(y - (beta * x + logk))))
    diag.update(beta=beta, K=math.exp(logk), max_residual=resid)
    if resid > 0.02 * max(1.0, abs(beta) * (x.max() - x.min())):
        return ConditionReport("derivative_nonvanishing", INCONCLUSIVE, limit_diagnostics=diag,
                               detail="power-law fit of -f is unstable")
    if beta < limit - BETA_MARGIN and math.exp(logk) > 0:
        return ConditionReport("derivative_nonvanishing", SATISFIED, witnesses={"beta": beta},
                               limit_diagnostics=diag,
                               detail=f"-f decays like (s*-t)^{beta:.3f}, below 1/(p-1) = {limit:.3f}")
    return ConditionReport("derivative_nonvanishing", INCONCLUSIVE, witnesses={"beta": beta},
                           limit_diagnostics=diag,
                           detail="open case p > 2: decay exponent of -f is not below 1/(p-1)")


def check_all(spec: ProblemSpec) -> list:
    return [check_ratio_existence(spec), check_integral_existence(spec),
            check_barrier_nonexistence(spec), check_derivative_nonvanishing(spec)]


__all__ = ["ConditionReport", "check_ratio_existence", "check_integral_existence",
           "check_barrier_nonexistence", "check_necessary_speed", "check_derivative_nonvanishing",
           "check_all", "balance_integral", "condition_grid"]
