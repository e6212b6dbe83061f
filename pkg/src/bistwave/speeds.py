"""Threshold speeds c_F, c_B and the wave speed c* by monotone bisection."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

from ._numeric import extended
from .problem import ProblemSpec
from .quantities import DerivedQuantities, derive_quantities, speed_bounds
from .shooting import (A0, A1, CRITICAL, IntegratorOptions, classify_speed, solve_backward,
                       solve_forward)

UNIQUE, NO_WAVE, INCONCLUSIVE = "uniqueWaveExists", "noWaveAnyC", "inconclusive"
DOUBLING_CAP = 2.0 ** 20


class BracketError(ArithmeticError):
    """A shooting predicate contradicts the analytic bracket."""


@dataclass
class ThresholdResult:
    which: str
    value: float
    bracket: tuple
    history: list = field(default_factory=list)
    terminal_value: float = math.nan
    saturated: bool = False
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {"which": self.which, "value": extended(self.value),
                "analytic_bracket": [extended(x) for x in self.bracket],
                "terminal_value_at_s_star": self.terminal_value, "saturated": self.saturated,
                "evaluations": self.evaluations,
                "bracket_history": [[extended(a), extended(b)] for a, b in self.history]}


@dataclass
class SpeedReport:
    cF: float
    cB: float
    cstar: float | None
    verdict: str
    iterations: int
    evidence: list
    cF_result: ThresholdResult | None = None
    cB_result: ThresholdResult | None = None
    warnings: list = field(default_factory=list)
    bracket: tuple = (math.nan, math.nan)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "cF": extended(self.cF), "cB": extended(self.cB),
                "cStar": self.cstar, "cStar_bracket": [extended(x) for x in self.bracket],
                "iterations": self.iterations, "warnings": list(self.warnings),
                "evidence": [e.to_dict() for e in self.evidence]}


class _Memo:
    """Classification cache keyed by c on a tol/10 lattice."""

    def __init__(self, spec, opts, tol):
        self.spec, self.opts, self.quantum = spec, opts, tol / 10.0
        self._lock = threading.Lock()
        self._store = {}

    def classify(self, c: float):
        key = round(c / self.quantum)
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        result = classify_speed(self.spec, c, self.opts)
        with self._lock:
            self._store.setdefault(key, result)
        return result


def _forward_end(spec, opts, c):
    return solve_forward(spec, c, opts, t_stop=spec.s_star).terminal_value


def _backward_end(spec, opts, c):
    return solve_backward(spec, c, opts, t_stop=spec.s_star).terminal_value


def _threshold(spec: ProblemSpec, which: str, bracket: tuple, tol: float, opts: IntegratorOptions):
    """Shared bisection. The predicate is 'the sub-interval shot lands on zero at s*'.

    For c_F it holds for small c, for c_B for large c; ``sense`` maps the
    c_B case onto the c_F one by negating c.
    """
    sense = 1.0 if which == "cF" else -1.0
    end = _forward_end if which == "cF" else _backward_end
    res = ThresholdResult(which, math.nan, bracket)

    def pred(u):  # u = sense * c, predicate true for small u
        v = end(spec, opts, sense * u)
        res.evaluations += 1
        return v <= opts.match_tol, v

    lo, hi = sorted((sense * bracket[0], sense * bracket[1]))
    if hi == -math.inf:
        res.value = sense * -math.inf
        return res
    if lo == -math.inf:
        step, prev = 1.0, hi
        while True:
            cand = hi - step
            ok, _ = pred(cand)
            res.history.append(tuple(sorted((sense * cand, sense * prev))))
            if ok:
                lo = cand
                hi = prev
                break
            prev = cand
            step *= 2.0
            if step > DOUBLING_CAP:
                res.value = sense * -math.inf
                return res
    else:
        ok, v = pred(lo)
        if not ok:
            raise BracketError(f"{which}: shot misses zero at the analytic bracket end {sense * lo} "
                               f"(terminal value {v:.3e})")
    ok, v = pred(hi)
    if ok:
        res.value, res.terminal_value, res.saturated = sense * hi, v, True
        res.history.append(tuple(sorted((sense * lo, sense * hi))))
        return res
    while hi - lo > tol:
        res.history.append(tuple(sorted((sense * lo, sense * hi))))
        mid = 0.5 * (lo + hi)
        ok, _ = pred(mid)
        if ok:
            lo = mid
        else:
            hi = mid
    res.history.append(tuple(sorted((sense * lo, sense * hi))))
    res.value = sense * lo
    res.terminal_value = pred(lo)[1]
    return res


def threshold_cF(spec: ProblemSpec, tol: float = 1e-7, opts: IntegratorOptions | None = None,
                 dq: DerivedQuantities | None = None) -> ThresholdResult:
    """Largest c whose forward shot on [0, s*] ends on zero (within match_tol)."""
    opts = opts or IntegratorOptions()
    br = speed_bounds(spec, dq).cF
    return _threshold(spec, "cF", br, tol, opts)


def threshold_cB(spec: ProblemSpec, tol: float = 1e-7, opts: IntegratorOptions | None = None,
                 dq: DerivedQuantities | None = None) -> ThresholdResult:
    """Smallest c whose backward shot on [s*, 1] ends on zero (within match_tol)."""
    opts = opts or IntegratorOptions()
    br = speed_bounds(spec, dq).cB
    return _threshold(spec, "cB", br, tol, opts)


def _side(cl) -> int:
    """-1 if c lies left of the wave speed, +1 if right, 0 if exactly on it."""
    if cl.label == A0:
        return -1
    if cl.label == A1:
        return 1
    return -1 if cl.gap < 0 else 1 if cl.gap > 0 else 0


def critical_speed(spec: ProblemSpec, tol: float = 1e-7, opts: IntegratorOptions | None = None,
                   budget: int = 200) -> SpeedReport:
    """Bisect (c_F, c_B) on the A0/A1 classification."""
    from .conditions import check_necessary_speed

    opts = opts or IntegratorOptions()
    dq = derive_quantities(spec)
    br = speed_bounds(spec, dq)
    rF = threshold_cF(spec, tol, opts, dq)
    rB = threshold_cB(spec, tol, opts, dq)
    cF, cB = rF.value, rB.value
    report = SpeedReport(cF, cB, None, INCONCLUSIVE, 0, [], rF, rB)
    if cB - cF <= 2 * tol:
        report.verdict = NO_WAVE
        report.bracket = (cF, cB)
        return report
    memo = _Memo(spec, opts, tol)
    s_val = dq.h_star
    lo, hi = cF, cB
    # infinite ends: expand from h(s*) -+ 1 until the classification flips
    for end, want in (("lo", -1), ("hi", 1)):
        bound = lo if end == "lo" else hi
        if math.isfinite(bound):
            continue
        step = 1.0
        while True:
            c = s_val - step if end == "lo" else s_val + step
            cl = memo.classify(c)
            report.evidence.append(cl)
            if _side(cl) == want:
                if end == "lo":
                    lo = c
                else:
                    hi = c
                break
            step *= 2.0
            if step > DOUBLING_CAP:
                report.warnings.append(f"doubling search for the {end} end did not flip")
                report.bracket = (lo, hi)
                return report
    it = 0
    while hi - lo > tol:
        it += 1
        if it > budget:
            report.iterations = it - 1
            report.bracket = (lo, hi)
            report.warnings.append("iteration budget exhausted")
            return report
        mid = 0.5 * (lo + hi)
        cl = memo.classify(mid)
        report.evidence.append(cl)
        side = _side(cl)
        if side < 0:
            lo = mid
        elif side > 0:
            hi = mid
        else:
            lo = hi = mid
    cstar = 0.5 * (lo + hi)
    report.cstar, report.verdict, report.iterations, report.bracket = cstar, UNIQUE, it, (lo, hi)
    nec = check_necessary_speed(spec, cstar, role="wave", dq=dq)
    if nec.verdict != "satisfied":
        report.warnings.append(f"necessary speed condition: {nec.detail}")
    wlo, whi = br.cstar
    if not (wlo - tol <= cstar <= whi + tol):
        report.warnings.append(f"wave speed outside the analytic window ({wlo}, {whi})")
    report.warnings.extend(_monotone_violations(report.evidence))
    return report


def _monotone_violations(evidence) -> list:
    """Flag any A1 probe lying left of an A0 probe."""
    a0 = [e.c for e in evidence if e.label == A0]
    a1 = [e.c for e in evidence if e.label == A1]
    if a0 and a1 and max(a0) >= min(a1):
        return [f"classification order violated: A0 at {max(a0)} >= A1 at {min(a1)}"]
    return []


__all__ = ["ThresholdResult", "SpeedReport", "BracketError", "threshold_cF", "threshold_cB",
           "critical_speed", "UNIQUE", "NO_WAVE", "INCONCLUSIVE", "CRITICAL"]
