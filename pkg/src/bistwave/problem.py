"""Problem definition: exponent, unstable zero and the three coefficients.

A problem file (TOML or JSON) looks like::

    name = "huxley"
    p = 2.0
    s_star = 0.25

    [d]
    breakpoints = [0.0, 1.0]
    segments = ["1"]

    [g]
    breakpoints = [0.0, 1.0]
    segments = ["t*(t-0.25)*(1-t)"]

    [h]
    breakpoints = [0.0, 0.5, 1.0]
    segments = ["0", "1"]
    values = { "0.5" = 0.0 }

``values`` keys are breakpoint locations written as strings.  A coefficient may
also be given as a bare expression string, meaning one segment on [0, 1].
Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .expr import ExpressionError, PiecewiseFunction

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = ["ProblemSpec", "ProblemFormatError", "Segment", "load_problem", "problem_from_dict"]

_TOP_KEYS = {"name", "p", "s_star", "d", "g", "h"}
_COEF_KEYS = {"breakpoints", "segments", "values"}
_DEFAULT_RULE = {"d": "min", "g": "right", "h": "right"}


class ProblemFormatError(ValueError):
    """The problem file could not be turned into a :class:`ProblemSpec`."""


@dataclass(frozen=True)
class Segment:
    """One open interval of the merged breakpoint set with fast callables.

    ``f`` and ``h`` are raw scalar callables valid on the closed interval
    (they evaluate the continuous extension of the segment expressions).
    They may raise ``ValueError``/``ZeroDivisionError``/``OverflowError``.
    """

    a: float
    b: float
    f: object
    h: object
    d_expr: object = None
    g_expr: object = None
    h_expr: object = None
    d_exponent: float = 1.0

    def f_array(self, t):
        dval = self.d_expr.evaluate_array(t)
        if self.d_exponent != 1.0:
            dval = dval ** self.d_exponent
        return dval * self.g_expr.evaluate_array(t)

    def h_array(self, t):
        return self.h_expr.evaluate_array(t)


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    s_star: float
    d: PiecewiseFunction
    g: PiecewiseFunction
    h: PiecewiseFunction
    name: str = ""

    def __post_init__(self):
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ValueError(f"p must be a finite number > 1, got {self.p}")
        if not 0.0 < self.s_star < 1.0:
            raise ValueError(f"s_star must lie in (0, 1), got {self.s_star}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "s_star", float(self.s_star))

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def d_exponent(self) -> float:
        """Exponent 1/(p-1) applied to d when forming f."""
        return 1.0 / (self.p - 1.0)

    # -- coefficient evaluation ------------------------------------------

    def _dpow(self, dval: float) -> float:
        if dval < 0:
            raise ExpressionError(f"diffusion coefficient negative ({dval})")
        if self.p == 2.0:
            return dval
        return dval ** self.d_exponent

    def f(self, t: float, side: str = "point") -> float:
        """f = d^(1/(p-1)) g, with ``side`` applied to both factors."""
        gval = self.g(t, side)
        try:
            dval = self.d(t, side)
        except ExpressionError:
            if gval == 0.0:
                raise ExpressionError(
                    f"inconsistent problem: d is singular at t={t} where g vanishes") from None
            raise
        return self._dpow(dval) * gval

    def f_array(self, t):
        import numpy as np

        t = np.asarray(t, dtype=float)
        dval = self.d.evaluate_array(t)
        if np.any(dval < 0):
            raise ExpressionError("diffusion coefficient negative on grid")
        if self.p != 2.0:
            dval = dval ** self.d_exponent
        return dval * self.g.evaluate_array(t)

    @cached_property
    def breakpoints(self) -> tuple:
        """Sorted union of all coefficient breakpoints and s_star."""
        pts = set(self.d.breakpoints) | set(self.g.breakpoints) | set(self.h.breakpoints)
        pts.add(self.s_star)
        return tuple(sorted(pts))

    @cached_property
    def segments(self) -> tuple:
        out = []
        q = self.d_exponent
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            mid = 0.5 * (a + b)
            de = self.d.segments[self.d.segment_index(mid)]
            ge = self.g.segments[self.g.segment_index(mid)]
            he = self.h.segments[self.h.segment_index(mid)]
            dk, gk, hk = de.scalar, ge.scalar, he.scalar
            if self.p == 2.0:
                fk = (lambda dk, gk: lambda t: dk(t) * gk(t))(dk, gk)
            else:
                fk = (lambda dk, gk: lambda t: math.pow(dk(t), q) * gk(t))(dk, gk)
            out.append(Segment(a, b, fk, hk, de, ge, he, q))
        return tuple(out)

    def segment_at(self, t: float) -> Segment:
        for seg in self.segments:
            if seg.a <= t < seg.b:
                return seg
        return self.segments[-1]

    # -- transformations -------------------------------------------------

    @cached_property
    def mirrored(self) -> "ProblemSpec":
        """The problem seen through t -> 1 - t (h -> -h, g -> -g).

        A backward solution of this problem at speed c is the forward solution
        of the mirrored problem at speed -c, read in reverse.
        """
        return ProblemSpec(self.p, 1.0 - self.s_star, self.d.mirrored(),
                           self.g.mirrored(-1.0), self.h.mirrored(-1.0),
                           name=f"{self.name}~mirror" if self.name else "mirror")

    def with_h(self, h: PiecewiseFunction) -> "ProblemSpec":
        return ProblemSpec(self.p, self.s_star, self.d, self.g, h, self.name)

    def shifted(self, kappa: float) -> "ProblemSpec":
        """Same problem with h replaced by h + kappa."""
        from .expr import Binary, Const, Expression

        h = self.h.map(lambda e: Expression(Binary("+", e.ast, Const(float(kappa)))))
        vals = {k: v + kappa for k, v in self.h.values.items()}
        return self.with_h(PiecewiseFunction(h.breakpoints, h.segments, vals, h.default))

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        def coef(pf: PiecewiseFunction) -> dict:
            out = {"breakpoints": list(pf.breakpoints),
                   "segments": [s.to_source() for s in pf.segments]}
            if pf.values:
                out["values"] = {repr(pf.breakpoints[k]): v for k, v in sorted(pf.values.items())}
            return out

        data = {"p": self.p, "s_star": self.s_star,
                "d": coef(self.d), "g": coef(self.g), "h": coef(self.h)}
        if self.name:
            data["name"] = self.name
        return data

    @cached_property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _coefficient(key: str, raw) -> PiecewiseFunction:
    if isinstance(raw, str):
        raw = {"segments": [raw]}
    if not isinstance(raw, dict):
        raise ProblemFormatError(f"[{key}] must be a table or an expression string")
    unknown = set(raw) - _COEF_KEYS
    if unknown:
        raise ProblemFormatError(f"[{key}] unknown keys: {sorted(unknown)}")
    if "segments" not in raw:
        raise ProblemFormatError(f"[{key}] missing 'segments'")
    bps = raw.get("breakpoints", [0.0, 1.0])
    segs = raw["segments"]
    if isinstance(segs, str):
        segs = [segs]
    values = {}
    for loc, val in dict(raw.get("values", {})).items():
        try:
            x = float(loc)
        except ValueError:
            raise ProblemFormatError(f"[{key}] values key {loc!r} is not a number") from None
        matches = [i for i, b in enumerate(bps) if abs(float(b) - x) <= 1e-12]
        if not matches:
            raise ProblemFormatError(f"[{key}] value given at {loc}, which is not a breakpoint")
        values[matches[0]] = float(val)
    try:
        return PiecewiseFunction(tuple(bps), tuple(str(s) for s in segs), values, _DEFAULT_RULE[key])
    except ExpressionError as exc:
        raise ProblemFormatError(f"[{key}] {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"[{key}] {exc}") from exc


def problem_from_dict(data: dict) -> ProblemSpec:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ProblemFormatError(f"unknown keys: {sorted(unknown)}")
    missing = {"p", "s_star", "d", "g", "h"} - set(data)
    if missing:
        raise ProblemFormatError(f"missing keys: {sorted(missing)}")
    coefs = {k: _coefficient(k, data[k]) for k in ("d", "g", "h")}
    try:
        return ProblemSpec(float(data["p"]), float(data["s_star"]), name=str(data.get("name", "")), **coefs)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(str(exc)) from exc


def load_problem(path) -> ProblemSpec:
    """Read a TOML or JSON problem file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ProblemFormatError(f"{path}: {exc}") from exc
    return problem_from_dict(data)
