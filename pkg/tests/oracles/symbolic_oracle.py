"""Symbolic checks behind the closed-form Huxley numbers.

Run directly; prints each identity and exits non-zero if one fails.  The
test suite imports ``run_checks`` and asserts every entry is true.
"""

import sympy as sp

t, a, z = sp.symbols("t a z", real=True)


def run_checks() -> dict:
    c = (1 - 2 * a) / sp.sqrt(2)
    g = t * (t - a) * (1 - t)
    y = t**2 * (1 - t) ** 2 / 2
    # p = 2, d = 1, h = 0 on 0 < t < 1, where sqrt(y) = t (1 - t) / sqrt 2
    ode = sp.simplify(sp.diff(y, t) - 2 * (c * t * (1 - t) / sp.sqrt(2) - g))

    # the profile solves U' = -sqrt(y(U)) = -U (1 - U) / sqrt 2 with U(0) = 1/2
    U = 1 / (1 + sp.exp(z / sp.sqrt(2)))
    profile = sp.simplify(sp.diff(U, z) + U * (1 - U) / sp.sqrt(2))

    # forward exit at c = 0: y = -2 int_0^t g
    exit_poly = sp.expand(-2 * sp.integrate(g, (t, 0, t)) / t**2)
    target = sp.expand(2 * (t**2 / 4 - (1 + a) * t / 3 + a / 2))
    exit_form = sp.simplify(exit_poly - target)

    return {"ode_identity": ode == 0, "profile_identity": profile == 0,
            "c0_exit_polynomial": exit_form == 0, "profile_center": U.subs(z, 0) == sp.Rational(1, 2)}


def p3_f_value(tv: str = "1/4") -> float:
    """f = d^(1/(p-1)) g for p = 3, d = t(1 - t), g = t(t - 1/2)(1 - t)."""
    x = sp.Rational(tv)
    return float(sp.sqrt(x * (1 - x)) * x * (x - sp.Rational(1, 2)) * (1 - x))


if __name__ == "__main__":
    res = run_checks()
    for k, v in res.items():
        print(f"{k}: {v}")
    print("p=3 f(0.25) =", p3_f_value())
    raise SystemExit(0 if all(res.values()) else 1)
