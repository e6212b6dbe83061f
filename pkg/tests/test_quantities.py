import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bistwave.quantities import (derive_quantities, eval_f, f_integral, h_integral, speed_bounds,
                                 speed_constant, sup_ratios, validate_problem)

from conftest import WAVE_FIXTURES, huxley, load


def test_huxley_validates_with_exact_integral():
    rep = validate_problem(huxley(0.25))
    assert rep.ok
    assert f_integral(huxley(0.25))[0] == pytest.approx(1 / 24, abs=1e-12)


def test_balanced_reaction_has_zero_integral():
    spec = huxley(0.5)
    assert validate_problem(spec).ok
    assert f_integral(spec)[0] == pytest.approx(0.0, abs=1e-12)


def test_monostable_reaction_fails_bistability():
    rep = validate_problem(load("bad.toml"))
    assert not rep.ok
    verdicts = {c.name: c.verdict for c in rep.checks}
    assert verdicts["reaction_bistable"] == "violated"


def test_negative_integral_fails_balance():
    # g = t(t - 0.75)(1 - t) has int g < 0
    rep = validate_problem(huxley(0.75))
    assert {c.name: c.verdict for c in rep.checks}["integral_balance"] == "violated"


def test_h_jump_at_threshold_fails_continuity():
    spec = huxley(0.5, h={"breakpoints": [0, 0.5, 1], "segments": ["0", "1"]})
    assert {c.name: c.verdict for c in validate_problem(spec).checks}["convection"] == "violated"


def test_f_values():
    spec = huxley(0.25)
    assert eval_f(spec, 0.75) == pytest.approx(0.09375, rel=1e-15)
    assert eval_f(spec, 0.25) == 0.0
    p3 = huxley(0.5, p=3, d="t*(1-t)")
    # hand value sqrt(3/16) * (-3/64)
    assert eval_f(p3, 0.25) == pytest.approx(-math.sqrt(3 / 16) * 3 / 64, rel=1e-14)


def test_f_value_matches_symbolic_oracle():
    sympy = pytest.importorskip("sympy")  # noqa: F841
    from oracles.symbolic_oracle import p3_f_value
    p3 = huxley(0.5, p=3, d="t*(1-t)")
    assert eval_f(p3, 0.25) == pytest.approx(p3_f_value("1/4"), rel=1e-14)


def test_speed_constant():
    assert speed_constant(2.0) == 2.0
    p = 3.0
    pp = p / (p - 1)
    assert speed_constant(p) == pytest.approx(pp ** (1 / pp) * p ** (1 / p), rel=1e-15)


def test_huxley_ratios_against_grid():
    a = 0.25
    sups = sup_ratios(huxley(a))
    ts = np.linspace(0, 1, 200001)
    left, right = ts[(ts > 0) & (ts < a)], ts[(ts > a) & (ts < 1)]
    # the grid max undershoots a supremum attained at s*, so it only bounds from below
    assert np.max(left * (1 - left)) - 1e-12 <= sups["mu_tilde"] == pytest.approx(a * (1 - a), abs=1e-8)
    assert sups["mu_hat"] == pytest.approx(np.max(right * (1 - right)), abs=1e-8)
    assert sups["mu_hat"] == pytest.approx(0.25, abs=1e-8)
    dq = derive_quantities(huxley(a))
    assert dq.nu_tilde == pytest.approx(0.1875, abs=1e-8)
    assert dq.nu_hat == pytest.approx(0.1875, abs=1e-8)


def test_huxley_wave_speed_window():
    br = speed_bounds(huxley(0.25))
    assert br.cstar[0] == pytest.approx(-2 * math.sqrt(0.1875), abs=1e-8)
    assert br.cstar[1] == pytest.approx(1.0, abs=1e-8)


def test_linear_ratio_is_one():
    # f = -(s* - t) on (0, s*)
    spec = huxley(0.5, g={"breakpoints": [0, 0.5, 1], "segments": ["t - 0.5", "(t-0.5)*(1-t)*4"]})
    assert sup_ratios(spec)["mu_tilde"] == pytest.approx(1.0, abs=1e-9)


def test_unbounded_ratio_gives_infinite_bracket():
    # f = -sqrt(s* - t) near s*: ratio blows up
    spec = huxley(0.5, g={"breakpoints": [0, 0.5, 1], "segments": ["-t*sqrt(0.5-t)", "(t-0.5)*(1-t)"]})
    dq = derive_quantities(spec)
    assert math.isinf(dq.mu_tilde)
    assert speed_bounds(spec, dq).cF[0] == -math.inf


@pytest.mark.parametrize("name", WAVE_FIXTURES + ("nonex.toml",))
def test_derived_quantity_ordering(name):
    spec = load(name)
    dq = derive_quantities(spec)
    assert dq.hm <= dq.h_star <= dq.hM
    assert dq.nu_tilde <= dq.mu_tilde * (1 + 1e-9)
    assert dq.nu_hat <= dq.mu_hat * (1 + 1e-9)
    br = speed_bounds(spec, dq)
    assert br.cF[0] <= br.cF[1] <= dq.h_star + 1e-12
    assert dq.h_star - 1e-12 <= br.cB[0] <= br.cB[1]


@given(st.floats(-2.0, 2.0))
@settings(max_examples=20, deadline=None)
def test_brackets_shift_with_h(kappa):
    base = load("jump.toml")
    b0, b1 = speed_bounds(base), speed_bounds(base.shifted(kappa))
    for lo, hi in ((b0.cF, b1.cF), (b0.cB, b1.cB), (b0.cstar, b1.cstar)):
        assert hi[0] - lo[0] == pytest.approx(kappa, abs=1e-12)
        assert hi[1] - lo[1] == pytest.approx(kappa, abs=1e-12)
    d0, d1 = derive_quantities(base), derive_quantities(base.shifted(kappa))
    assert d1.mu_tilde == d0.mu_tilde and d1.nu_hat == d0.nu_hat


def test_h_integral():
    spec = load("nonex.toml")
    # H(t) = t/2 - t^2/2
    for t in (0.1, 0.5, 1.0):
        assert h_integral(spec, t) == pytest.approx(t / 2 - t * t / 2, abs=1e-14)
