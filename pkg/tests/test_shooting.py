import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from bistwave.problem import problem_from_dict
from bistwave.shooting import (A0, A1, CRITICAL, HIT_ZERO, REACHED_END, IntegratorOptions,
                               classify_speed, critical_trajectory, solve_backward, solve_forward)

from conftest import WAVE_FIXTURES, huxley, huxley_speed, huxley_y, load

CSTAR = huxley_speed(0.25)


def test_forward_reproduces_closed_form(huxley_spec):
    tr = solve_forward(huxley_spec, CSTAR)
    ts = np.linspace(0.01, 0.99, 981)
    assert np.max(np.abs(tr(ts) - huxley_y(ts))) <= 1e-8
    assert tr(0.5) == pytest.approx(0.03125, abs=1e-9)
    # at exactly c* the approach to t = 1 is unstable; rounding may close it a hair early
    assert tr.exit.kind == REACHED_END or tr.exit.t > 1 - 1e-4


def test_backward_reproduces_closed_form(huxley_spec):
    tr = solve_backward(huxley_spec, CSTAR)
    ts = np.linspace(0.01, 0.99, 981)
    assert np.max(np.abs(tr(ts) - huxley_y(ts))) <= 1e-8
    assert tr.exit.kind == REACHED_END


@pytest.mark.parametrize("c", ["0.0", "0.2"])
def test_forward_exit_matches_oracle(huxley_spec, frozen, c):
    tr = solve_forward(huxley_spec, float(c))
    assert tr.exit.kind == HIT_ZERO
    assert tr.exit.t == pytest.approx(frozen["forward_exit"][c], abs=1e-6)


def test_forward_exit_closed_form_at_zero_speed(huxley_spec, frozen):
    assert frozen["forward_exit"]["0.0"] == pytest.approx(frozen["forward_exit_c0_closed_form"], abs=1e-12)
    assert solve_forward(huxley_spec, 0.0).exit.t == pytest.approx(frozen["forward_exit_c0_closed_form"],
                                                                   abs=1e-8)


def test_backward_exit_matches_oracle(huxley_spec, frozen):
    tr = solve_backward(huxley_spec, 0.5)
    assert tr.exit.kind == HIT_ZERO
    assert tr.exit.t == pytest.approx(frozen["backward_exit"]["0.5"], abs=1e-6)
    assert 0 < tr.exit.t < 0.25


def test_fast_backward_shot_lands_on_threshold(huxley_spec):
    # c = 1 exceeds the backward threshold, so the shot closes at s* itself
    tr = solve_backward(huxley_spec, 1.0)
    assert tr.exit.kind == HIT_ZERO
    assert tr.exit.t <= 0.25 + 1e-12
    assert tr(0.25) <= IntegratorOptions().match_tol


@pytest.mark.parametrize("name", WAVE_FIXTURES)
def test_backward_equals_mirrored_forward(name):
    spec = load(name)
    c = 0.1
    bw = solve_backward(spec, c)
    fw = solve_forward(spec.mirrored, -c)
    ts = np.linspace(0.0, 1.0, 257)
    np.testing.assert_allclose(bw(ts), fw(1.0 - ts), rtol=0, atol=1e-10)


@pytest.mark.parametrize("c,label", [(0.2, A0), (0.5, A1)])
def test_classification(huxley_spec, c, label):
    assert classify_speed(huxley_spec, c).label == label


def test_classification_at_wave_speed(huxley_spec):
    cl = classify_speed(huxley_spec, 0.3535534, IntegratorOptions(match_tol=1e-5))
    assert cl.label == CRITICAL


@pytest.mark.parametrize("name", WAVE_FIXTURES)
def test_positivity_and_exit_sides(name):
    spec = load(name)
    s = spec.s_star
    for c in (-0.3, 0.0, 0.3):
        fw, bw = solve_forward(spec, c), solve_backward(spec, c)
        ts = np.linspace(1e-6, s, 500)
        assert np.all(fw(ts[ts < fw.exit.t]) > 0)
        assert fw.exit.t >= s
        ts = np.linspace(s, 1 - 1e-6, 500)
        assert np.all(bw(ts[ts > bw.exit.t]) > 0)
        assert bw.exit.t <= s


def test_continuous_dependence(huxley_spec):
    c = 0.1
    base = solve_forward(huxley_spec, c)
    ts = np.linspace(0.01, 0.5, 400)
    devs = [np.max(np.abs(solve_forward(huxley_spec, c + eps)(ts) - base(ts))) for eps in (1e-2, 1e-3, 1e-4)]
    assert devs[0] > devs[1] > devs[2] > 0


@pytest.mark.parametrize("c,t1,t2", [(0.2, 0.3, 0.5), (0.2, 0.05, 0.2), (-0.2, 0.26, 0.3),
                                     (0.6, 0.1, 0.9)])
def test_integral_identity(huxley_spec, c, t1, t2):
    opts = IntegratorOptions(abs_tol=1e-10, zero_threshold=1e-9)
    tr = solve_forward(huxley_spec, c, opts)
    assert t2 < tr.exit.t
    rhs = lambda t: 2.0 * (c * math.sqrt(max(tr(t), 0.0)) - huxley_spec.f(t))
    integral, _ = quad(rhs, t1, t2, epsabs=1e-14, epsrel=1e-13, limit=200)
    assert abs(tr(t2) - tr(t1) - integral) <= 10 * opts.abs_tol


def test_continuity_across_diffusion_jump():
    spec = load("jump.toml")
    tr = solve_backward(spec, 0.6)
    assert tr(0.6 - 1e-12) == pytest.approx(tr(0.6 + 1e-12), abs=1e-10)
    assert tr(0.6) > 0


def test_zero_forcing_start_keeps_trajectory_at_zero():
    spec = problem_from_dict({
        "p": 2, "s_star": 0.5, "d": "1", "h": "1",
        "g": {"breakpoints": [0, 0.2, 1], "segments": ["0", "(t-0.2)*(t-0.5)*(1-t)"]}})
    tr = solve_forward(spec, 0.0)
    assert np.all(tr(np.linspace(0, 0.2, 50)) == 0.0)
    assert tr(0.35) > 0


def test_critical_trajectory_halves_meet(huxley_spec):
    ct = critical_trajectory(huxley_spec, CSTAR)
    assert abs(ct.mismatch) <= 1e-9
    ts = np.linspace(0.01, 0.99, 99)
    assert np.max(np.abs(ct(ts) - huxley_y(ts))) <= 1e-8


def test_trajectory_exports(huxley_spec):
    tr = solve_forward(huxley_spec, 0.2)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,y"
    t, y = map(float, lines[-1].split(","))
    assert t == pytest.approx(tr.exit.t)
    meta = json.loads(tr.to_json())
    assert meta["exit"]["kind"] == HIT_ZERO and meta["direction"] == "forward"


def test_options_validation():
    with pytest.raises(ValueError):
        IntegratorOptions(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorOptions(abs_tol=1e-10, zero_threshold=1e-10)
