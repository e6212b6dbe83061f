import csv
import io
import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from hypothesis import given, settings
from hypothesis import strategies as st

from bistwave.profile import (ProfileError, classify_fronts, profile_residual,
                              reconstruct_profile)
from bistwave.shooting import critical_trajectory
from bistwave.speeds import critical_speed

from conftest import huxley, huxley_speed, load

SQRT2 = math.sqrt(2.0)


def exact_front(z):
    return 1.0 / (1.0 + np.exp(z / SQRT2))


@pytest.fixture(scope="module")
def huxley_wave():
    spec = huxley(0.25)
    c = huxley_speed(0.25)
    traj = critical_trajectory(spec, c)
    return spec, c, traj, reconstruct_profile(spec, traj)


@pytest.fixture(scope="module")
def jump_wave():
    spec = load("jump.toml")
    c = critical_speed(spec).cstar
    traj = critical_trajectory(spec, c)
    return spec, c, traj, reconstruct_profile(spec, traj)


def test_huxley_closed_form_coordinates(huxley_wave):
    _, _, _, prof = huxley_wave
    inner = (prof.U >= 1e-3) & (prof.U <= 1 - 1e-3)
    u = prof.U[inner]
    assert np.max(np.abs(prof.z[inner] - SQRT2 * np.log((1 - u) / u))) <= 1e-7
    zq = brentq(lambda z: float(prof.U_at(z)) - 0.25, 0.0, 4.0, xtol=1e-14)
    assert zq == pytest.approx(SQRT2 * math.log(3.0), abs=1e-6)
    assert SQRT2 * math.log(3.0) == pytest.approx(1.5537, abs=1e-4)


def test_anchor_sample(huxley_wave):
    _, _, _, prof = huxley_wave
    k = int(np.nonzero(prof.z == 0.0)[0][0])
    assert prof.U[k] == 0.5
    assert abs(float(prof.U_at(0.0)) - 0.5) <= 1e-9


def test_samples_strictly_monotone(huxley_wave, jump_wave):
    for _, _, _, prof in (huxley_wave, jump_wave):
        assert np.all(np.diff(prof.z) > 0)
        assert np.all(np.diff(prof.U) < 0)
        assert prof.z0 < 0 < prof.z1


def test_round_trip(huxley_wave):
    _, _, _, prof = huxley_wave
    zs = np.linspace(-8, 8, 3201)
    assert np.max(np.abs(prof.U_at(zs) - exact_front(zs))) <= 1e-5


def test_huxley_fronts_are_smooth(huxley_wave):
    spec, _, traj, prof = huxley_wave
    fronts = classify_fronts(spec, traj)
    for side in ("leftFront", "rightFront"):
        assert not fronts[side]["finite"]
        assert fronts[side]["y_exponent"] == pytest.approx(2.0, abs=0.02)
    assert prof.z0 == -math.inf and prof.z1 == math.inf


def test_degenerate_diffusion_gives_sharp_right_front():
    spec = load("degenerate.toml")
    c = critical_speed(spec).cstar
    traj = critical_trajectory(spec, c)
    prof = reconstruct_profile(spec, traj)
    assert math.isfinite(prof.z1) and prof.z0 == -math.inf
    assert prof.U[-1] == 0.0
    # integrand d/sqrt(y) ~ U / (sqrt(C) U) stays bounded near U = 0
    assert classify_fronts(spec, traj)["rightFront"]["y_exponent"] == pytest.approx(2.0, abs=0.05)
    assert profile_residual(spec, prof, c, traj=traj).max_residual <= 1e-6


def test_diffusion_vanishing_at_both_ends():
    spec = huxley(0.25, d="t*(1-t)")
    c = critical_speed(spec).cstar
    traj = critical_trajectory(spec, c)
    fronts = classify_fronts(spec, traj)
    # near U = 0 the factor t restores integrability; near U = 1 the trajectory
    # decays like (1-t)^4, which outpaces the extra factor
    assert fronts["rightFront"]["finite"]
    assert not fronts["leftFront"]["finite"]
    assert fronts["leftFront"]["y_exponent"] == pytest.approx(4.0, abs=0.1)


def test_flux_vanishes_at_ends(huxley_wave):
    _, _, traj, _ = huxley_wave
    assert traj(0.0) == 0.0 and traj(1.0) == 0.0
    assert traj(1e-6) ** 0.5 < 1e-5 and traj(1 - 1e-6) ** 0.5 < 1e-5


def test_huxley_residual(huxley_wave):
    spec, c, traj, prof = huxley_wave
    rep = profile_residual(spec, prof, c, traj=traj)
    assert rep.pairs == 256
    assert rep.max_residual <= 1e-6
    assert rep.transitions == []


def test_residual_without_trajectory(huxley_wave):
    spec, c, _, prof = huxley_wave
    assert profile_residual(spec, prof, c).max_residual <= 1e-6


def test_coincident_points_have_zero_residual(huxley_wave):
    spec, c, traj, prof = huxley_wave
    assert profile_residual(spec, prof, c, traj=traj, mesh=1).max_residual == 0.0


def test_wrong_speed_breaks_residual(huxley_wave):
    spec, c, traj, prof = huxley_wave
    assert profile_residual(spec, prof, c + 0.05, traj=traj).max_residual > 1e-3


def test_jump_transition(jump_wave):
    spec, c, traj, prof = jump_wave
    rep = profile_residual(spec, prof, c, traj=traj)
    assert rep.max_residual <= 1e-6
    (tr,) = rep.transitions
    assert tr["U"] == 0.6
    assert tr["flux_mismatch"] <= 1e-6
    assert tr["derivative_jump"] > 0.01
    # with p = 2 the slopes jump by the diffusion ratio 4
    assert tr["Uprime_minus"] / tr["Uprime_plus"] == pytest.approx(0.25, rel=1e-5)
    (m, zeta), = prof.zetas
    assert float(prof.U_at(zeta)) == pytest.approx(0.6, abs=1e-8)


def test_non_critical_trajectory_rejected():
    spec = huxley(0.25)
    with pytest.raises(ProfileError):
        reconstruct_profile(spec, critical_trajectory(spec, 0.2))


@given(st.floats(-8.0, 8.0))
@settings(max_examples=50, deadline=None)
def test_interpolant_between_samples(z):
    prof = _cached_profile()
    assert abs(float(prof.U_at(z)) - float(exact_front(z))) <= 1e-5


_CACHE = {}


def _cached_profile():
    if "p" not in _CACHE:
        spec = huxley(0.25)
        _CACHE["p"] = reconstruct_profile(spec, critical_trajectory(spec, huxley_speed(0.25)))
    return _CACHE["p"]


def test_exports(jump_wave):
    _, _, _, prof = jump_wave
    rows = list(csv.reader(io.StringIO(prof.to_csv())))
    assert rows[0] == ["z", "U", "Uprime_left", "Uprime_right"]
    assert len(rows) == len(prof.z) + 1
    meta = json.loads(prof.to_json())
    assert meta["z0"] == "-inf" and meta["zetas"][0]["U"] == 0.6
