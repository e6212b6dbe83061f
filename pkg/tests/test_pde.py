import csv
import io
import math

import numpy as np
import pytest

from bistwave.pde import (CFLViolation, SpaceTimeField, front_positions, measure_front_speed,
                          simulate)
from bistwave.problem import problem_from_dict

from conftest import ALL_FIXTURES, huxley_speed, load

HEAT = dict(p=2, s_star=0.5, d="1", g="0", h="0")


def synthetic(speed, n_times=41):
    x = np.linspace(-20, 20, 801)
    times = np.linspace(0, 10, n_times)
    u = np.array([1.0 / (1.0 + np.exp((x - speed * t) / math.sqrt(2))) for t in times])
    return SpaceTimeField(x, times, u, x[1] - x[0], 0)


def test_speed_of_synthetic_translation():
    assert measure_front_speed(synthetic(0.5)) == pytest.approx(0.5, abs=1e-3)


def test_stationary_field_has_zero_speed():
    assert measure_front_speed(synthetic(0.0)) == pytest.approx(0.0, abs=1e-12)


def test_too_few_snapshots():
    with pytest.raises(ValueError):
        measure_front_speed(synthetic(0.5, n_times=5))


def test_heat_equation_keeps_midpoint():
    fld = simulate(problem_from_dict(HEAT), n_cells=512, t_max=10.0)
    pos = front_positions(fld)
    assert np.all(np.abs(pos) <= fld.dx)
    assert fld.u[-1, 0] == pytest.approx(1.0, abs=1e-6)


def test_huxley_speed_coarse():
    fld = simulate(load("huxley.toml"), n_cells=512)
    assert measure_front_speed(fld) == pytest.approx(huxley_speed(0.25), abs=0.01)


def test_constant_convection_shifts_speed():
    base = measure_front_speed(simulate(load("huxley.toml"), n_cells=512))
    shifted = measure_front_speed(simulate(load("huxley.toml").shifted(0.3), n_cells=512))
    assert shifted - base == pytest.approx(0.3, abs=0.01)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_solution_stays_in_unit_interval(name):
    fld = simulate(load(name), n_cells=256, t_max=10.0)
    assert fld.max_overshoot <= 1e-12
    assert fld.u.min() >= 0.0 and fld.u.max() <= 1.0


def test_reaction_bounds_mass_change():
    spec = load("huxley.toml")
    fld = simulate(spec, n_cells=512, t_max=2.0, n_snapshots=21)
    gmax = np.max(np.abs(spec.g.evaluate_array(np.linspace(0, 1, 1001))))
    mass = fld.u.sum(axis=1) * fld.dx
    dt = np.diff(fld.times)
    # Neumann ends: only the reaction changes the mass
    assert np.all(np.abs(np.diff(mass)) <= gmax * dt * 80.0 + 1e-12)


def test_unstable_step_is_reported():
    with pytest.raises(CFLViolation):
        # an initial overshoot is caught on the first step
        simulate(load("huxley.toml"), n_cells=256, t_max=1.0,
                 u0=lambda x: np.where(x < 0, 1.0 + 1e-3, 0.0))


@pytest.mark.parametrize("kw", [dict(n_cells=64), dict(cfl_safety=1.0), dict(cfl_safety=0.0)])
def test_argument_checks(kw):
    with pytest.raises(ValueError):
        simulate(load("huxley.toml"), **kw)


def test_snapshot_csv():
    fld = simulate(load("huxley.toml"), n_cells=128, t_max=1.0, n_snapshots=3)
    rows = list(csv.reader(io.StringIO(fld.to_csv(stride=4))))
    assert rows[0] == ["t", "x", "u"]
    assert len(rows) == 1 + 3 * 32
