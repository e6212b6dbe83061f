import json

import pytest

from bistwave.problem import ProblemFormatError, load_problem, problem_from_dict

from conftest import ALL_FIXTURES, PROBLEMS, load


@pytest.mark.parametrize("name", ALL_FIXTURES + ("bad.toml",))
def test_fixtures_load(name):
    spec = load(name)
    assert spec.p > 1 and 0 < spec.s_star < 1
    assert 1 / spec.p + 1 / spec.p_prime == pytest.approx(1.0, abs=1e-15)


def test_toml_and_json_agree(tmp_path):
    spec = load("huxley.toml")
    path = tmp_path / "huxley.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert load_problem(path).digest == spec.digest


def test_point_values_keyed_by_location():
    spec = problem_from_dict({"p": 2, "s_star": 0.25, "g": "t*(t-0.25)*(1-t)", "h": "0",
                              "d": {"breakpoints": [0, 0.5, 1], "segments": ["2", "1"],
                                    "values": {"0.5": 0.5}}})
    assert spec.d(0.5) == 0.5


def test_d_defaults_to_smaller_limit():
    spec = load("jump.toml")
    assert spec.d(0.6) == 1.0
    assert spec.d(0.6, "right") == 4.0


@pytest.mark.parametrize("data,fragment", [
    ({"p": 2, "s_star": 0.5, "d": "1", "g": "t", "h": "0", "extra": 1}, "unknown keys"),
    ({"p": 2, "s_star": 0.5, "d": "1", "g": "t"}, "missing"),
    ({"p": 1, "s_star": 0.5, "d": "1", "g": "t", "h": "0"}, "p must"),
    ({"p": 2, "s_star": 1.5, "d": "1", "g": "t", "h": "0"}, "s_star"),
    ({"p": 2, "s_star": 0.5, "d": {"segments": ["1"], "knots": []}, "g": "t", "h": "0"}, "unknown keys"),
    ({"p": 2, "s_star": 0.5, "d": "1 +", "g": "t", "h": "0"}, "[d]"),
    ({"p": 2, "s_star": 0.5, "d": {"breakpoints": [0, 1], "segments": ["1"], "values": {"0.3": 1}},
      "g": "t", "h": "0"}, "not a breakpoint"),
])
def test_malformed_problems_rejected(data, fragment):
    with pytest.raises(ProblemFormatError) as info:
        problem_from_dict(data)
    assert fragment in str(info.value)


def test_bad_toml_reports_format_error(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("p = = 2\n")
    with pytest.raises(ProblemFormatError):
        load_problem(path)


def test_mirror_reflects_coefficients():
    spec = load("jump.toml")
    m = spec.mirrored
    assert m.s_star == pytest.approx(0.75)
    for t in (0.1, 0.3, 0.55, 0.9):
        assert m.g(t) == pytest.approx(-spec.g(1 - t), abs=1e-15)
        assert m.d(t) == spec.d(1 - t)
    for t in (0.2, 0.6, 0.8):
        assert m.mirrored.d(t) == spec.d(t)


def test_shift_moves_h_only():
    spec = load("nonex.toml").shifted(0.3)
    assert spec.h(0.2) == pytest.approx(0.6)
    assert spec.g(0.2) == load("nonex.toml").g(0.2)


def test_digest_is_stable():
    assert load("huxley.toml").digest == load_problem(PROBLEMS / "huxley.toml").digest
    assert load("huxley.toml").digest != load("jump.toml").digest
