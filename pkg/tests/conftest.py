import json
import math
from pathlib import Path

import pytest

from bistwave.problem import load_problem, problem_from_dict

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"
ORACLES = Path(__file__).resolve().parent / "oracles"

WAVE_FIXTURES = ("huxley.toml", "symmetric.toml", "jump.toml", "degenerate.toml", "plaplace.json")
ALL_FIXTURES = WAVE_FIXTURES + ("nonex.toml",)


def load(name):
    return load_problem(PROBLEMS / name)


def huxley(a=0.25, **overrides):
    data = dict(name=f"huxley-{a}", p=2, s_star=a, d="1", g=f"t*(t-{a})*(1-t)", h="0")
    data.update(overrides)
    return problem_from_dict(data)


def huxley_speed(a):
    return (1.0 - 2.0 * a) / math.sqrt(2.0)


def huxley_y(t):
    return t * t * (1.0 - t) ** 2 / 2.0


@pytest.fixture(scope="session")
def frozen():
    return json.loads((ORACLES / "frozen.json").read_text())


@pytest.fixture(scope="session")
def huxley_spec():
    return load("huxley.toml")


NONEX_G = "t*(1-t)*(t-0.5)^3/16"
HUXLEY_G = "t*(t-0.25)*(1-t)"

# specs spanning existence, nonexistence and the gap between them
BATTERY = {
    "huxley": dict(p=2, s_star=0.25, d="1", g=HUXLEY_G, h="0"),
    "huxley_rising_h": dict(p=2, s_star=0.25, d="1", g=HUXLEY_G, h="t"),
    "symmetric": dict(p=2, s_star=0.5, d="1 + t*(1-t)", g="t*(t-0.5)*(1-t)", h="0"),
    "peaked_h": dict(p=2, s_star=0.5, d="1", g="t*(t-0.5)*(1-t)", h="1 - abs(t-0.5)"),
    "jump": dict(p=2, s_star=0.25, d={"breakpoints": [0, 0.6, 1], "segments": ["1", "4"]}, g=HUXLEY_G, h="0"),
    "degenerate": dict(p=2, s_star=0.25, d="t", g=HUXLEY_G, h="0"),
    "plaplace": dict(p=3, s_star=0.5, d="1", g="t*(t-0.5)*(1-t)",
                     h={"breakpoints": [0, 0.7, 1], "segments": ["0", "0.2"]}),
    "p_below_two": dict(p=1.5, s_star=0.3, d="1", g="t*(t-0.3)*(1-t)", h="0.1"),
    "nonex": dict(p=2, s_star=0.5, d="1", g=NONEX_G, h="0.5 - t"),
    "nonex_strong": dict(p=2, s_star=0.5, d="1", g=NONEX_G, h="2*(0.5 - t)"),
    "nonex_weak": dict(p=2, s_star=0.5, d="1", g=NONEX_G, h="0.5*(0.5 - t)"),
    "nonex_shifted": dict(p=2, s_star=0.5, d="1", g=NONEX_G, h="0.8 - t"),
    "nonex_cubic_h": dict(p=2, s_star=0.5, d="1", g=NONEX_G, h="0.5 - t - (t-0.5)^3"),
    "nonex_too_weak": dict(p=2, s_star=0.5, d="1", g=NONEX_G, h="0.2*(0.5 - t)"),
}


def battery_spec(name):
    return problem_from_dict(dict(BATTERY[name], name=name))


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES = []


class CriterionRecorder:
    """Runs one criterion's checks and records a single pass/fail line."""

    def __init__(self, number, title):
        self.number, self.title, self.notes = number, title, []

    def note(self, text):
        self.notes.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.notes)
        if exc_type is not None:
            detail = (detail + "; " if detail else "") + f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"criterion {self.number:>2} {status}  {self.title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append((self.number, line))
        print(line)
        return False


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
