import numpy as np
import pytest

from mcts_transfer.bench import generate_source_data, make_sphere

# (criterion id, description, passed, detail) collected by the acceptance tests
ACCEPTANCE = []

SPHERE_SOURCE_OPTIMA = [(5.0, 5.0), (5.0, -5.0), (-5.0, -5.0)]


def record(cid: int, text: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE.append((cid, text, bool(passed), detail))


@pytest.fixture(scope="session")
def sphere_sources():
    """The three 100-sample GP-EI source datasets of the 2-D sphere setting."""
    out = []
    for seed, opt in enumerate(SPHERE_SOURCE_OPTIMA):
        prob = make_sphere(opt)
        tid = f"({opt[0]:g}, {opt[1]:g})"
        out.append(generate_source_data(prob, "gp_ei", 100, seed=seed, task_id=tid))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, text, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        line = f"[{'PASS' if ok else 'FAIL'}] {cid:2d}. {text}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
