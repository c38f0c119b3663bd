"""Shared fixtures: grids, ground states and computed branches.

Expensive objects are session-scoped so the acceptance suite and the unit
tests reuse them.
"""
import math
import time

import numpy as np
import pytest

from normsol.grid import DomainSpec, build_grid
from normsol.soliton import gn_constant, shoot_ground_state
from normsol.twoconstraint import continue_branch

BRANCH_N = 8192
BRANCH_STEPS = 40
BRANCH_ALPHA_END = 1e4


@pytest.fixture(scope="session")
def interval_domain():
    return DomainSpec.interval(0.0, math.pi)


@pytest.fixture(scope="session")
def interval_grid(interval_domain):
    return build_grid(interval_domain, 2048)


@pytest.fixture(scope="session")
def coarse_interval(interval_domain):
    return build_grid(interval_domain, 256)


@pytest.fixture(scope="session")
def square_grid():
    return build_grid(DomainSpec.square(1.0), 64)


@pytest.fixture(scope="session")
def disk_grid():
    return build_grid(DomainSpec.disk(1.0), 64)


_profiles = {}


def profile(N, p):
    key = (N, float(p))
    if key not in _profiles:
        _profiles[key] = shoot_ground_state(N, p)
    return _profiles[key]


@pytest.fixture(scope="session")
def soliton():
    """Cached ground-state profiles keyed by ``(N, p)``."""
    return profile


@pytest.fixture(scope="session")
def C17():
    return gn_constant(profile(1, 7))


_branches = {}
BRANCH_SECONDS = {}


def branch_for(p, n=BRANCH_N, steps=BRANCH_STEPS, alpha_end=BRANCH_ALPHA_END):
    key = (float(p), n, steps, alpha_end)
    if key not in _branches:
        t0 = time.perf_counter()
        grid = build_grid(DomainSpec.interval(0.0, math.pi), n)
        _branches[key] = continue_branch(grid, p, 1.01 * grid.lambda1, alpha_end, steps)
        BRANCH_SECONDS[key] = time.perf_counter() - t0
    return _branches[key]


@pytest.fixture(scope="session")
def branches():
    """Positive branches on (0, pi) from just above lambda_1 to alpha = 1e4."""
    return branch_for


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def smooth_random_field(grid, rng, max_modes=6, max_bumps=3):
    """Random field resolved on ``grid``: low modes plus Gaussian bumps.

    Bumps are at least four mesh widths wide so the discrete norms stay close
    to their continuum values.
    """
    h = grid.spacing
    x = grid.coords
    dom = grid.domain
    u = np.zeros(grid.size)
    if dom.kind == "interval":
        a, b = dom.params
        L = b - a
        for m in range(1, rng.integers(1, max_modes + 1) + 1):
            u += rng.normal() / m * np.sin(m * math.pi * (x[:, 0] - a) / L)
        lo, hi = a, b
        box = [(a, b)]
    else:
        widths = dom.params
        for _ in range(rng.integers(1, max_modes + 1)):
            m1, m2 = rng.integers(1, 5, size=2)
            u += rng.normal() / (m1 + m2) * np.sin(m1 * math.pi * x[:, 0] / widths[0]) * \
                np.sin(m2 * math.pi * x[:, 1] / widths[1])
        box = [(0.0, w) for w in widths]
    for _ in range(rng.integers(0, max_bumps + 1)):
        c = np.array([rng.uniform(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo)) for lo, hi in box])
        s = rng.uniform(4 * h, 0.2 * min(hi - lo for lo, hi in box))
        r2 = np.sum((x - c) ** 2, axis=1)
        u += rng.normal() * 3 * np.exp(-r2 / (2 * s * s))
    if not np.any(u):
        u[grid.size // 2] = 1.0
    return u


# --------------------------------------------------------------------------
# acceptance summary: one line per criterion, from the test outcomes

_acceptance = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "acceptance" not in props:
        return
    label, title = props["acceptance"]
    ok = report.outcome == "passed"
    detail = props.get("detail", "")
    if not ok and not detail:
        detail = str(report.longrepr).strip().splitlines()[-1] if report.longrepr else ""
    _acceptance[label] = (ok, title, detail)


@pytest.fixture(autouse=True)
def _acceptance_label(request):
    mark = request.node.get_closest_marker("acceptance")
    if mark is not None:
        request.node.user_properties.append(("acceptance", tuple(mark.args)))


@pytest.fixture
def detail(request):
    """Record a one-line measurement summary for the acceptance report."""

    def record(text):
        request.node.user_properties.append(("detail", text))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    key = lambda s: int("".join(ch for ch in s if ch.isdigit()) or 0)
    for label in sorted(_acceptance, key=key):
        ok, title, info = _acceptance[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label} {title}: {info}")
