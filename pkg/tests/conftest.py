"""Shared profiles and oracles for the test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

from rayleigh_resonance.medium import homogeneous_profile, load_profile_file, profile_from_mapping

PROFILES = Path(__file__).resolve().parent.parent / "profiles"

POLY_CFG = {
    "medium": {"omega": 1.0, "H": 1.0, "lambda0": 1.0, "mu0": 1.0},
    "slab": {"kind": "polynomial", "origin": -1.0, "mu": [1.0, 0, 0, 0, 0.3],
             "lambda": [1.0, 0, 0, 0, 0.2]},
}


def rayleigh_root_bisection(lo=1.0 + 1e-12, hi=3.0**0.5 - 1e-12, n=200):
    """Real Rayleigh root of the Poisson solid (omega = mu0 = lambda0 = 1).

    Bisection of (2 x^2 - 1)^2 - 4 x^2 sqrt(x^2 - 1) sqrt(x^2 - 1/3).
    """
    def f(x):
        return (2 * x * x - 1) ** 2 - 4 * x * x * ((x * x - 1) * (x * x - 1 / 3)) ** 0.5

    a, b = lo, hi
    fa = f(a)
    for _ in range(n):
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def delta0(p, xi, qP, qS):
    """Homogeneous Rayleigh determinant."""
    return 1j * p.mu0**2 * ((p.omega**2 / p.mu0 - 2 * xi**2) ** 2 + 4 * qP * qS * xi**2)


@pytest.fixture(scope="session")
def bump():
    return load_profile_file(PROFILES / "bump.toml")


@pytest.fixture(scope="session")
def poisson():
    return homogeneous_profile(omega=1.0, H=0.0, lambda0=1.0, mu0=1.0)


@pytest.fixture(scope="session")
def const_slab():
    return load_profile_file(PROFILES / "constant.toml")


@pytest.fixture(scope="session")
def poly():
    return profile_from_mapping(POLY_CFG)


@pytest.fixture(scope="session")
def spline():
    return load_profile_file(PROFILES / "spline.toml")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
