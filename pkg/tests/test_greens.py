"""Resolvent kernel: closed-form half-space oracle, traction-free reflected
solutions, distributional checks and the pole structure."""

import numpy as np
import pytest

from rayleigh_resonance.boundary import traction_functionals
from rayleigh_resonance.greens import (HOMOGENEOUS_JUMP, greens_diagnostics, greens_kernel,
                                       greens_matrix, jost_columns, locate_pole, pole_scan,
                                       reflected_solutions)
from rayleigh_resonance.resonance import resonance_search
from rayleigh_resonance.riemann import Rim, SheetPoint, quasimomenta
from rayleigh_resonance.scattering import NearResonanceError


def plane_states(lam, mu, om, xi, qP, qS, Z):
    """Plane-wave states (psi1, psi2, v1, v2) at depth Z, columns P-, S-, P+, S+.

    Built from the null vector of the constant-coefficient symbol, with
    v = P psi' - xi N^T psi.
    """
    cols = []
    for sgn in (-1, 1):
        for q in (qP, qS):
            A = np.array([[om**2 - q * q * mu - xi**2 * (lam + 2 * mu), -1j * sgn * q * xi * (lam + mu)],
                          [1j * sgn * q * xi * (lam + mu), om**2 - q * q * (lam + 2 * mu) - xi**2 * mu]])
            if abs(A[0, 0]) + abs(A[0, 1]) >= abs(A[1, 0]) + abs(A[1, 1]):
                a = np.array([-A[0, 1], A[0, 0]])
            else:
                a = np.array([A[1, 1], -A[1, 0]])
            u = a * np.exp(1j * sgn * q * Z)
            du = 1j * sgn * q * u
            cols.append([u[0], u[1], mu * du[0] - xi * mu * u[1], (lam + 2 * mu) * du[1] + xi * lam * u[0]])
    return np.array(cols).T


def halfspace_green(lam, mu, om, xi, qP, qS, Z, Zp):
    """Closed-form half-space kernel: outgoing below Z', traction free above,
    continuous at Z' with a unit jump of the traction."""
    _, _, vh = np.linalg.svd(plane_states(lam, mu, om, xi, qP, qS, 0.0)[2:, :])
    free = vh.conj().T[:, 2:]
    Sp = plane_states(lam, mu, om, xi, qP, qS, Zp)
    Sz = plane_states(lam, mu, om, xi, qP, qS, Z)
    M = np.hstack([Sp @ free, -Sp[:, :2]])
    G = np.empty((2, 2), complex)
    for k in range(2):
        rhs = np.zeros(4, complex)
        rhs[2 + k] = 1.0
        c = np.linalg.solve(M, rhs)
        G[:, k] = (Sz @ free @ c[:2])[:2] if Z > Zp else (Sz[:, :2] @ c[2:])[:2]
    return G


@pytest.fixture(scope="module")
def bump_catalog(bump):
    return resonance_search(bump, {"++": [(0.5, 2.0, -0.5, 0.5)],
                                   "+-": [(0.2, 1.0, -0.3, 0.3)]}, workers=1)


def test_halfspace_closed_form(poisson, rng):
    worst = 0.0
    for _ in range(20):
        xi = rng.uniform(-2.5, 2.5) + 1j * rng.uniform(0.02, 0.5)
        pt = SheetPoint(xi, "++")
        q = quasimomenta(poisson, pt)
        Z, Zp = -rng.uniform(0.05, 2.0, 2)
        G = greens_kernel(poisson, pt, Z, Zp).value
        O = halfspace_green(poisson.lambda0, poisson.mu0, poisson.omega, xi, q.qP, q.qS, Z, Zp)
        worst = max(worst, np.max(np.abs(G - O)) / np.max(np.abs(O)))
    assert worst <= 1e-6


def test_halfspace_closed_form_on_real_axis(poisson):
    # propagating P and S on the upper rim of the physical sheet
    for xi in (0.3, -0.6):
        pt = SheetPoint(xi, "++", Rim.UPPER)
        q = quasimomenta(poisson, pt)
        G = greens_kernel(poisson, pt, -0.8, -0.25).value
        O = halfspace_green(1.0, 1.0, 1.0, xi, q.qP, q.qS, -0.8, -0.25)
        assert np.max(np.abs(G - O)) <= 1e-10 * np.max(np.abs(O))


@pytest.mark.parametrize("name", ["bump", "poisson", "spline"])
def test_reflected_solutions_are_traction_free(name, request):
    p = request.getfixturevalue(name)
    pt = SheetPoint(0.7 + 0.2j, "++")
    gP, gS, _ = reflected_solutions(p, pt, [-1e-12, -0.5])
    for g in (gP, gS):
        t = traction_functionals(g[0])
        scale = np.max(np.abs(g[1]))
        assert abs(t.a_hat) + abs(t.b_hat) <= 1e-7 * scale


def test_reflected_solutions_plane_wave_superposition(poisson):
    xi = 0.4 + 0.3j
    pt = SheetPoint(xi, "++")
    q = quasimomenta(poisson, pt)
    Z = -0.6
    gP, gS, _ = reflected_solutions(poisson, pt, [Z])
    S = plane_states(1.0, 1.0, 1.0, xi, q.qP, q.qS, Z)
    S0 = plane_states(1.0, 1.0, 1.0, xi, q.qP, q.qS, 0.0)
    for g, other in ((gP[0], 3), (gS[0], 2)):
        c = np.linalg.solve(S, g)
        # no incoming wave of the other type, traction free at the surface
        assert abs(c[other]) <= 1e-10 * np.max(np.abs(c))
        assert np.max(np.abs((S0 @ c)[2:])) <= 1e-10 * np.max(np.abs(S0 @ c))


def test_zero_reflection_gives_incoming_wave(bump):
    pt = SheetPoint(0.5 + 0.5j, "++")
    q = quasimomenta(bump, pt)
    refl = {"qP": q.qP, "qS": q.qS, "R1": 0.0, "R1t": 0.0, "R2": 0.0, "R2t": 0.0}
    Z = [-1.3, -0.4]
    gP, gS, _ = reflected_solutions(bump, pt, Z, refl=refl)
    cols = jost_columns(bump, pt.xi, q.qP, q.qS, Z)
    np.testing.assert_allclose(gP, cols[:, :, 2], rtol=0, atol=0)
    np.testing.assert_allclose(gS, cols[:, :, 3], rtol=0, atol=0)


def test_transpose_relation(bump):
    pt = SheetPoint(1.3 + 0.1j, "++")
    a = greens_kernel(bump, pt, -0.9, -0.2).value
    b = greens_kernel(bump, pt, -0.2, -0.9).value
    np.testing.assert_allclose(b, a.T, rtol=1e-13)


def test_continuity_across_diagonal(bump):
    pt = SheetPoint(0.8 + 0.3j, "++")
    Zp = -0.45
    defects = []
    for eps in (1e-2, 1e-3):
        lo = greens_kernel(bump, pt, Zp - eps, Zp).value
        hi = greens_kernel(bump, pt, Zp + eps, Zp).value
        defects.append(np.max(np.abs(lo - hi)))
    # O(eps): a tenfold step shrinks the defect about tenfold
    assert defects[1] / defects[0] == pytest.approx(0.1, rel=0.05)


def test_diagonal_and_surface_rejected(bump):
    pt = SheetPoint(0.8 + 0.3j, "++")
    with pytest.raises(ValueError):
        greens_kernel(bump, pt, -0.5, -0.5)
    with pytest.raises(ValueError):
        greens_kernel(bump, pt, 0.1, -0.5)


def test_near_resonance_rejected(bump, bump_catalog):
    e = bump_catalog.on_sheet("++")[0]
    with pytest.raises(NearResonanceError):
        greens_kernel(bump, SheetPoint(e.xi, e.sheet), -0.7, -0.3)


def test_matrix_grid_matches_kernel(bump):
    pt = SheetPoint(0.6 + 0.4j, "+-")
    Zs = np.array([-1.5, -0.5])
    Zps = np.array([-0.5, -0.2])
    M = greens_matrix(bump, pt, Zs, Zps)
    assert np.all(np.isnan(M[1, 0]))
    np.testing.assert_allclose(M[0, 1], greens_kernel(bump, pt, -1.5, -0.2).value, rtol=1e-12)
    np.testing.assert_allclose(M[1, 1], greens_kernel(bump, pt, -0.5, -0.2).value, rtol=1e-12)


def test_jump_constant_from_closed_form(poisson):
    # the oracle's traction jump fixes J; a finite difference of the
    # closed form must reproduce the library constant
    xi, Zp, h = 0.9 + 0.2j, -0.5, 1e-4
    q = quasimomenta(poisson, SheetPoint(xi, "++"))

    def G(z):
        return halfspace_green(1.0, 1.0, 1.0, xi, q.qP, q.qS, z, Zp)

    P = np.diag([1.0, 3.0])
    # second-order one-sided differences on either side of Z'
    G0 = G(Zp)
    above = (-3 * G0 + 4 * G(Zp + h) - G(Zp + 2 * h)) / (2 * h)
    below = (3 * G0 - 4 * G(Zp - h) + G(Zp - 2 * h)) / (2 * h)
    np.testing.assert_allclose(P @ (above - below), HOMOGENEOUS_JUMP, atol=1e-6)


@pytest.mark.parametrize("name", ["bump", "poly", "spline"])
def test_diagnostics_residual_and_jump(name, request):
    p = request.getfixturevalue(name)
    grid = [(-0.8, -0.3), (-0.2, -0.6), (-1.4, -0.5), (-0.5, -1.2)]
    rep = greens_diagnostics(p, SheetPoint(0.9 + 0.25j, "++"), grid)
    assert rep.residual <= 1e-4 * rep.residual_scale
    assert rep.jump_defect <= 1e-6
    assert rep.continuity <= 1e-10
    d = rep.to_dict()
    assert d["residual_relative"] <= 1e-4


def test_diagnostics_reject_near_diagonal(bump):
    with pytest.raises(ValueError):
        greens_diagnostics(bump, SheetPoint(0.9 + 0.25j, "++"), [(-0.5, -0.505)])


@pytest.mark.parametrize("index", [0, 1])
def test_pole_exponent_at_catalog_entry(bump, bump_catalog, index):
    e = bump_catalog.entries[index]
    pt = SheetPoint(e.xi, e.sheet)
    slope, radii, norms = pole_scan(bump, pt, -0.7, -0.3, direction=(1 + 1j) / 2**0.5)
    assert slope == pytest.approx(-1.0, abs=0.05)
    rep = greens_diagnostics(bump, SheetPoint(e.xi + 0.05j, e.sheet), [(-0.7, -0.3)],
                             resonance=pt)
    assert rep.pole_exponent == pytest.approx(-1.0, abs=0.05)


def test_poles_coincide_with_catalog(bump, bump_catalog):
    for e in bump_catalog.entries:
        guess = SheetPoint(e.xi + 2e-3 * (1 + 1j), e.sheet)
        found = locate_pole(bump, guess, -0.7, -0.3)
        assert abs(found.xi - e.xi) <= 1e-6


def test_distinct_sheets_differ(bump):
    # same projection, different continuation
    a = greens_kernel(bump, SheetPoint(0.6 + 0.4j, "++"), -0.7, -0.3).value
    b = greens_kernel(bump, SheetPoint(0.6 + 0.4j, "--"), -0.7, -0.3).value
    assert np.max(np.abs(a - b)) > 1e-3 * np.max(np.abs(a))
