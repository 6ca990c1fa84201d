import numpy as np
import pytest
import sympy as sp

from rayleigh_resonance.boundary import (F_from_determinants, F_product, boundary_identity_suite,
                                         boundary_matrix_and_delta, delta_direct,
                                         entire_octet_and_determinants, gammas,
                                         traction_functionals)
from rayleigh_resonance.propagator import DisplacementTractionState
from rayleigh_resonance.riemann import SHEETS, Rim, SheetPoint, quasimomenta, sample_points

from conftest import delta0, rayleigh_root_bisection


def _plane_wave_tractions():
    """Symbolic tractions of the downgoing homogeneous plane waves at Z = 0."""
    xi, qP, qS, lam, mu, Z = sp.symbols("xi q_P q_S lambda mu Z")
    sig = lam + 2 * mu
    out = {}
    for name, psi in (("P", sp.Matrix([-xi, -sp.I * qP]) * sp.exp(-sp.I * Z * qP)),
                      ("S", sp.Matrix([-sp.I * qS, -xi]) * sp.exp(-sp.I * Z * qS))):
        d = psi.diff(Z)
        a = sp.I * (lam * xi * psi[0] + sig * d[1])
        b = -xi * mu * psi[1] + mu * d[0]
        out[name] = [sp.simplify(e.subs(Z, 0)) for e in (a, b)]
    return (xi, qP, qS, lam, mu), out


def test_homogeneous_tractions_symbolic(poisson):
    syms, tr = _plane_wave_tractions()
    xi_s, qP_s, qS_s, lam_s, mu_s = syms
    w2 = sp.Symbol("omega") ** 2
    # sigma qP^2 = omega^2 - sigma xi^2 reduces the P traction to the displayed form
    aP = sp.simplify(tr["P"][0].subs(qP_s**2, (w2 - (lam_s + 2 * mu_s) * xi_s**2) / (lam_s + 2 * mu_s)))
    assert sp.simplify(aP - (-sp.I * mu_s * (w2 / mu_s - 2 * xi_s**2))) == 0
    assert sp.simplify(tr["P"][1] - 2 * sp.I * mu_s * xi_s * qP_s) == 0
    assert sp.simplify(tr["S"][0] - (-2 * mu_s * xi_s * qS_s)) == 0
    bS = sp.simplify(tr["S"][1].subs(qS_s**2, w2 / mu_s - xi_s**2))
    assert sp.simplify(bS - (-mu_s * (w2 / mu_s - 2 * xi_s**2))) == 0
    # numerical boundary matrix against the symbolic entries
    for s in SHEETS:
        pt = SheetPoint(0.6 + 0.9j, s)
        q = quasimomenta(poisson, pt)
        B, _ = boundary_matrix_and_delta(poisson, pt)
        subs = {xi_s: pt.xi, qP_s: q.qP, qS_s: q.qS, lam_s: 1.0, mu_s: 1.0}
        expect = np.array([[complex(tr["P"][0].subs(subs)), complex(tr["S"][0].subs(subs))],
                           [complex(tr["P"][1].subs(subs)), complex(tr["S"][1].subs(subs))]])
        assert np.allclose(B.entries, expect, rtol=1e-12)


def test_zero_state_traction():
    t = traction_functionals(DisplacementTractionState(0, 0, 0, 0))
    assert t.a_hat == 0 and t.b_hat == 0


def test_delta_near_origin(poisson):
    # xi = 0 is rejected; the limit from nearby points is i mu0^2 (omega^2/mu0)^2 = i
    d = delta_direct(poisson, np.array([1e-7 + 1e-7j]), "++")[0]
    assert abs(d - 1j) <= 1e-6


def test_rayleigh_root_is_zero_of_delta(poisson):
    xr = rayleigh_root_bisection()
    assert xr == pytest.approx(1.0876638735806, abs=1e-12)
    d = delta_direct(poisson, np.array([xr]), "++")[0]
    scale = abs(delta_direct(poisson, np.array([1.3]), "++")[0])
    assert abs(d) <= 1e-13 * scale
    assert 1 / xr == pytest.approx(0.9194, abs=1e-4)


def test_constant_slab_equals_half_space(const_slab, poisson, rng):
    for pt in sample_points(poisson, 25, rng):
        a = delta_direct(const_slab, np.array([pt.xi]), pt.sheet, pt.rim)[0]
        b = delta_direct(poisson, np.array([pt.xi]), pt.sheet, pt.rim)[0]
        assert abs(a - b) <= 1e-9 * abs(b)


def test_homogeneous_determinants(poisson):
    for xi in (0.4 + 0.3j, 2.0 - 1.0j, -1.5 + 0.2j):
        _, d = entire_octet_and_determinants(poisson, xi)
        kS2 = poisson.omega**2 / poisson.mu0
        # d1 = i mu0^2 (omega^2/mu0 - 2 xi^2)^2, d2 = d3 = 0, d4 = 4 i mu0^2 xi^2
        assert d.d1 == pytest.approx(1j * (kS2 - 2 * xi**2) ** 2, rel=1e-12)
        assert abs(d.d2) < 1e-14 and abs(d.d3) < 1e-14
        assert d.d4 == pytest.approx(4j * xi**2, rel=1e-12)


def test_cross_sheet_identity_symbolic():
    """H = 0 closed forms satisfy Delta Delta(wPS) - Delta(wP) Delta(wS) = qP qS P S."""
    xi, qP, qS, lam, mu = sp.symbols("xi q_P q_S lambda mu")
    sig = lam + 2 * mu
    # surface tractions of theta_P, phi_P, theta_S, phi_S for the half space
    g1 = sp.I * (-lam * xi**2 - sig * qP**2)
    g2 = 0
    g3 = 0
    g4 = -2 * sp.I * mu * xi
    g5 = 0
    g6 = mu * (xi**2 - qS**2)
    g7 = 2 * mu * xi
    g8 = 0
    d1 = g1 * g6 - g5 * g2
    d2 = -g3 * g6 + g5 * g4
    d3 = -g1 * g8 + g7 * g2
    d4 = g3 * g8 - g7 * g4
    P = -2 * (g3 * g2 - g1 * g4)
    S = -2 * (g7 * g6 - g5 * g8)

    def D(a, b):
        return d1 + a * d2 + b * d3 + a * b * d4

    lhs = D(qP, qS) * D(-qP, -qS) - D(-qP, qS) * D(qP, -qS)
    assert sp.expand(lhs - qP * qS * P * S) == 0
    assert sp.expand(P * S - 4 * (d1 * d4 - d2 * d3)) == 0


def test_octet_reconstructs_delta(bump, rng):
    for pt in sample_points(bump, 10, rng):
        _, d = entire_octet_and_determinants(bump, pt.xi)
        q = quasimomenta(bump, pt)
        rd = d.d1 + q.qP * d.d2 + q.qS * d.d3 + q.qP * q.qS * d.d4
        _, delta = boundary_matrix_and_delta(bump, pt)
        assert abs(rd - delta) <= 1e-8 * max(abs(d.d1), abs(q.qP * q.qS * d.d4), abs(delta))


def test_S_equals_minus_P(bump, rng):
    xs = rng.uniform(-4, 4, 100) + 1j * rng.uniform(-3, 3, 100)
    g = gammas(bump, xs)
    P = -2 * (g[:, 2] * g[:, 1] - g[:, 0] * g[:, 3])
    S = -2 * (g[:, 6] * g[:, 5] - g[:, 4] * g[:, 7])
    assert np.max(np.abs(S + P) / np.abs(P)) <= 1e-8


def test_real_cut_reality_classes(bump):
    xs = np.linspace(-bump.kP + 0.01, bump.kP - 0.01, 15)
    g = gammas(bump, xs.astype(complex))
    scale = np.max(np.abs(g), axis=1)
    for j in (0, 3, 4, 7):
        assert np.all(np.abs(g[:, j].real) <= 1e-8 * scale)
    for j in (1, 2, 5, 6):
        assert np.all(np.abs(g[:, j].imag) <= 1e-8 * scale)
    for x in xs:
        _, d = entire_octet_and_determinants(bump, x)
        s = max(abs(d.d1), abs(d.d4), abs(d.P_fun))
        assert abs(d.d1.real) <= 1e-8 * s and abs(d.d4.real) <= 1e-8 * s
        for v in (d.d2, d.d3, d.P_fun, d.S_fun):
            assert abs(v.imag) <= 1e-8 * s


def test_entire_octet_single_valued_around_cut_point(bump):
    """Mean over a circle reproduces the centre value (no monodromy)."""
    for c in (0.3, 0.5j, bump.kP):
        t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        g = gammas(bump, c + 0.05 * np.exp(1j * t))
        g0 = gammas(bump, np.array([c + 0j]))[0]
        assert np.max(np.abs(g.mean(axis=0) - g0)) <= 1e-7 * np.max(np.abs(g0))


def test_F_routes_and_homogeneous_form(poisson, bump, rng):
    xs = rng.uniform(-3, 3, 20) + 1j * rng.uniform(0.1, 3, 20)
    F = F_product(bump, xs)  # raises if the product and closed form disagree
    from rayleigh_resonance.boundary import determinant_arrays
    F2 = F_from_determinants(determinant_arrays(bump, xs), xs, bump)
    assert np.max(np.abs(F - F2) / np.abs(F)) <= 1e-8
    for xi in xs[:5]:
        q = quasimomenta(poisson, SheetPoint(xi, "++"))
        Fh = F_product(poisson, xi)
        expect = delta0(poisson, xi, q.qP, q.qS) ** 2 * delta0(poisson, xi, -q.qP, q.qS) ** 2
        assert abs(Fh - expect) <= 1e-10 * abs(expect)


def test_F_growth_on_imaginary_axis(bump):
    ys = np.array([40.0, 80.0, 160.0])
    F = np.abs(F_product(bump, 1j * ys))
    slope = np.polyfit(np.log(ys), np.log(F), 1)[0]
    assert abs(slope - 12) <= 0.1


def test_identity_suite_bump(bump):
    rep = boundary_identity_suite(bump, sample_points(bump, 200, 11))
    assert rep.passed and rep.max_defect <= 1e-7
    assert rep.n_points == 800


def test_conjugation_on_imaginary_axis(bump):
    ys = np.array([0.3, 1.2, 2.5])
    for s in SHEETS:
        a = delta_direct(bump, 1j * ys, s, Rim.UPPER)
        b = delta_direct(bump, -1j * ys, s, Rim.UPPER)
        assert np.max(np.abs(np.conj(a) + b) / np.abs(a)) <= 1e-8
