"""Argument-principle zero finding, the resonance catalog, counting and the
distribution diagnostics."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import rayleigh_root_bisection
from rayleigh_resonance.boundary import delta_direct, log_F_direct
from rayleigh_resonance.resonance import (Contour, ContourNearZeroError, ResonanceCatalog,
                                          ResonanceEntry, counting_function,
                                          distribution_diagnostics, locate_zeros,
                                          resonance_search, sheet_log_delta, split_region,
                                          winding_count)
from rayleigh_resonance.riemann import SHEETS


# ---------------------------------------------------------------- winding


def test_locate_double_zero():
    zs = locate_zeros(lambda z: 2 * np.log(z - 0.3), (0, 1, -1, 1))
    assert len(zs) == 1
    assert zs[0]["multiplicity"] == 2
    assert zs[0]["xi"] == pytest.approx(0.3, abs=1e-10)


def test_winding_double_zero_on_edge():
    # samples symmetric about an even-order zero see equal phases
    with pytest.raises(ContourNearZeroError):
        winding_count(lambda z: (z - 0.3) ** 2, Contour.rectangle(0, 1, 0, 1, n0=16))


def test_winding_double_zero():
    a = 0.3 - 0.2j
    assert winding_count(lambda z: (z - a) ** 2, Contour.circle(a, 0.5)) == 2
    assert winding_count(lambda z: 2 * np.log(z - a), Contour.circle(a, 0.5), log=True) == 2


def test_winding_outside_and_pole():
    assert winding_count(lambda z: z - 3.0, Contour.circle(0, 1)) == 0
    assert winding_count(lambda z: 1 / (z - 0.1) ** 3, Contour.rectangle(-1, 1, -1, 1)) == -3


def test_winding_contour_through_zero():
    with pytest.raises(ContourNearZeroError):
        winding_count(lambda z: z - 1.0, Contour.circle(0, 1))
    with pytest.raises(ContourNearZeroError):
        winding_count(lambda z: np.zeros_like(z), Contour.circle(0, 1))


def test_winding_refinement_stable(bump):
    f = sheet_log_delta(bump, "--")
    box = (0.5, 3.0, 0.01, 2.0)
    counts = {winding_count(f, Contour.rectangle(*box, n0=n), log=True) for n in (16, 32, 64, 128)}
    assert len(counts) == 1


def test_half_disk_contours_cover_disk():
    zeros = [0.5 + 0.5j, -0.3 + 0.1j, 0.2 - 0.6j, -0.4 - 0.4j]

    def f(z):
        return np.prod([z - a for a in zeros], axis=0)

    up = winding_count(f, Contour.half_disk(1.0, +1))
    lo = winding_count(f, Contour.half_disk(1.0, -1))
    assert (up, lo) == (2, 2)


# ---------------------------------------------------------------- locate


def test_locate_rayleigh_root(poisson):
    xR = rayleigh_root_bisection()
    zs = locate_zeros(sheet_log_delta(poisson, "++"), (1.0 + 1e-6, 3**0.5, -0.1, 0.1))
    assert len(zs) == 1
    assert zs[0]["multiplicity"] == 1
    assert zs[0]["xi"] == pytest.approx(xR, abs=1e-10)


def test_locate_empty_region(poisson):
    assert locate_zeros(sheet_log_delta(poisson, "++"), (2.0, 3.0, 0.5, 1.5)) == []


def test_locate_analytic_function():
    roots = [0.2 + 0.3j, -0.5 - 0.1j, 0.7 - 0.6j]

    def logf(z):
        with np.errstate(divide="ignore"):
            return sum(np.log(z - r) for r in roots)

    found = sorted(locate_zeros(logf, (-1, 1, -1, 1)), key=lambda d: d["xi"].real)
    np.testing.assert_allclose([d["xi"] for d in found], sorted(roots, key=lambda r: r.real),
                               atol=1e-10)


# ---------------------------------------------------------------- catalog


def test_poisson_catalog_is_rayleigh_root(poisson):
    cat = resonance_search(poisson, {"++": [(-10, 10, -10, 10)]}, workers=1)
    xR = rayleigh_root_bisection()
    assert not cat.failures
    got = sorted(e.xi.real for e in cat.entries)
    assert got == pytest.approx([-xR, xR], abs=1e-10)
    assert all(abs(e.xi.imag) <= 1e-12 for e in cat.entries)
    assert 1 / xR == pytest.approx(0.9194, abs=1e-3)
    assert cat.bound_states == cat.entries


def test_constant_slab_matches_halfspace(poisson, const_slab):
    regions = {"++": [(0.5, 3, -1, 1)], "--": [(0.5, 3, -2, 2)], "+-": [(0.5, 3, -2, 2)]}
    a = resonance_search(poisson, regions, workers=1)
    b = resonance_search(const_slab, regions, workers=1)
    assert [e.sheet for e in a.entries] == [e.sheet for e in b.entries]
    np.testing.assert_allclose([e.xi for e in a.entries], [e.xi for e in b.entries], atol=1e-8)


@pytest.fixture(scope="module")
def bump_mm(bump):
    return resonance_search(bump, {"--": [(0.5, 3, -2, 2)], "+-": [(0.2, 1.0, -0.3, 0.3)]},
                            workers=1)


def test_bump_unphysical_residuals(bump, bump_mm):
    mm = bump_mm.on_sheet("--")
    assert mm
    for e in bump_mm.entries:
        assert e.status == "ok"
        assert e.residual <= 1e-8
        assert e.multiplicity == 1
    # independent check through the unstripped determinant and its scale
    z = np.array([e.xi for e in mm])
    h = 1e-4
    d0 = np.abs(delta_direct(bump, z, "--"))
    d1 = np.abs(delta_direct(bump, z + h, "--"))
    assert np.all(d0 <= 1e-6 * d1)


def test_catalog_sorted_and_conjugate_pairs(bump_mm):
    # sheet, then |xi|, then arg; moduli equal to 1e-12 count as ties
    es = bump_mm.entries
    for a, b in zip(es, es[1:]):
        assert a.sheet <= b.sheet
        if a.sheet == b.sheet:
            assert abs(a.xi) <= abs(b.xi) + 1e-12
            if abs(abs(a.xi) - abs(b.xi)) <= 1e-12:
                assert math.atan2(a.xi.imag, a.xi.real) <= math.atan2(b.xi.imag, b.xi.real)
    # q(conj xi) = -conj q(xi) on one label, so zeros come in conjugate pairs
    for e in bump_mm.entries:
        assert any(abs(o.xi - e.xi.conjugate()) <= 1e-8 for o in bump_mm.on_sheet(e.sheet))
    d = bump_mm.to_dict()
    assert set(d) >= {"profile_hash", "omega", "H", "entries", "search_regions", "tool_version"}


def test_catalog_deduplicates(bump):
    # overlapping regions report each zero once
    cat = resonance_search(bump, {"--": [(1.0 + 2e-7, 1.5, 0.05, 0.3), (1.1, 1.4, 0.05, 0.3)]},
                           workers=1)
    assert len(cat.entries) == 1


def test_parallel_search_is_deterministic(bump):
    regions = {"--": [(1.1, 1.4, -0.3, 0.3)]}
    a = resonance_search(bump, regions, workers=1).to_dict()
    b = resonance_search(bump, regions, workers=2).to_dict()
    assert a == b


def test_f_zeros_are_union_of_sheet_zeros(bump):
    box = (1.1, 1.4, 0.05, 0.3)
    nF = winding_count(lambda z: log_F_direct(bump, z), Contour.rectangle(*box), log=True)
    cat = resonance_search(bump, {str(s): [box] for s in SHEETS}, workers=1)
    assert nF >= 1
    assert nF == sum(e.multiplicity for e in cat.entries)


def test_split_region_avoids_cuts(bump):
    pieces = split_region(bump, (-3, 3, -2, 2))
    k = max(bump.kP, bump.kS)
    for x0, x1, y0, y1 in pieces:
        assert not (x0 < 0 < x1)
        if x1 <= k and x0 >= -k:
            assert not (y0 < 0 < y1)
    with pytest.raises(ValueError):
        split_region(bump, (1, 0, 0, 1))


# ---------------------------------------------------------------- counting


def test_counting_monotone(bump):
    t = counting_function(bump, [2.0, 4.0, 6.0, 8.0], split=True)
    assert all(b >= a for a, b in zip(t.counts, t.counts[1:]))
    assert t.reference_slope == pytest.approx(16 / math.pi)
    assert t.n_upper + t.n_lower == t.counts[-1]
    with pytest.raises(ValueError):
        counting_function(bump, [3.0, 2.0])


def slit_roots():
    """Real zeros of F for the Poisson half space in |xi| < 2 by bisection.

    On the physical sheet the Rayleigh root; inside (0, kP) both q's are
    real and the sheets with q_P q_S < 0 vanish where
    (1 - 2x^2)^2 = 4 x^2 sqrt((1/3 - x^2)(1 - x^2)).
    """
    def g(x):
        return (1 - 2 * x * x) ** 2 - 4 * x * x * math.sqrt((1 / 3 - x * x) * (1 - x * x))

    xs = np.linspace(1e-6, 3**-0.5 - 1e-9, 4001)
    v = np.array([g(x) for x in xs])
    roots = [brentq(g, xs[i], xs[i + 1], xtol=1e-15)
             for i in np.nonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0]]
    return roots + [rayleigh_root_bisection()]


def test_counting_matches_closed_form_zeros(poisson):
    # Delta on ++ and -- coincide for H = 0 (they depend on q_P q_S only), and
    # so do +- and -+, so every zero of F is double
    pos = slit_roots()
    assert len(pos) == 3
    t = counting_function(poisson, [2.0], split=True)
    assert t.counts[0] == 2 * 2 * len(pos)
    assert t.n_upper == t.n_lower == 2 * len(pos)
    zs = locate_zeros(lambda z: log_F_direct(poisson, z), (-1.9, 1.91, -1.93, 1.92))
    assert all(d["multiplicity"] == 2 for d in zs)
    want = sorted(pos + [-x for x in pos])
    np.testing.assert_allclose(sorted(d["xi"].real for d in zs), want, atol=1e-9)


# ---------------------------------------------------------------- diagnostics


def _catalog(points):
    entries = [ResonanceEntry(complex(z), "--", 1, 0.0, 1) for z in points]
    return ResonanceCatalog(entries, [], "x", 1.0, 1.0)


def test_forbidden_region_all_left(bump):
    rep = distribution_diagnostics(_catalog([-10 + 10j, -10 - 10j, 2 + 1j]), bump)
    f = rep["forbidden_region"]
    assert f["n_eligible"] == 2
    assert f["A_fit"] == pytest.approx(10 - 1.75 * math.log(10))
    assert f["all_left_of_curve"] and f["consistent"]
    assert f["violations"] == []


def test_forbidden_region_reports_violations(bump):
    rep = distribution_diagnostics(_catalog([-10 + 10j, -2 + 20j, -1 + 3j]), bump)
    f = rep["forbidden_region"]
    # -1 + 3i is below the |Im| threshold; -2 + 20i needs a negative A
    assert f["n_eligible"] == 2
    assert f["A_unconstrained"] == pytest.approx(2 - 1.75 * math.log(20))
    assert f["A_fit"] == 0.0
    assert f["violations"] == [[-2.0, 20.0]]
    assert not f["all_left_of_curve"]
    assert f["consistent"]


def test_sum_condition_and_sectors(bump, bump_mm):
    rep = distribution_diagnostics(bump_mm, bump)
    s = rep["sum_condition"]["partial_sums"]
    assert all(b >= a for a, b in zip(s, s[1:]))
    for b in rep["sectors"]["bins"]:
        assert 0.0 <= b["fraction_outside"] <= 1.0
    with pytest.raises(ValueError):
        distribution_diagnostics(_catalog([]), bump)
