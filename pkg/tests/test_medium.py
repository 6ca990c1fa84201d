import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rayleigh_resonance.medium import (ProfileError, load_profile, profile_from_mapping,
                                       sample_lame, validate_profile)


def _cfg(**slab):
    return {"medium": {"omega": 1.0, "H": 1.0, "lambda0": 1.0, "mu0": 1.0}, "slab": slab}


def test_constant_half_space_derived_fields():
    p = load_profile("[medium]\nomega = 1\nH = 0\nlambda0 = 1\nmu0 = 1\n[slab]\nkind = 'constant'\n")
    assert p.sigma0 == 3.0
    assert p.c0 == pytest.approx(2.0 / 3.0, abs=0)


def test_spline_domain_incomplete():
    cfg = _cfg(kind="spline", knots=[-0.8, -0.6, -0.4, -0.2, -0.1, 0.0],
               mu=[1.0] * 6, **{"lambda": [1.0] * 6})
    with pytest.raises(ProfileError, match="slab domain incomplete"):
        profile_from_mapping(cfg)


@pytest.mark.parametrize("text, msg", [
    ("[medium]\nomega = 1\nH = -1\nlambda0 = 1\nmu0 = 1\n", "negative H"),
    ("[medium]\nomega = 1\nH = 1\nlambda0 = 1\nmu0 = 0\n", "mu0"),
    ("[medium]\nomega = 1\nH = 1\nlambda0 = 1\nmu0 = 1\n[slab]\nkind = 'fourier'\n", "unsupported"),
    ("[medium]\nomega = 1\nH = 1\nlambda0 = 1\nmu0 = 1\nrho = 2\n", "density"),
    ("[medium\nomega = 1\n", ""),
    ("[medium]\nomega = inf\nH = 1\nlambda0 = 1\nmu0 = 1\n", "finite"),
])
def test_load_errors(text, msg):
    with pytest.raises(ProfileError, match=msg or None):
        load_profile(text)


def test_bump_profile_passes_validation(bump):
    rep = validate_profile(bump)
    assert rep.passed
    assert max(rep.tail_defects.values()) <= 1e-10


def test_bump_tail_matching_by_finite_differences(bump):
    # one-sided differences just above -H against the constant tail
    h = 1e-3
    Z = -bump.H + h * np.arange(1, 5)
    mu = np.array([sample_lame(bump, z).mu for z in Z])
    # mu - mu0 vanishes to fourth order: ratio to h^4 stays bounded
    assert np.all(np.abs(mu - bump.mu0) <= 1e3 * (Z + bump.H) ** 4)


def test_constant_profile_margins(const_slab):
    rep = validate_profile(const_slab)
    assert rep.passed
    assert rep.mu_min == 1.0 and rep.ellipticity_min == 5.0


def test_sign_change_is_reported():
    p = profile_from_mapping(_cfg(kind="polynomial", origin=-1.0, mu=[1.0, 0, 0, 0, -3.0]))
    rep = validate_profile(p)
    assert not rep.passed
    v = [x for x in rep.violations if x["kind"] == "mu_nonpositive"]
    assert v and -1.0 < v[0]["Z"] <= 0.0


def test_sample_constant(const_slab):
    s = sample_lame(const_slab, -0.5)
    assert s.as_tuple() == (1.0, 1.0, 0.0, 0.0, 0.0, 0.0)


def test_sample_polynomial_derivatives():
    p = profile_from_mapping(_cfg(kind="polynomial", origin=0.0, mu=[1.0, 0.0, 1.0]))
    s = sample_lame(p, -0.5)
    assert s.mu == pytest.approx(1.25)
    assert (s.dmu1, s.dmu2, s.dmu3) == (pytest.approx(-1.0), pytest.approx(2.0), 0.0)


def test_sample_above_surface_rejected(bump):
    with pytest.raises(ValueError):
        sample_lame(bump, 0.1)


def test_tail_constancy(bump, rng):
    for Z in -bump.H - rng.exponential(2.0, 100):
        assert sample_lame(bump, Z).as_tuple() == (1.0, 1.0, 0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("name", ["bump", "poly", "spline"])
def test_derivatives_match_finite_differences(name, request):
    p = request.getfixturevalue(name)
    h = 1e-4 * p.H
    for Z in np.linspace(-0.9, -0.1, 9) * p.H:
        s = sample_lame(p, Z)
        a = sample_lame(p, Z - h)
        b = sample_lame(p, Z + h)
        fd = [(b.mu - a.mu) / (2 * h), (b.dmu1 - a.dmu1) / (2 * h), (b.dmu2 - a.dmu2) / (2 * h),
              (b.lambda_ - a.lambda_) / (2 * h)]
        exact = [s.dmu1, s.dmu2, s.dmu3, s.dlambda1]
        for f, e in zip(fd, exact):
            assert abs(f - e) <= 1e-6 * max(1.0, abs(e))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(-0.3, 0.3))
def test_bump_family_validates(a_mu, a_lam):
    p = profile_from_mapping(_cfg(kind="bump", amp_mu=a_mu, amp_lambda=a_lam))
    assert validate_profile(p).passed


def test_profile_hash_is_canonical():
    a = load_profile("[medium]\nomega = 1.0\nH = 0\nlambda0 = 1\nmu0 = 1\n")
    b = load_profile("[medium]\nmu0 = 1\nlambda0 = 1\nH = 0\nomega = 1.0\n")
    c = load_profile("[medium]\nomega = 1.5\nH = 0\nlambda0 = 1\nmu0 = 1\n")
    assert a.profile_hash == b.profile_hash != c.profile_hash
