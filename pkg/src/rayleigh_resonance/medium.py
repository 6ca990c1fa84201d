"""Elastic profile: a slab on [-H, 0] over a homogeneous lower half space.

Density is normalised to one, so a profile is fully described by the Lame
moduli lambda(Z), mu(Z), the half-space constants and the fixed angular
frequency.  Depth Z is non-positive; the free surface sits at Z = 0.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import make_interp_spline

try:  # pragma: no cover - exercised depending on interpreter version
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ProfileError",
    "MediumProfile",
    "LameSample",
    "ValidationReport",
    "PolynomialSlab",
    "SplineSlab",
    "bump_shape",
    "load_profile",
    "load_profile_file",
    "profile_from_mapping",
    "validate_profile",
    "sample_lame",
    "lame_derivatives",
    "homogeneous_profile",
]

SMOOTHNESS_TOL = 1e-10
SPLINE_SPAN_TOL = 1e-12


class ProfileError(ValueError):
    """Raised for malformed or physically inadmissible profile input."""


class PolynomialSlab:
    """Slab moduli given by polynomials in (Z - origin).

    Parameters
    ----------
    mu_coeffs, lambda_coeffs : sequence of float
        Ascending power coefficients.
    origin : float
        Expansion point of both polynomials.
    kind : str
        Label recorded for provenance ("constant", "polynomial", "bump").
    """

    def __init__(self, mu_coeffs, lambda_coeffs, origin=0.0, kind="polynomial"):
        self.mu_coeffs = np.atleast_1d(np.asarray(mu_coeffs, dtype=float))
        self.lambda_coeffs = np.atleast_1d(np.asarray(lambda_coeffs, dtype=float))
        self.origin = float(origin)
        self.kind = kind
        self.breakpoints: tuple[float, ...] = ()
        self._dl = [self.lambda_coeffs]
        self._dm = [self.mu_coeffs]
        for _ in range(4):
            self._dl.append(npoly.polyder(self._dl[-1]) if self._dl[-1].size > 1 else np.zeros(1))
            self._dm.append(npoly.polyder(self._dm[-1]) if self._dm[-1].size > 1 else np.zeros(1))

    def derivatives(self, Z, order=3):
        t = np.asarray(Z, dtype=float) - self.origin
        if order >= len(self._dl):
            raise ValueError("derivative order above 4 not supported")
        lam = [npoly.polyval(t, self._dl[k]) for k in range(order + 1)]
        mu = [npoly.polyval(t, self._dm[k]) for k in range(order + 1)]
        return np.array(lam), np.array(mu)

    def values(self, Z):
        """(lambda, mu) at a scalar depth inside the slab."""
        t = float(Z) - self.origin
        lam = 0.0
        for c in self.lambda_coeffs[::-1]:
            lam = lam * t + c
        mu = 0.0
        for c in self.mu_coeffs[::-1]:
            mu = mu * t + c
        return lam, mu


class SplineSlab:
    """Quintic interpolating splines through knot values.

    Three derivatives are pinned to zero at the slab base so the moduli join
    the constant tail in C^3; one extra condition at the surface closes the
    system (vanishing fourth derivative).
    """

    def __init__(self, knots, mu_values, lambda_values):
        self.kind = "spline"
        self.knots = np.asarray(knots, dtype=float)
        bc = ([(1, 0.0), (2, 0.0), (3, 0.0)], [(4, 0.0)])
        self._mu = make_interp_spline(self.knots, np.asarray(mu_values, float), k=5, bc_type=bc)
        self._lam = make_interp_spline(self.knots, np.asarray(lambda_values, float), k=5, bc_type=bc)
        self.breakpoints = tuple(float(z) for z in self.knots[1:-1])

    def values(self, Z):
        return float(self._lam(Z)), float(self._mu(Z))

    def derivatives(self, Z, order=3):
        Z = np.asarray(Z, dtype=float)
        lam = np.array([self._lam(Z, nu=k) for k in range(order + 1)])
        mu = np.array([self._mu(Z, nu=k) for k in range(order + 1)])
        return lam, mu


def bump_shape(H):
    """Ascending coefficients (in Z) of s(Z) = 256 Z^4 (Z+H)^4 / H^8.

    s vanishes to third order at Z = -H and Z = 0 and peaks at 1 mid-slab.
    """
    base = npoly.polymul([0.0, 1.0], [H, 1.0])  # Z (Z + H)
    return npoly.polypow(base, 4) * (256.0 / H**8)


@dataclass(frozen=True)
class MediumProfile:
    """Immutable elastic profile with fixed angular frequency."""

    omega: float
    H: float
    lambda0: float
    mu0: float
    slab: Any
    config: Mapping = field(default_factory=dict, compare=False, repr=False)

    @property
    def sigma0(self):
        return self.lambda0 + 2.0 * self.mu0

    @property
    def c0(self):
        return (self.lambda0 + self.mu0) / self.sigma0

    @property
    def kP2(self):
        return self.omega**2 / self.sigma0

    @property
    def kS2(self):
        return self.omega**2 / self.mu0

    @property
    def kP(self):
        return math.sqrt(self.kP2)

    @property
    def kS(self):
        return math.sqrt(self.kS2)

    @property
    def breakpoints(self):
        """Interior points of reduced smoothness in (-H, 0)."""
        return tuple(z for z in self.slab.breakpoints if -self.H < z < 0.0)

    @property
    def is_homogeneous(self):
        if self.H == 0.0:
            return True
        slab = self.slab
        return (
            isinstance(slab, PolynomialSlab)
            and slab.mu_coeffs.size == 1
            and slab.lambda_coeffs.size == 1
            and slab.mu_coeffs[0] == self.mu0
            and slab.lambda_coeffs[0] == self.lambda0
        )

    @property
    def profile_hash(self):
        text = json.dumps(_canonical(self.config), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class LameSample:
    Z: float
    lambda_: float
    mu: float
    dmu1: float
    dmu2: float
    dmu3: float
    dlambda1: float
    dlambda2: float = 0.0
    dlambda3: float = 0.0

    def as_tuple(self):
        return (self.lambda_, self.mu, self.dmu1, self.dmu2, self.dmu3, self.dlambda1)


@dataclass
class ValidationReport:
    mu_min: float
    mu_min_at: float
    ellipticity_min: float
    ellipticity_min_at: float
    tail_defects: dict
    smoothness_tol: float
    violations: list
    passed: bool

    def to_dict(self):
        return {
            "passed": self.passed,
            "mu_min": self.mu_min,
            "mu_min_at": self.mu_min_at,
            "ellipticity_min": self.ellipticity_min,
            "ellipticity_min_at": self.ellipticity_min_at,
            "tail_defects": dict(self.tail_defects),
            "smoothness_tol": self.smoothness_tol,
            "violations": list(self.violations),
        }


def _canonical(obj):
    if isinstance(obj, Mapping):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    return obj


def _finite(name, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ProfileError(f"field {name!r} is not numeric: {value!r}") from None
    if not math.isfinite(v):
        raise ProfileError(f"field {name!r} is not finite")
    return v


def _float_list(name, value):
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ProfileError(f"field {name!r} must be a non-empty list of numbers")
    return [_finite(name, v) for v in value]


def homogeneous_profile(omega=1.0, H=0.0, lambda0=1.0, mu0=1.0):
    """Constant slab (identical to the half space)."""
    cfg = {
        "medium": {"omega": omega, "H": H, "lambda0": lambda0, "mu0": mu0},
        "slab": {"kind": "constant"},
    }
    return profile_from_mapping(cfg)


def profile_from_mapping(cfg: Mapping) -> MediumProfile:
    """Build a profile from an already-parsed configuration mapping."""
    if not isinstance(cfg, Mapping) or "medium" not in cfg:
        raise ProfileError("missing [medium] section")
    med = cfg["medium"]
    slab_cfg = cfg.get("slab", {"kind": "constant"})
    for section in (med, slab_cfg):
        for key in section:
            if key.lower() in ("rho", "density", "rho0"):
                raise ProfileError("density is fixed to one; remove the density field")
    for key in cfg:
        if key not in ("medium", "slab"):
            raise ProfileError(f"unknown section [{key}]")

    missing = [k for k in ("omega", "H", "lambda0", "mu0") if k not in med]
    if missing:
        raise ProfileError(f"missing medium fields: {', '.join(missing)}")
    omega = _finite("omega", med["omega"])
    H = _finite("H", med["H"])
    lambda0 = _finite("lambda0", med["lambda0"])
    mu0 = _finite("mu0", med["mu0"])
    if omega <= 0:
        raise ProfileError("omega must be positive")
    if H < 0:
        raise ProfileError("negative H")
    if mu0 <= 0:
        raise ProfileError("non-positive mu0")
    if 2 * mu0 + 3 * lambda0 <= 0:
        raise ProfileError("half space violates strong ellipticity (2 mu0 + 3 lambda0 <= 0)")

    kind = str(slab_cfg.get("kind", "constant")).lower()
    if kind == "constant":
        slab = PolynomialSlab([mu0], [lambda0], kind="constant")
    elif kind == "polynomial":
        mu_c = _float_list("mu", slab_cfg.get("mu", [mu0]))
        lam_c = _float_list("lambda", slab_cfg.get("lambda", [lambda0]))
        origin = _finite("origin", slab_cfg.get("origin", 0.0))
        slab = PolynomialSlab(mu_c, lam_c, origin=origin, kind="polynomial")
    elif kind == "bump":
        if H <= 0:
            raise ProfileError("bump slab needs H > 0")
        amp_mu = _finite("amp_mu", slab_cfg.get("amp_mu", 0.0))
        amp_lam = _finite("amp_lambda", slab_cfg.get("amp_lambda", 0.0))
        s = bump_shape(H)
        mu_c = amp_mu * s
        lam_c = amp_lam * s
        mu_c[0] += mu0
        lam_c[0] += lambda0
        slab = PolynomialSlab(mu_c, lam_c, kind="bump")
    elif kind == "spline":
        knots = _float_list("knots", slab_cfg.get("knots"))
        mu_v = _float_list("mu", slab_cfg.get("mu"))
        lam_v = _float_list("lambda", slab_cfg.get("lambda", [lambda0] * len(knots)))
        if len(mu_v) != len(knots) or len(lam_v) != len(knots):
            raise ProfileError("spline knot and value lists differ in length")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ProfileError("spline knots must be strictly increasing")
        tol = SPLINE_SPAN_TOL * max(1.0, H)
        if H <= 0 or abs(knots[0] + H) > tol or abs(knots[-1]) > tol:
            raise ProfileError("slab domain incomplete: knots must span [-H, 0]")
        if len(knots) < 6:
            raise ProfileError("quintic spline needs at least 6 knots")
        slab = SplineSlab(knots, mu_v, lam_v)
    else:
        raise ProfileError(f"unsupported kind {kind!r}")

    return MediumProfile(omega=omega, H=H, lambda0=lambda0, mu0=mu0, slab=slab,
                         config=_canonical_plain(cfg))


def _canonical_plain(cfg):
    if isinstance(cfg, Mapping):
        return {str(k): _canonical_plain(v) for k, v in cfg.items()}
    if isinstance(cfg, (list, tuple)):
        return [_canonical_plain(v) for v in cfg]
    return cfg


def load_profile(source: str) -> MediumProfile:
    """Parse profile configuration text (TOML) into a MediumProfile."""
    try:
        cfg = tomllib.loads(source)
    except tomllib.TOMLDecodeError as exc:
        raise ProfileError(f"parse failure: {exc}") from None
    return profile_from_mapping(cfg)


def load_profile_file(path) -> MediumProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return load_profile(fh.read())


def lame_derivatives(p: MediumProfile, Z, order=3):
    """Arrays ``(lam, mu)`` of shape (order+1, *Z.shape) holding Z-derivatives.

    Values for Z <= -H are the exact tail constants with zero derivatives.
    """
    Z = np.asarray(Z, dtype=float)
    if np.any(Z > 0):
        raise ProfileError("depth Z must be <= 0")
    lam = np.zeros((order + 1,) + Z.shape)
    mu = np.zeros((order + 1,) + Z.shape)
    lam[0] = p.lambda0
    mu[0] = p.mu0
    inside = Z > -p.H
    if np.any(inside):
        ml, mm = p.slab.derivatives(Z[inside], order)
        lam[:, inside] = ml
        mu[:, inside] = mm
    return lam, mu


def sample_lame(p: MediumProfile, Z: float) -> LameSample:
    """Lame moduli and derivatives at a single depth."""
    Z = float(Z)
    lam, mu = lame_derivatives(p, Z)
    return LameSample(Z=Z, lambda_=float(lam[0]), mu=float(mu[0]), dmu1=float(mu[1]),
                      dmu2=float(mu[2]), dmu3=float(mu[3]), dlambda1=float(lam[1]),
                      dlambda2=float(lam[2]), dlambda3=float(lam[3]))


def validate_profile(p: MediumProfile, n_samples: int = 401,
                     smoothness_tol: float = SMOOTHNESS_TOL) -> ValidationReport:
    """Report ellipticity margins and C^3 matching defects at the slab base."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if p.H > 0:
        Z = np.linspace(-p.H, 0.0, n_samples)
        Z = np.union1d(Z, np.asarray(p.breakpoints, float))
        lam, mu = p.slab.derivatives(Z, 3)
        lam0, mu0 = lam[0], mu[0]
    else:
        Z = np.array([0.0])
        lam0 = np.array([p.lambda0])
        mu0 = np.array([p.mu0])
    ell = 2 * mu0 + 3 * lam0
    violations = []
    bad_mu = np.nonzero(mu0 <= 0)[0]
    if bad_mu.size:
        violations.append({"kind": "mu_nonpositive", "Z": float(Z[bad_mu[0]]),
                           "value": float(mu0[bad_mu[0]])})
    bad_ell = np.nonzero(ell <= 0)[0]
    if bad_ell.size:
        violations.append({"kind": "ellipticity", "Z": float(Z[bad_ell[0]]),
                           "value": float(ell[bad_ell[0]])})

    defects = {}
    if p.H > 0:
        base_l, base_m = p.slab.derivatives(np.array([-p.H]), 3)
        defects["lambda"] = abs(float(base_l[0, 0]) - p.lambda0)
        defects["mu"] = abs(float(base_m[0, 0]) - p.mu0)
        for k in (1, 2, 3):
            defects[f"dmu{k}"] = abs(float(base_m[k, 0]))
            defects[f"dlambda{k}"] = abs(float(base_l[k, 0]))
    else:
        defects = {key: 0.0 for key in ("lambda", "mu", "dmu1", "dmu2", "dmu3",
                                        "dlambda1", "dlambda2", "dlambda3")}
    scale = max(1.0, abs(p.mu0), abs(p.lambda0))
    for key, val in defects.items():
        if val > smoothness_tol * scale:
            violations.append({"kind": "tail_mismatch", "Z": -p.H, "field": key, "value": val})

    i_mu = int(np.argmin(mu0))
    i_ell = int(np.argmin(ell))
    return ValidationReport(
        mu_min=float(mu0[i_mu]), mu_min_at=float(Z[i_mu]),
        ellipticity_min=float(ell[i_ell]), ellipticity_min_at=float(Z[i_ell]),
        tail_defects=defects, smoothness_tol=smoothness_tol,
        violations=violations, passed=not violations,
    )
