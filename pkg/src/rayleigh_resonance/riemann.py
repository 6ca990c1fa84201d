"""Quasimomenta on the four-sheeted Riemann surface.

A sheet is labelled by the signs (sigma_P, sigma_S) of Im q_P and Im q_S.
Sheet values are realised as +/- the principal square root with the sign
matched to the label.  The projected cuts are the real slit
[-k_S, k_S] and the imaginary axis; on a cut the value is the limit from the
side selected by the rim tag:

* upper rim: from Im xi > 0 on the real slit, from Re xi > 0 on iR;
* lower rim: the opposite side.

Off the cuts the rim tag is ignored.  Inside the tolerance band around a cut
an ``OFF_CUT`` tag resolves to the upper rim.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "BranchPointError",
    "Rim",
    "SheetLabel",
    "SheetPoint",
    "QuasimomentumPair",
    "SHEETS",
    "PHYSICAL",
    "parse_sheet",
    "quasimomenta",
    "branch_values",
    "apply_sheet_map",
    "gamma_bound",
    "on_cut",
    "CUT_BAND",
]

CUT_BAND = 1e-9
BRANCH_TOL = 1e-13


class BranchPointError(ValueError):
    """Evaluation requested at a branch point (or at xi = 0)."""


class Rim(enum.Enum):
    OFF_CUT = "off-cut"
    UPPER = "upper-rim"
    LOWER = "lower-rim"


@dataclass(frozen=True, order=True)
class SheetLabel:
    sigmaP: int
    sigmaS: int

    def __post_init__(self):
        if self.sigmaP not in (1, -1) or self.sigmaS not in (1, -1):
            raise ValueError("sheet signs must be +1 or -1")

    def __str__(self):
        return ("+" if self.sigmaP > 0 else "-") + ("+" if self.sigmaS > 0 else "-")

    @classmethod
    def from_str(cls, s: str) -> "SheetLabel":
        return parse_sheet(s)

    def flip(self, P=False, S=False):
        return SheetLabel(-self.sigmaP if P else self.sigmaP, -self.sigmaS if S else self.sigmaS)


def parse_sheet(s) -> SheetLabel:
    if isinstance(s, SheetLabel):
        return s
    if not isinstance(s, str) or len(s) != 2 or any(c not in "+-" for c in s):
        raise ValueError(f"invalid sheet label {s!r}; expected one of ++, +-, -+, --")
    return SheetLabel(1 if s[0] == "+" else -1, 1 if s[1] == "+" else -1)


SHEETS = tuple(parse_sheet(s) for s in ("++", "+-", "-+", "--"))
PHYSICAL = SHEETS[0]


@dataclass(frozen=True)
class QuasimomentumPair:
    qP: complex
    qS: complex


@dataclass(frozen=True)
class SheetPoint:
    xi: complex
    sheet: SheetLabel = PHYSICAL
    rim: Rim = Rim.OFF_CUT

    def __post_init__(self):
        object.__setattr__(self, "xi", complex(self.xi))
        object.__setattr__(self, "sheet", parse_sheet(self.sheet))
        if not np.isfinite(self.xi):
            raise ValueError("xi must be finite")

    def with_sheet(self, sheet):
        return replace(self, sheet=parse_sheet(sheet))


def _band(xi):
    return CUT_BAND * np.maximum(1.0, np.abs(xi))


def on_cut(xi, k):
    """Masks (real_slit, imaginary_axis) for points inside the cut bands."""
    xi = np.asarray(xi, dtype=complex)
    tol = _band(xi)
    real_slit = (np.abs(xi.imag) <= tol) & (np.abs(xi.real) <= k + tol)
    imag_axis = np.abs(xi.real) <= tol
    return real_slit, imag_axis


def branch_values(xi, k2, sigma, rim=Rim.OFF_CUT):
    """Sheet value of sqrt(k2 - xi^2) with sign(Im q) = sigma (vectorised).

    Parameters
    ----------
    xi : array_like of complex
    k2 : float
        omega^2 / c for the wave type.
    sigma : int or array of int
        Sheet sign for this wave type.
    rim : Rim or array of int
        +1 for the upper rim, -1 for the lower rim (enum accepted).
    """
    xi = np.asarray(xi, dtype=complex)
    sigma = np.broadcast_to(np.asarray(sigma), xi.shape)
    if isinstance(rim, Rim):
        rim_sign = -1 if rim is Rim.LOWER else 1
    else:
        rim_sign = np.asarray(rim)
    rim_sign = np.broadcast_to(rim_sign, xi.shape)

    w = k2 - xi * xi
    if np.any(np.abs(w) <= BRANCH_TOL * np.maximum(1.0, np.abs(xi) ** 2)):
        raise BranchPointError("branch point; excise")
    q0 = np.sqrt(w)
    k = np.sqrt(k2)
    real_slit, imag_axis = on_cut(xi, k)
    if np.any(real_slit & imag_axis):
        raise BranchPointError("xi = 0 lies on both cuts; excise")

    off = ~(real_slit | imag_axis)
    s = np.where(np.sign(q0.imag) == sigma, 1.0, -1.0)
    # On a cut the sigma-branch at xi + delta*n (n = +i on the slit, n = +1
    # on iR for the upper rim) has sign s = -sigma * sign(Im(xi n)).
    mag = np.sqrt(np.abs(w))
    s_slit = -sigma * np.sign(xi.real) * rim_sign
    s_imag = -sigma * np.sign(xi.imag) * rim_sign
    q = np.where(off, s * q0, 0.0)
    q = np.where(real_slit, s_slit * mag, q)
    q = np.where(imag_axis & ~real_slit, s_imag * mag, q)
    return q


def _rim_sign(rim: Rim) -> int:
    return -1 if rim is Rim.LOWER else 1


def quasimomenta(p, pt: SheetPoint) -> QuasimomentumPair:
    """Sheet quasimomenta (q_P, q_S) at a SheetPoint."""
    rs = _rim_sign(pt.rim)
    qP = branch_values(pt.xi, p.kP2, pt.sheet.sigmaP, rs)
    qS = branch_values(pt.xi, p.kS2, pt.sheet.sigmaS, rs)
    return QuasimomentumPair(complex(qP), complex(qS))


def sheet_quasimomenta(p, xi, sheet, rim=Rim.OFF_CUT):
    """Vectorised (q_P, q_S) arrays for many xi on one sheet."""
    sheet = parse_sheet(sheet)
    rs = _rim_sign(rim) if isinstance(rim, Rim) else rim
    return (branch_values(xi, p.kP2, sheet.sigmaP, rs),
            branch_values(xi, p.kS2, sheet.sigmaS, rs))


def apply_sheet_map(pt: SheetPoint, map: str) -> SheetPoint:
    """Apply w_P, w_S or w_SP (also spelled wPS) at fixed projection."""
    key = map.replace("_", "").lower()
    if key == "wp":
        sheet = pt.sheet.flip(P=True)
    elif key == "ws":
        sheet = pt.sheet.flip(S=True)
    elif key in ("wsp", "wps"):
        sheet = pt.sheet.flip(P=True, S=True)
    else:
        raise ValueError(f"unknown sheet map {map!r}")
    return replace(pt, sheet=sheet)


def gamma_bound(p, pt: SheetPoint) -> float:
    """Growth function gamma(xi) controlling the Jost solutions on a sheet.

    With a = Im q_P, b = Im q_S this is the largest of |a| - a,
    (|a - b| - (a - b))/2 and (|a + b| - (a + b))/2.
    """
    q = quasimomenta(p, pt)
    a, b = q.qP.imag, q.qS.imag
    return float(max(abs(a) - a, 0.5 * (abs(a - b) - (a - b)), 0.5 * (abs(a + b) - (a + b))))


__all__ += ["sheet_quasimomenta"]


def sample_points(p, n, rng, sheets=SHEETS, radius=None, cut_fraction=0.2, clearance=0.05):
    """Random SheetPoints for identity checks, ``n`` per sheet.

    Points are drawn in the box |Re xi| <= radius, |Im xi| <= radius / 2
    (radius defaults to 2 k_S + 1), kept ``clearance`` away from the branch
    points and the origin.  A fraction ``cut_fraction`` lies on the cuts
    (half on the real slit, half on iR) with the upper rim tag.
    """
    rng = np.random.default_rng(rng)
    R = 2.0 * p.kS + 1.0 if radius is None else float(radius)
    branch = np.array([p.kP, -p.kP, p.kS, -p.kS, 0.0], dtype=complex)
    n_cut = int(round(n * cut_fraction))
    out = []
    for sheet in sheets:
        sheet = parse_sheet(sheet)
        k = 0
        while k < n:
            if k < n_cut // 2:
                xi, rim = complex(rng.uniform(-p.kS, p.kS)), Rim.UPPER
            elif k < n_cut:
                xi, rim = complex(0.0, rng.uniform(-R / 2, R / 2)), Rim.UPPER
            else:
                xi, rim = complex(rng.uniform(-R, R), rng.uniform(-R / 2, R / 2)), Rim.OFF_CUT
                if any(on_cut(xi, p.kS)):
                    continue
            if np.min(np.abs(branch - xi)) < clearance:
                continue
            out.append(SheetPoint(xi, sheet, rim))
            k += 1
    return out


__all__ += ["sample_points"]
