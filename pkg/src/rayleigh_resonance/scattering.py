"""Reflection matrix, flux normalisation and the unitarity identities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import (IdentityReport, _det2, boundary_matrices, delta_from_determinants,
                       determinant_arrays, relative_defect)
from .medium import MediumProfile
from .propagator import DEFAULT_TOL
from .riemann import Rim, SheetPoint, parse_sheet

__all__ = [
    "NearResonanceError",
    "ReflectionMatrix",
    "FluxNormalizedReflection",
    "reflection_arrays",
    "reflection_matrix",
    "flux_normalize",
    "flux_normalize_arrays",
    "scattering_identity_suite",
]

NEAR_RESONANCE = 1e-8
ROUTE_TOL = 1e-7


class NearResonanceError(ArithmeticError):
    """|Delta| too small relative to the boundary-matrix entries."""


@dataclass
class ReflectionMatrix:
    entries: np.ndarray
    point: SheetPoint
    qP: complex
    qS: complex
    R1: complex
    R1t: complex
    R2: complex
    R2t: complex
    delta: complex

    @property
    def det(self):
        e = self.entries
        return complex(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])


@dataclass
class FluxNormalizedReflection:
    entries: np.ndarray
    point: SheetPoint


def reflection_arrays(p: MediumProfile, xi, sheet, rim=Rim.OFF_CUT, tol=DEFAULT_TOL,
                      route_tol=ROUTE_TOL, near_tol=NEAR_RESONANCE):
    """Batched reflection data on one sheet.

    Returns a dict with the matrix ``R`` (shape batch+(2,2)), the coefficients
    R1, R1t, R2, R2t, Delta, qP, qS and the route defect.  Both the matrix
    route -B^{-1} B(w_PS) and the determinant route are evaluated.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    Bm, Bp, qP, qS = boundary_matrices(p, xi, sheet, rim, tol)
    delta = _det2(Bm)
    ref = np.abs(Bm[..., 0, 0] * Bm[..., 1, 1]) + np.abs(Bm[..., 0, 1] * Bm[..., 1, 0])
    if np.any(np.abs(delta) < near_tol * ref):
        raise NearResonanceError("near-resonance: Delta vanishes to working precision")
    R_mat = -np.linalg.solve(Bm, Bp)

    d1, d2, d3, d4, P, S = determinant_arrays(p, xi, tol)
    dd = (d1, d2, d3, d4)
    D = delta_from_determinants(dd, qP, qS)
    DwP = delta_from_determinants(dd, -qP, qS)
    DwS = delta_from_determinants(dd, qP, -qS)
    R1 = P / D
    R1t = S / D
    R2 = -DwP / D
    R2t = -DwS / D
    R_det = np.empty_like(R_mat)
    R_det[..., 0, 0] = R2
    R_det[..., 0, 1] = qS * R1t
    R_det[..., 1, 0] = -qP * R1
    R_det[..., 1, 1] = R2t
    scale = np.max(np.abs(R_mat), axis=(-2, -1))
    defect = np.max(np.abs(R_mat - R_det), axis=(-2, -1)) / scale
    if np.any(defect > route_tol):
        raise ArithmeticError(f"reflection routes disagree (defect {defect.max():.3g})")
    return {"R": R_mat, "R1": R1, "R1t": R1t, "R2": R2, "R2t": R2t, "delta": delta,
            "qP": qP, "qS": qS, "route_defect": defect, "dets": (d1, d2, d3, d4, P, S)}


def reflection_matrix(p: MediumProfile, pt: SheetPoint, tol=DEFAULT_TOL) -> ReflectionMatrix:
    r = reflection_arrays(p, np.array([pt.xi]), pt.sheet, pt.rim, tol)
    return ReflectionMatrix(r["R"][0], pt, complex(r["qP"][0]), complex(r["qS"][0]),
                            complex(r["R1"][0]), complex(r["R1t"][0]), complex(r["R2"][0]),
                            complex(r["R2t"][0]), complex(r["delta"][0]))


def flux_normalize_arrays(R, qP, qS):
    """[[R2, i s R1t], [i s R1, R2t]] with s the principal root of qP qS."""
    s = np.sqrt(np.asarray(qP) * np.asarray(qS))
    out = np.array(R, dtype=complex, copy=True)
    # R[0,1] = qS R1t and R[1,0] = -qP R1
    out[..., 0, 1] = 1j * s * R[..., 0, 1] / qS
    out[..., 1, 0] = -1j * s * R[..., 1, 0] / qP
    return out


def flux_normalize(r: ReflectionMatrix) -> FluxNormalizedReflection:
    s = np.sqrt(r.qP * r.qS)
    e = np.array([[r.R2, 1j * s * r.R1t], [1j * s * r.R1, r.R2t]], dtype=complex)
    return FluxNormalizedReflection(e, r.point)


def scattering_identity_suite(p: MediumProfile, cut_samples, band_samples, tol=DEFAULT_TOL,
                              sheet="++", rim=Rim.UPPER, threshold=1e-6):
    """Unitarity-type identities on the P cut and |R2t| = 1 on the band.

    ``cut_samples`` lie in (-kP, kP), ``band_samples`` in kP < |xi| < kS.
    """
    sheet = parse_sheet(sheet)
    defects = {}
    cut = np.asarray(cut_samples, dtype=complex)
    if cut.size:
        if np.any(np.abs(cut.imag) > 0) or np.any(np.abs(cut.real) >= p.kP):
            raise ValueError("cut samples must be real and inside (-kP, kP)")
        r = reflection_arrays(p, cut, sheet, rim, tol)
        qP, qS = r["qP"], r["qS"]
        d1, d2, d3, d4, P, S = r["dets"]
        dd = (d1, d2, d3, d4)
        D = r["delta"]
        DwP = delta_from_determinants(dd, -qP, qS)
        DwS = delta_from_determinants(dd, qP, -qS)
        DwPS = delta_from_determinants(dd, -qP, -qS)
        s = np.sqrt(qP * qS)
        a2 = np.abs(s) ** 2
        defects["RU1"] = float(np.max(relative_defect(a2 * np.abs(S) ** 2 + np.abs(DwP) ** 2,
                                                      np.abs(D) ** 2)))
        defects["RU2"] = float(np.max(relative_defect(a2 * np.abs(P) ** 2 + np.abs(DwS) ** 2,
                                                      np.abs(D) ** 2)))
        t1 = 1j * np.conj(s) * DwP * np.conj(P)
        t2 = 1j * s * np.conj(DwS) * S
        defects["RU3"] = float(np.max(relative_defect(t1, t2, np.abs(D) ** 2)))
        defects["conj_wP_wS"] = float(np.max(relative_defect(DwP, -np.conj(DwS))))
        defects["conj_delta_wPS"] = float(np.max(relative_defect(D, -np.conj(DwPS))))
        Rt = flux_normalize_arrays(r["R"], qP, qS)
        eye = np.eye(2)
        U = np.einsum("...ij,...kj->...ik", Rt, np.conj(Rt))
        defects["unitarity"] = float(np.max(np.abs(U - eye)))
    band = np.asarray(band_samples, dtype=complex)
    if band.size:
        ab = np.abs(band.real)
        if np.any(np.abs(band.imag) > 0) or np.any(ab <= p.kP) or np.any(ab >= p.kS):
            raise ValueError("band samples must be real with kP < |xi| < kS")
        r = reflection_arrays(p, band, sheet, rim, tol)
        defects["S_to_S_modulus"] = float(np.max(np.abs(np.abs(r["R2t"]) - 1.0)))
    n = int(cut.size + band.size)
    return IdentityReport(defects, threshold, n)
