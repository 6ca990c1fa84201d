"""Surface tractions, boundary matrix, Rayleigh determinant and its entire
decomposition.

Two evaluation routes are provided for Delta:

* direct: propagate the downgoing Jost pair of the requested sheet and take
  the determinant of the traction matrix;
* entire: propagate the four entire solutions once, form gamma_1..gamma_8
  and d_1..d_4, and assemble Delta = d1 + qP d2 + qS d3 + qP qS d4 on any
  sheet by sign flips of (qP, qS).

The direct route is the reference on a given sheet (no cancellation between
exponentially large entire terms on the physical sheet); the entire route
supplies every cross-sheet quantity from a single ODE family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .medium import MediumProfile
from .propagator import (DEFAULT_TOL, DisplacementTractionState, entire_surface,
                         jost_initial, jost_surface, propagate)
from .riemann import SHEETS, Rim, SheetPoint, on_cut, sheet_quasimomenta

__all__ = [
    "TractionPair",
    "BoundaryMatrix",
    "EntireOctet",
    "DeterminantSet",
    "IdentityReport",
    "traction_functionals",
    "boundary_from_states",
    "boundary_matrices",
    "delta_direct",
    "log_delta_direct",
    "log_F_direct",
    "boundary_matrix_and_delta",
    "gammas",
    "determinants_from_gammas",
    "determinant_arrays",
    "entire_octet_and_determinants",
    "delta_from_determinants",
    "sheet_deltas",
    "F_product",
    "F_from_determinants",
    "boundary_identity_suite",
    "relative_defect",
]


@dataclass(frozen=True)
class TractionPair:
    a_hat: complex
    b_hat: complex


@dataclass
class BoundaryMatrix:
    entries: np.ndarray
    point: SheetPoint

    @property
    def det(self):
        e = self.entries
        return complex(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])


@dataclass
class EntireOctet:
    gamma: np.ndarray  # gamma[0] is gamma_1
    xi: complex


@dataclass
class DeterminantSet:
    d1: complex
    d2: complex
    d3: complex
    d4: complex
    P_fun: complex
    S_fun: complex
    xi: complex


@dataclass
class IdentityReport:
    defects: dict
    threshold: float
    n_points: int
    details: dict = field(default_factory=dict)

    @property
    def max_defect(self):
        return max(self.defects.values()) if self.defects else 0.0

    @property
    def passed(self):
        return all(v <= self.threshold for v in self.defects.values())

    def to_dict(self):
        return {"defects": dict(self.defects), "threshold": self.threshold,
                "n_points": self.n_points, "max_defect": self.max_defect,
                "passed": self.passed, **({"details": self.details} if self.details else {})}


def relative_defect(lhs, rhs, *terms, floor=1e-30):
    """|lhs - rhs| divided by the largest modulus among the terms involved."""
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    for t in terms:
        scale = np.maximum(scale, np.abs(np.asarray(t)))
    return np.abs(lhs - rhs) / np.maximum(scale, floor)


def traction_functionals(state, p=None, xi=None) -> TractionPair:
    """(a_hat, b_hat) = (i v2, v1) of a surface state.

    The profile and wavenumber are accepted for symmetry with the
    displacement form but are not needed: the traction is part of the state.
    """
    if isinstance(state, DisplacementTractionState):
        return TractionPair(1j * state.v2, state.v1)
    a = np.asarray(state)
    return TractionPair(1j * a[..., 3], a[..., 2])


def boundary_from_states(y):
    """Traction matrix [[a(c0), a(c1)], [b(c0), b(c1)]] of the first two columns."""
    y = np.asarray(y)
    B = np.empty(y.shape[:-2] + (2, 2), dtype=complex)
    B[..., 0, 0] = 1j * y[..., 3, 0]
    B[..., 0, 1] = 1j * y[..., 3, 1]
    B[..., 1, 0] = y[..., 2, 0]
    B[..., 1, 1] = y[..., 2, 1]
    return B


def _det2(B):
    return B[..., 0, 0] * B[..., 1, 1] - B[..., 0, 1] * B[..., 1, 0]


def boundary_matrices(p: MediumProfile, xi, sheet, rim=Rim.OFF_CUT, tol=DEFAULT_TOL):
    """Direct route: (B_minus, B_plus, qP, qS) for a batch on one sheet.

    ``B_minus`` is the boundary matrix (downgoing pair); ``B_plus`` is the
    same traction matrix for the pair psi_P^+, psi_S^+.
    """
    xi = np.asarray(xi, dtype=complex)
    qP, qS = sheet_quasimomenta(p, xi, sheet, rim)
    y, logs = jost_surface(p, xi, qP, qS, tol=tol)
    if np.any(logs != 0):
        raise OverflowError("Jost columns not representable without scaling")
    Bm = boundary_from_states(y[..., :2])
    Bp = boundary_from_states(y[..., 2:])
    return Bm, Bp, qP, qS


def delta_direct(p: MediumProfile, xi, sheet, rim=Rim.OFF_CUT, tol=DEFAULT_TOL):
    """Rayleigh determinant on one sheet by direct Jost propagation (batched)."""
    xi = np.asarray(xi, dtype=complex)
    qP, qS = sheet_quasimomenta(p, xi, sheet, rim)
    y0, logs = jost_initial(p, xi, qP, qS)
    y = propagate(p, xi, y0[..., :2], tol=tol)
    Bm = boundary_from_states(y)
    log_total = logs[..., 0] + logs[..., 1]
    return _det2(Bm) * np.exp(log_total)


def log_delta_direct(p: MediumProfile, xi, sheet, rim=Rim.OFF_CUT, tol=DEFAULT_TOL):
    """Complex logarithm of Delta by direct propagation (batched).

    The exponential Jost factors are kept in the logarithm, so the result is
    finite where Delta itself would overflow.  The imaginary part is only
    defined modulo 2 pi.
    """
    xi = np.asarray(xi, dtype=complex)
    qP, qS = sheet_quasimomenta(p, xi, sheet, rim)
    y0, logs = jost_initial(p, xi, qP, qS)
    y = propagate(p, xi, y0[..., :2], tol=tol)
    with np.errstate(divide="ignore"):
        return np.log(_det2(boundary_from_states(y))) + logs[..., 0] + logs[..., 1]


def log_F_direct(p: MediumProfile, xi, tol=DEFAULT_TOL):
    """log F = sum over the four sheets of log Delta (direct route).

    Points inside a cut band are evaluated on the upper rim; F itself is
    rim independent because a rim change only permutes the sheets.
    """
    xi = np.asarray(xi, dtype=complex)
    slit, axis = on_cut(xi, max(p.kP, p.kS))
    rim = Rim.UPPER if np.any(slit | axis) else Rim.OFF_CUT
    total = np.zeros(xi.shape, dtype=complex)
    for sh in SHEETS:
        total = total + log_delta_direct(p, xi, sh, rim, tol)
    return total


def boundary_matrix_and_delta(p: MediumProfile, pt: SheetPoint, tol=DEFAULT_TOL):
    Bm, _, _, _ = boundary_matrices(p, np.array([pt.xi]), pt.sheet, pt.rim, tol)
    B = BoundaryMatrix(Bm[0], pt)
    return B, B.det


def gammas(p: MediumProfile, xi, tol=DEFAULT_TOL):
    """gamma_1..gamma_8 for a batch (last axis of length 8)."""
    xi = np.asarray(xi, dtype=complex)
    y = entire_surface(p, xi, tol=tol)
    g = np.empty(xi.shape + (8,), dtype=complex)
    for j in range(4):
        g[..., 2 * j] = 1j * y[..., 3, j]
        g[..., 2 * j + 1] = y[..., 2, j]
    return g


def determinants_from_gammas(g):
    """(d1, d2, d3, d4, P, S) arrays from gamma arrays."""
    g1, g2, g3, g4, g5, g6, g7, g8 = (g[..., k] for k in range(8))
    d1 = g1 * g6 - g5 * g2
    d2 = -g3 * g6 + g5 * g4
    d3 = -g1 * g8 + g7 * g2
    d4 = g3 * g8 - g7 * g4
    P = -2.0 * (g3 * g2 - g1 * g4)
    S = -2.0 * (g7 * g6 - g5 * g8)
    return d1, d2, d3, d4, P, S


def determinant_arrays(p: MediumProfile, xi, tol=DEFAULT_TOL):
    return determinants_from_gammas(gammas(p, xi, tol))


def entire_octet_and_determinants(p: MediumProfile, xi, tol=DEFAULT_TOL):
    g = gammas(p, np.array([complex(xi)]), tol)
    d1, d2, d3, d4, P, S = determinants_from_gammas(g)
    oct_ = EntireOctet(g[0].copy(), complex(xi))
    dset = DeterminantSet(complex(d1[0]), complex(d2[0]), complex(d3[0]), complex(d4[0]),
                          complex(P[0]), complex(S[0]), complex(xi))
    return oct_, dset


def delta_from_determinants(d, qP, qS):
    """Delta = d1 + qP d2 + qS d3 + qP qS d4 (DeterminantSet or tuple)."""
    if isinstance(d, DeterminantSet):
        d1, d2, d3, d4 = d.d1, d.d2, d.d3, d.d4
    else:
        d1, d2, d3, d4 = d[:4]
    return d1 + qP * d2 + qS * d3 + qP * qS * d4


def sheet_deltas(p: MediumProfile, xi, rim=Rim.OFF_CUT, tol=DEFAULT_TOL, dets=None):
    """Delta on all four sheets from one entire evaluation.

    Returns a dict keyed by sheet string, plus the physical-sheet (qP, qS).
    """
    xi = np.asarray(xi, dtype=complex)
    if dets is None:
        dets = determinant_arrays(p, xi, tol)
    qP, qS = sheet_quasimomenta(p, xi, "++", rim)
    out = {}
    for sh in SHEETS:
        out[str(sh)] = delta_from_determinants(dets, sh.sigmaP * qP, sh.sigmaS * qS)
    return out, (qP, qS)


def F_from_determinants(dets, xi, p: MediumProfile, normalise=False):
    """Closed algebraic form of F in terms of d_j and qP^2, qS^2 (no branches).

    With ``normalise`` the d's are divided by their largest modulus first,
    which changes F by a positive factor only (phase preserved).
    """
    d1, d2, d3, d4 = (np.asarray(v) for v in dets[:4])
    if normalise:
        s = np.maximum.reduce([np.abs(d1), np.abs(d2), np.abs(d3), np.abs(d4)])
        s = np.where(s > 0, s, 1.0)
        d1, d2, d3, d4 = d1 / s, d2 / s, d3 / s, d4 / s
    xi = np.asarray(xi, dtype=complex)
    qP2 = p.kP2 - xi * xi
    qS2 = p.kS2 - xi * xi
    a = d1 * d1 - qP2 * d2 * d2 - qS2 * d3 * d3 + qP2 * qS2 * d4 * d4
    b = d1 * d4 - d2 * d3
    return a * a - 4.0 * qP2 * qS2 * b * b


def F_product(p: MediumProfile, xi, tol=DEFAULT_TOL, check=True, rtol=1e-8):
    """F = Delta(xi) Delta(w_S xi) Delta(w_P xi) Delta(w_PS xi).

    Evaluated from one DeterminantSet by sign flips, and (when ``check``)
    compared against the closed form; a mismatch raises ``ArithmeticError``.
    """
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    dets = determinant_arrays(p, xi, tol)
    deltas, _ = sheet_deltas(p, xi, tol=tol, dets=dets)
    F1 = deltas["++"] * deltas["+-"] * deltas["-+"] * deltas["--"]
    if check:
        F2 = F_from_determinants(dets, xi, p)
        scale = np.abs(deltas["++"] * deltas["--"]) ** 2 + np.abs(deltas["+-"] * deltas["-+"]) ** 2
        bad = np.abs(F1 - F2) > rtol * np.maximum(scale, 1e-300)
        if np.any(bad):
            raise ArithmeticError("F routes disagree")
    return complex(F1[0]) if scalar else F1


def _sample_sets(samples):
    groups = {}
    for pt in samples:
        key = (pt.sheet, pt.rim)
        groups.setdefault(key, []).append(pt.xi)
    return groups


def boundary_identity_suite(p: MediumProfile, samples, tol=DEFAULT_TOL, threshold=1e-6):
    """Defects of the conjugation, algebraic and cross-sheet identities.

    ``samples`` is a list of SheetPoints.  Points on the real P-cut or on iR
    also feed the corresponding cut identities.
    """
    acc = {k: [] for k in ("conj_delta", "conj_real_cut", "conj_imag_cut", "num_identity",
                           "S_plus_P", "algebraic_relation", "cross_sheet", "reconstruction")}
    for (sheet, rim), xs in _sample_sets(samples).items():
        xi = np.asarray(xs, dtype=complex)
        Bm, Bp, qP, qS = boundary_matrices(p, xi, sheet, rim, tol)
        delta = _det2(Bm)
        g = gammas(p, xi, tol)
        d1, d2, d3, d4, P, S = determinants_from_gammas(g)
        # reconstruction of the direct Delta from the entire decomposition
        rd = delta_from_determinants((d1, d2, d3, d4), qP, qS)
        acc["reconstruction"].append(relative_defect(rd, delta, d1, qP * d2, qS * d3, qP * qS * d4))
        acc["num_identity"].append(relative_defect(P * S, 4 * (d1 * d4 - d2 * d3),
                                                    4 * d1 * d4, 4 * d2 * d3))
        acc["S_plus_P"].append(relative_defect(S, -P))
        lhs = 0.5 * S[:, None] * g[:, 0:4]
        g5, g6, g7, g8 = g[:, 4], g[:, 5], g[:, 6], g[:, 7]
        rhs = np.stack([-d3 * g5 - d1 * g7, -d3 * g6 - d1 * g8,
                        d4 * g5 + d2 * g7, d4 * g6 + d2 * g8], axis=1)
        terms = np.abs(np.stack([d3 * g5, d1 * g7, d3 * g6, d1 * g8,
                                 d4 * g5, d2 * g7, d4 * g6, d2 * g8], axis=1)).max(axis=1)
        acc["algebraic_relation"].append(
            np.max(np.abs(lhs - rhs), axis=1) / np.maximum(np.maximum(np.abs(lhs).max(axis=1), terms), 1e-30))
        # cross-sheet identity from sign flips of the same determinant set
        dd = (d1, d2, d3, d4)
        D = delta_from_determinants(dd, qP, qS)
        Dps = delta_from_determinants(dd, -qP, -qS)
        Dp = delta_from_determinants(dd, -qP, qS)
        Ds = delta_from_determinants(dd, qP, -qS)
        acc["cross_sheet"].append(relative_defect(D * Dps - Dp * Ds, qP * qS * P * S,
                                                  D * Dps, Dp * Ds))
        # conjugation: conj(Delta(conj xi)) = -Delta(xi) on the same sheet
        kS = p.kS
        slit, imax = on_cut(xi, kS)
        off = ~(slit | imax)
        if np.any(off):
            dc = delta_direct(p, np.conj(xi[off]), sheet, rim, tol)
            acc["conj_delta"].append(relative_defect(np.conj(dc), -delta[off]))
        realP = slit & (np.abs(xi.real) < p.kP)
        if np.any(realP):
            Bc = np.conj(Bm[realP])
            target = Bp[realP] * np.array([[-1.0], [1.0]])
            acc["conj_real_cut"].append(
                np.max(np.abs(Bc - target), axis=(1, 2)) / np.max(np.abs(Bc), axis=(1, 2)))
        if np.any(imax & ~slit):
            sel = imax & ~slit
            Bneg, _, _, _ = boundary_matrices(p, -xi[sel], sheet, rim, tol)
            Bc = np.conj(Bm[sel])
            target = Bneg * np.array([[-1.0], [1.0]])
            acc["conj_imag_cut"].append(
                np.max(np.abs(Bc - target), axis=(1, 2)) / np.max(np.abs(Bc), axis=(1, 2)))
    defects = {k: float(np.max(np.concatenate(v))) for k, v in acc.items() if v}
    return IdentityReport(defects, threshold, len(samples))
